#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "dropspread/area.hpp"
#include "dropspread/cmc.hpp"
#include "dropspread/loss.hpp"
#include "dropspread/model.hpp"
#include "dropspread/training.hpp"

using namespace dropspread;

namespace {

Tensor noise_image(int channels, int side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor t(channels, side, side);
  for (double& v : t.values()) v = u(rng);
  return t;
}

BinaryMask disk(int side) {
  BinaryMask m(side, side);
  const double c = side / 2.0, r = side / 3.0;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) m.set(y, x, std::hypot(y + 0.5 - c, x + 0.5 - c) < r);
  }
  return m;
}

void BM_Forward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto params = build_model({6, 8, 3}, 1);
  const Tensor image = noise_image(3, side, 2);
  for (auto _ : state) benchmark::DoNotOptimize(forward(params, image));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_Forward)->Arg(64)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const std::vector<AnnotatedSample> data{{noise_image(3, side, 3), disk(side), "bench", {}}};
  TrainOptions opt;
  opt.epochs = 1;
  opt.learning_rate = 1e-3;
  const auto params = build_model({3, 8, 3}, 1);
  for (auto _ : state) benchmark::DoNotOptimize(train(params, data, {}, opt));
}
BENCHMARK(BM_TrainStep)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_BalancedBce(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const Tensor scores = noise_image(1, side, 4);
  const BinaryMask target = disk(side);
  for (auto _ : state) {
    benchmark::DoNotOptimize(balanced_bce_from_scores(scores, target));
    benchmark::DoNotOptimize(balanced_bce_gradient(scores, target));
  }
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_BalancedBce)->Arg(256)->Arg(1024);

void BM_EstimateMaxArea(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(5);
  std::normal_distribution<double> jitter(0.0, 0.3);
  std::vector<AreaSample> series;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / n;
    const double area = t < 0.3 ? 50.0 * t / 0.3 : (t < 0.7 ? 50.0 : 50.0 - 60.0 * (t - 0.7));
    series.push_back({static_cast<int>(i), i / 30.0, 0, area + jitter(rng)});
  }
  for (auto _ : state) benchmark::DoNotOptimize(estimate_max_area(series));
}
BENCHMARK(BM_EstimateMaxArea)->Arg(300)->Arg(3000);

void BM_FitTwoRegimes(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(6);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<TensiometryPoint> pts;
  for (int i = 0; i < n; ++i) {
    const double c = 10.0 * std::pow(90.0, static_cast<double>(i) / (n - 1));
    const double x = std::log(c / 80.0);
    pts.push_back({c, (x < 0 ? 40.0 - 8.0 * x : 40.0 - 0.3 * x) + noise(rng)});
  }
  for (auto _ : state) benchmark::DoNotOptimize(fit_two_regimes(pts));
}
BENCHMARK(BM_FitTwoRegimes)->Arg(12)->Arg(200);

}  // namespace

BENCHMARK_MAIN();
