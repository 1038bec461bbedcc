#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "dropspread/area.hpp"
#include "dropspread/errors.hpp"
#include "dropspread/image_io.hpp"
#include "fixtures.hpp"

using namespace dropspread;
using dropspread::testkit::TempDir;
namespace fs = std::filesystem;

TEST(CountWetPixels, Examples) {
  EXPECT_EQ(count_wet_pixels(BinaryMask(1024, 1024)), 0);
  EXPECT_EQ(count_wet_pixels(BinaryMask(1024, 1024, 1)), 1'048'576);
  const std::vector<std::uint8_t> labels{1, 0, 1, 1};
  EXPECT_EQ(count_wet_pixels(labels), 3);
}

TEST(CountWetPixels, RasterisedDisksMatchPiRSquared) {
  for (double r : {50.0, 100.0, 150.0, 200.0}) {
    const BinaryMask m = testkit::disk_mask(512, 512, 256.0, 256.0, r);
    const double expected = M_PI * r * r;
    EXPECT_NEAR(count_wet_pixels(m), expected, 0.01 * expected) << "radius " << r;
  }
  EXPECT_NEAR(count_wet_pixels(testkit::disk_mask(1024, 1024, 512, 512, 100)), 31'416, 314);
}

TEST(CountWetPixels, ComplementAddsUpToTotal) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int h = 1 + static_cast<int>(rng() % 40);
    const int w = 1 + static_cast<int>(rng() % 40);
    std::vector<std::uint8_t> a(h * w), b(h * w);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = rng() & 1;
      b[i] = 1 - a[i];
    }
    EXPECT_EQ(count_wet_pixels(BinaryMask(h, w, a)) + count_wet_pixels(BinaryMask(h, w, b)), h * w);
  }
}

TEST(CountWetPixels, InvariantUnderAugmentation) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    BinaryMask m(7, 11);
    for (int y = 0; y < 7; ++y) {
      for (int x = 0; x < 11; ++x) m.set(y, x, rng() % 3 == 0);
    }
    const auto n = count_wet_pixels(m);
    for (Transform t : kAugmentations) EXPECT_EQ(count_wet_pixels(apply_transform(m, t)), n);
  }
}

TEST(CountWetPixels, RejectsNonBinaryLabels) {
  const std::vector<std::uint8_t> labels{0, 1, 255};
  EXPECT_THROW(count_wet_pixels(labels), InvalidArgument);
}

TEST(PixelsToArea, Examples) {
  EXPECT_DOUBLE_EQ(pixels_to_area(0, {10.0}), 0.0);
  EXPECT_NEAR(pixels_to_area(1'048'576, {10.0}), 104.8576, 1e-9);
  EXPECT_NEAR(pixels_to_area(1, {1000.0}), 1.0, 1e-15);
}

TEST(PixelsToArea, QuadraticInScaleAndMonotoneInCount) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> s(0.1, 50.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double mpp = s(rng);
    const std::int64_t n = static_cast<std::int64_t>(rng() % 1'000'000);
    EXPECT_NEAR(pixels_to_area(n, {2 * mpp}), 4 * pixels_to_area(n, {mpp}),
                1e-12 * pixels_to_area(n, {2 * mpp}) + 1e-300);
    EXPECT_LE(pixels_to_area(n, {mpp}), pixels_to_area(n + 1, {mpp}));
  }
}

TEST(PixelsToArea, RejectsBadScale) {
  EXPECT_THROW(pixels_to_area(10, {0.0}), InvalidArgument);
  EXPECT_THROW(pixels_to_area(10, {-1.0}), InvalidArgument);
  EXPECT_THROW(pixels_to_area(10, {std::nan("")}), InvalidArgument);
  EXPECT_THROW(pixels_to_area(10, {INFINITY}), InvalidArgument);
  EXPECT_THROW(pixels_to_area(-1, {1.0}), InvalidArgument);
}

TEST(OpticsScale, ForGridFoldsInTheResize) {
  const OpticsScale s{10.0};
  EXPECT_DOUBLE_EQ(s.for_grid({}).microns_per_pixel, 10.0);
  EXPECT_DOUBLE_EQ(s.for_grid({2.0, 2.0}).microns_per_pixel, 20.0);
  // 2048 x 1536 onto a 1024 grid: each grid pixel covers 2 x 1.5 source pixels.
  const double a = pixels_to_area(1024 * 1024, s.for_grid({2.0, 1.5}));
  EXPECT_NEAR(a, pixels_to_area(2048 * 1536, s), 1e-9);
}

TEST(SeriesFromMasks, GrowingDisksAreStrictlyIncreasing) {
  std::vector<FrameRecord> frames;
  std::vector<BinaryMask> masks;
  for (int k = 0; k < 12; ++k) {
    frames.push_back({k, k / 30.0, {}});
    masks.push_back(testkit::disk_mask(128, 128, 64, 64, 10.0 + 4.0 * k));
  }
  const auto s = series_from_masks(frames, masks, {5.0});
  ASSERT_EQ(s.size(), 12u);
  for (std::size_t i = 1; i < s.size(); ++i) {
    EXPECT_GT(s[i].area_mm2, s[i - 1].area_mm2);
    EXPECT_GT(s[i].timestamp_s, s[i - 1].timestamp_s);
  }
  for (const auto& a : s) EXPECT_DOUBLE_EQ(a.area_mm2, a.wet_pixels * 25e-6);
}

TEST(SeriesFromMasks, SortsByTimeAndChecksSizes) {
  const std::vector<FrameRecord> frames{{2, 2.0, {}}, {0, 0.0, {}}};
  const std::vector<BinaryMask> masks{BinaryMask(2, 2, 1), BinaryMask(2, 2)};
  const auto s = series_from_masks(frames, masks, {1000.0});
  EXPECT_EQ(s[0].frame_index, 0);
  EXPECT_EQ(s[1].wet_pixels, 4);
  EXPECT_THROW(series_from_masks(frames, std::span(masks).first(1), {1.0}), InvalidArgument);
}

namespace {

// All weights zero, so every side score is the seg head bias.
ModelParameters constant_model(double seg_bias) {
  ModelParameters p({2, 2, 3});
  for (int l = 0; l <= 2; ++l) p.array("head" + std::to_string(l) + ".bias")[0] = seg_bias;
  return p;
}

}  // namespace

TEST(MeasureSeries, ConstantFramesGiveConstantBackScaledSeries) {
  TempDir tmp;
  std::vector<FrameRecord> frames;
  for (int k = 0; k < 6; ++k) {
    const fs::path p = tmp / ("f" + std::to_string(k) + ".png");
    write_image(p, testkit::render_scene({0.5, 0.5, 0.3, false}, 48));
    frames.push_back({k, k * 0.5, p});
  }
  MeasureOptions o;
  o.grid_side = 16;
  o.overlay_dir = tmp / "overlays";
  const auto s = measure_series(frames, constant_model(10.0), {20.0}, o);
  ASSERT_EQ(s.size(), 6u);
  for (const auto& a : s) {
    EXPECT_EQ(a.wet_pixels, 16 * 16);
    // Every grid pixel covers 3 x 3 source pixels of 20 um.
    EXPECT_NEAR(a.area_mm2, 48 * 48 * 400e-6, 1e-12);
  }
  EXPECT_TRUE(fs::exists(tmp / "overlays" / "overlay_000005.png"));

  const auto dry = measure_series(frames, constant_model(-10.0), {20.0}, {16, {}});
  for (const auto& a : dry) EXPECT_EQ(a.wet_pixels, 0);
}

TEST(MeasureSeries, ErrorsCarryTheFrameIndex) {
  TempDir tmp;
  write_image(tmp / "ok.png", Tensor(3, 16, 16, 0.5));
  const std::vector<FrameRecord> frames{{0, 0.0, tmp / "ok.png"}, {7, 1.0, tmp / "gone.png"}};
  try {
    measure_series(frames, constant_model(1.0), {1.0}, {16, {}});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("frame 7"), std::string::npos) << e.what();
  }
  EXPECT_THROW(measure_series(frames, constant_model(1.0), {1.0}, {12, {}}), InvalidArgument);
}

namespace {

// Direct transcription of the window rule, O(n^3).
struct OracleWindow {
  bool found = false;
  std::size_t begin = 0, end = 0;
  double mean = 0.0;
};

OracleWindow oracle_window(const std::vector<double>& a, double fraction, double tol) {
  const std::size_t n = a.size();
  const double series_max = *std::max_element(a.begin(), a.end());
  const std::size_t min_len =
      std::max<std::size_t>(3, static_cast<std::size_t>(std::ceil(fraction * n - 1e-12)));
  OracleWindow best;
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t e = b + min_len; e <= n; ++e) {
      double lo = a[b], hi = a[b], sum = 0.0;
      for (std::size_t i = b; i < e; ++i) {
        lo = std::min(lo, a[i]);
        hi = std::max(hi, a[i]);
        sum += a[i];
      }
      const double mean = sum / (e - b);
      if (hi - lo > tol * mean || mean < (1 - tol) * series_max) continue;
      const std::size_t len = e - b;
      const std::size_t best_len = best.end - best.begin;
      if (!best.found || len > best_len || (len == best_len && mean > best.mean)) {
        best = {true, b, e, mean};
      }
    }
  }
  return best;
}

}  // namespace

TEST(EstimateMaxArea, ConstantSeries) {
  const auto s = testkit::series_of(std::vector<double>(20, 12.0));
  const auto e = estimate_max_area(s);
  EXPECT_DOUBLE_EQ(e.max_area_mm2, 12.0);
  EXPECT_DOUBLE_EQ(e.error_mm2, 0.0);
  EXPECT_FALSE(e.no_plateau);
  EXPECT_EQ(e.window_begin, 0u);
  EXPECT_EQ(e.window_end, 20u);
}

TEST(EstimateMaxArea, RisePlateauFallFixture) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto s = testkit::rise_plateau_fall_series(seed);
    const auto e = estimate_max_area(s);
    EXPECT_FALSE(e.no_plateau);
    EXPECT_GE(e.max_area_mm2, 49.0);
    EXPECT_LE(e.max_area_mm2, 51.0);
    EXPECT_GT(e.error_mm2, 0.5);
    EXPECT_LE(e.error_mm2, 1.2);
    // The plateau occupies samples [20, 50), i.e. t = 20 .. 49 s.
    EXPECT_LE(e.plateau_start_s, 21.0);
    EXPECT_GE(e.plateau_end_s, 48.0);
    EXPECT_GE(e.plateau_start_s, 18.0);
    EXPECT_LE(e.plateau_end_s, 52.0);
  }
}

TEST(EstimateMaxArea, MonotoneSeriesFallsBackToFinalWindow) {
  std::vector<double> a;
  for (int k = 0; k < 40; ++k) a.push_back(1.0 + k);
  const auto e = estimate_max_area(testkit::series_of(a));
  EXPECT_TRUE(e.no_plateau);
  EXPECT_EQ(e.window_begin, 36u);
  EXPECT_EQ(e.window_end, 40u);
  EXPECT_DOUBLE_EQ(e.max_area_mm2, (37.0 + 38.0 + 39.0 + 40.0) / 4.0);
  EXPECT_DOUBLE_EQ(e.error_mm2, 1.5);
  EXPECT_DOUBLE_EQ(e.plateau_start_s, 36.0);
  EXPECT_DOUBLE_EQ(e.plateau_end_s, 39.0);
}

TEST(EstimateMaxArea, MatchesBruteForceWindowSearch) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int with_plateau = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 5 + rng() % 60;
    std::vector<double> a(n);
    // Random walk: sometimes flat, sometimes not.
    double v = 10.0 + 10.0 * u(rng);
    const double step = trial % 2 ? 0.05 : 1.5;
    for (auto& x : a) {
      v = std::max(0.1, v + step * (u(rng) - 0.5) * v * 0.1);
      x = v;
    }
    const double fraction = 0.05 + 0.3 * u(rng);
    const double tol = 0.01 + 0.1 * u(rng);
    const auto e = estimate_max_area(testkit::series_of(a), {fraction, tol});
    const auto o = oracle_window(a, fraction, tol);
    ASSERT_EQ(!e.no_plateau, o.found) << "trial " << trial;
    if (!o.found) continue;
    ++with_plateau;
    EXPECT_EQ(e.window_end - e.window_begin, o.end - o.begin) << "trial " << trial;
    EXPECT_NEAR(e.max_area_mm2, o.mean, 1e-9 * o.mean) << "trial " << trial;
  }
  EXPECT_GT(with_plateau, 20);
}

TEST(EstimateMaxArea, BoundsAndSpanProperties) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 5 + rng() % 100;
    std::vector<double> a(n);
    for (auto& x : a) x = 100.0 * u(rng) * u(rng);
    if (trial % 3 == 0) std::sort(a.begin(), a.end());
    const PlateauOptions opt{0.02 + 0.3 * u(rng), 0.2 * u(rng)};
    const auto series = testkit::series_of(a);
    const auto e = estimate_max_area(series, opt);
    const double series_max = *std::max_element(a.begin(), a.end());
    EXPECT_GE(e.error_mm2, 0.0);
    EXPECT_LE(e.max_area_mm2, series_max * (1 + 1e-12));
    EXPECT_GE(e.plateau_start_s, series.front().timestamp_s);
    EXPECT_LE(e.plateau_end_s, series.back().timestamp_s);
    EXPECT_LE(e.plateau_start_s, e.plateau_end_s);
    EXPECT_LT(e.window_begin, e.window_end);
    EXPECT_LE(e.window_end, n);
    if (!e.no_plateau) {
      EXPECT_GE(e.max_area_mm2, series_max - 2 * opt.flatness_tol * series_max - 1e-9);
    }
  }
}

TEST(EstimateMaxArea, Errors) {
  EXPECT_THROW(estimate_max_area(testkit::series_of({1, 2, 3, 4})), InvalidArgument);
  const auto s = testkit::series_of({1, 2, 3, 4, 5});
  EXPECT_NO_THROW(estimate_max_area(s));
  EXPECT_THROW(estimate_max_area(s, {0.0, 0.05}), InvalidArgument);
  EXPECT_THROW(estimate_max_area(s, {1.5, 0.05}), InvalidArgument);
  EXPECT_THROW(estimate_max_area(s, {0.1, -0.1}), InvalidArgument);
  EXPECT_THROW(estimate_max_area(s, {0.1, 1.0}), InvalidArgument);
}

TEST(CmcFraction, SevenConcentrations) {
  const std::vector<std::pair<double, double>> table{{50, 0.625}, {100, 1.25}, {200, 2.5},  {300, 3.75},
                                                     {400, 5.0},  {500, 6.25}, {900, 11.25}};
  for (const auto& [c, f] : table) EXPECT_DOUBLE_EQ(cmc_fraction(c, 80.0), f) << c;
  EXPECT_DOUBLE_EQ(cmc_fraction(80.0, 80.0), 1.0);
}

TEST(CmcFraction, Errors) {
  EXPECT_THROW(cmc_fraction(50.0, 0.0), InvalidArgument);
  EXPECT_THROW(cmc_fraction(50.0, -80.0), InvalidArgument);
}

TEST(StudentInterval, Examples) {
  const auto a = student_interval(std::vector<double>{5.0, 5.0, 5.0});
  EXPECT_DOUBLE_EQ(a.mean, 5.0);
  EXPECT_DOUBLE_EQ(a.half_width, 0.0);
  const auto b = student_interval(std::vector<double>{1.0, 2.0, 3.0});
  EXPECT_DOUBLE_EQ(b.mean, 2.0);
  EXPECT_NEAR(b.half_width, 4.303 / std::sqrt(3.0), 1e-3);
  EXPECT_NEAR(b.half_width, 2.484, 1e-3);
}

TEST(StudentInterval, MatchesTabulatedQuantiles) {
  // Two-sided critical values t_{(1+c)/2, df} from standard tables.
  struct Row {
    double confidence;
    int df;
    double t;
  };
  for (const Row& r : {Row{0.95, 1, 12.706}, Row{0.95, 4, 2.776}, Row{0.95, 9, 2.262},
                       Row{0.95, 29, 2.045}, Row{0.99, 2, 9.925}, Row{0.90, 5, 2.015}}) {
    // 0, 1, ..., df rescaled to unit sample standard deviation.
    std::vector<double> x(r.df + 1);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
    double mean = 0, ss = 0;
    for (double v : x) mean += v;
    mean /= x.size();
    for (double v : x) ss += (v - mean) * (v - mean);
    const double s = std::sqrt(ss / r.df);
    for (double& v : x) v /= s;
    const auto out = student_interval(x, r.confidence);
    EXPECT_NEAR(out.half_width * std::sqrt(static_cast<double>(x.size())), r.t, 1e-3)
        << "df " << r.df << " confidence " << r.confidence;
  }
}

TEST(StudentInterval, Errors) {
  EXPECT_THROW(student_interval(std::vector<double>{1.0}), InvalidArgument);
  EXPECT_THROW(student_interval(std::vector<double>{}), InvalidArgument);
  EXPECT_THROW(student_interval(std::vector<double>{1.0, 2.0}, 1.0), InvalidArgument);
  EXPECT_THROW(student_interval(std::vector<double>{1.0, 2.0}, 0.0), InvalidArgument);
}
