#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "dropspread/cmc.hpp"
#include "dropspread/errors.hpp"

using namespace dropspread;

namespace {

const std::vector<double> kConcentrations{10, 15, 22, 33, 50, 65, 100, 150, 250, 400, 600, 900};

// Steep decline below 80 ul/l, nearly flat above; both lines pass through (ln 80, 40).
double sft(double c) {
  const double x = std::log(c) - std::log(80.0);
  return x < 0 ? 40.0 - 8.0 * x : 40.0 - 0.3 * x;
}

std::vector<TensiometryPoint> two_line_fixture(double noise_sigma = 0.0, std::mt19937_64* rng = nullptr,
                                               double scale = 1.0) {
  std::normal_distribution<double> noise(0.0, noise_sigma);
  std::vector<TensiometryPoint> pts;
  for (double c : kConcentrations) {
    double y = sft(c);
    if (rng) y += noise(*rng);
    pts.push_back({c * scale, y});
  }
  return pts;
}

double single_line_rss(const std::vector<TensiometryPoint>& pts) {
  std::vector<double> x, y;
  for (const auto& p : pts) {
    x.push_back(std::log(p.concentration_ul_per_l));
    y.push_back(p.surface_tension_mN_per_m);
  }
  return fit_line(x, y).residual_ss;
}

double stddev(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / (v.size() - 1));
}

}  // namespace

TEST(FitLine, ExactLine) {
  const std::vector<double> x{0, 1, 2, 3, 4}, y{1, 3, 5, 7, 9};
  const auto f = fit_line(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-12);
  EXPECT_NEAR(f.intercept, 1.0, 1e-12);
  EXPECT_NEAR(f.var_slope, 0.0, 1e-20);
  EXPECT_NEAR(f.var_intercept, 0.0, 1e-20);
  EXPECT_NEAR(f.cov_slope_intercept, 0.0, 1e-20);
  EXPECT_NEAR(f.residual_ss, 0.0, 1e-20);
  EXPECT_EQ(f.points, 5u);
}

TEST(FitLine, TwoPointsInterpolate) {
  const std::vector<double> x{1, 3}, y{2, -2};
  const auto f = fit_line(x, y);
  EXPECT_NEAR(f.at(1), 2.0, 1e-12);
  EXPECT_NEAR(f.at(3), -2.0, 1e-12);
  EXPECT_EQ(f.var_slope, 0.0);
}

TEST(FitLine, CovarianceMatchesClosedForm) {
  // x = 0..4, y with known residuals: Sxx = 10, var_slope = s^2 / Sxx,
  // var_intercept = s^2 (1/n + xbar^2 / Sxx), cov = -xbar s^2 / Sxx.
  const std::vector<double> x{0, 1, 2, 3, 4}, y{1.1, 2.9, 5.2, 6.8, 9.0};
  const auto f = fit_line(x, y);
  double rss = 0;
  for (int i = 0; i < 5; ++i) rss += std::pow(y[i] - f.at(x[i]), 2);
  const double s2 = rss / 3.0;
  EXPECT_NEAR(f.residual_ss, rss, 1e-12);
  EXPECT_NEAR(f.var_slope, s2 / 10.0, 1e-12);
  EXPECT_NEAR(f.var_intercept, s2 * (0.2 + 4.0 / 10.0), 1e-12);
  EXPECT_NEAR(f.cov_slope_intercept, -2.0 * s2 / 10.0, 1e-12);
}

TEST(FitLine, Errors) {
  const std::vector<double> one{1.0}, two{1.0, 2.0}, same{3.0, 3.0, 3.0}, ys{1, 2, 3};
  EXPECT_THROW(fit_line(one, one), InvalidArgument);
  EXPECT_THROW(fit_line(two, ys), InvalidArgument);
  EXPECT_THROW(fit_line(same, ys), InvalidArgument);
}

TEST(FitTwoRegimes, NoiselessFixtureRecoversEighty) {
  const auto r = fit_two_regimes(two_line_fixture());
  EXPECT_NEAR(r.cmc_ul_per_l, 80.0, 80.0 * 1e-9);
  EXPECT_EQ(r.split_index, 6u);
  EXPECT_NEAR(r.line_pre.slope, -8.0, 1e-9);
  EXPECT_NEAR(r.line_post.slope, -0.3, 1e-9);
  EXPECT_NEAR(r.total_residual_ss, 0.0, 1e-12);
  EXPECT_GE(r.uncertainty_ul_per_l, 0.0);
  EXPECT_LT(r.uncertainty_ul_per_l, 1e-6);
}

TEST(FitTwoRegimes, NoisyFixtureStaysWithinFiveOfEighty) {
  std::mt19937_64 rng(2024);
  std::vector<double> cmcs;
  for (int draw = 0; draw < 100; ++draw) {
    const auto r = fit_two_regimes(two_line_fixture(0.1, &rng));
    cmcs.push_back(r.cmc_ul_per_l);
    EXPECT_NEAR(r.cmc_ul_per_l, 80.0, 5.0) << "draw " << draw;
  }
  const double mean = std::accumulate(cmcs.begin(), cmcs.end(), 0.0) / cmcs.size();
  EXPECT_NEAR(mean, 80.0, 5.0);
}

TEST(FitTwoRegimes, AnalyticUncertaintyAgreesWithResampling) {
  std::mt19937_64 rng(77);
  std::vector<double> cmcs, analytic;
  for (int draw = 0; draw < 200; ++draw) {
    const auto r = fit_two_regimes(two_line_fixture(0.1, &rng));
    cmcs.push_back(r.cmc_ul_per_l);
    analytic.push_back(r.uncertainty_ul_per_l);
  }
  std::sort(analytic.begin(), analytic.end());
  const double typical = analytic[analytic.size() / 2];
  const double spread = stddev(cmcs);
  EXPECT_GT(typical, 0.0);
  EXPECT_GT(typical / spread, 0.6) << "analytic " << typical << " vs sampled " << spread;
  EXPECT_LT(typical / spread, 1.6) << "analytic " << typical << " vs sampled " << spread;

  // Residual bootstrap on a single noisy draw.
  const auto base_pts = two_line_fixture(0.1, &rng);
  const auto base = fit_two_regimes(base_pts);
  std::vector<double> residuals;
  for (std::size_t i = 0; i < base_pts.size(); ++i) {
    const auto& line = i < base.split_index ? base.line_pre : base.line_post;
    residuals.push_back(base_pts[i].surface_tension_mN_per_m -
                        line.at(std::log(base_pts[i].concentration_ul_per_l)));
  }
  // Rescale for the 4 fitted parameters so the resampled noise is unbiased.
  const double inflate = std::sqrt(base_pts.size() / (base_pts.size() - 4.0));
  std::uniform_int_distribution<std::size_t> pick(0, residuals.size() - 1);
  std::vector<double> boot;
  for (int b = 0; b < 400; ++b) {
    auto pts = base_pts;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto& line = i < base.split_index ? base.line_pre : base.line_post;
      pts[i].surface_tension_mN_per_m =
          line.at(std::log(pts[i].concentration_ul_per_l)) + inflate * residuals[pick(rng)];
    }
    try {
      boot.push_back(fit_two_regimes(pts).cmc_ul_per_l);
    } catch (const NoIntersectionError&) {
    }
  }
  ASSERT_GT(boot.size(), 350u);
  const double boot_sd = stddev(boot);
  EXPECT_GT(base.uncertainty_ul_per_l / boot_sd, 0.5) << base.uncertainty_ul_per_l << " vs " << boot_sd;
  EXPECT_LT(base.uncertainty_ul_per_l / boot_sd, 2.0) << base.uncertainty_ul_per_l << " vs " << boot_sd;
}

TEST(FitTwoRegimes, ScaleEquivariance) {
  std::mt19937_64 rng(9);
  for (double k : {0.01, 0.5, 3.0, 1000.0}) {
    std::mt19937_64 a = rng, b = rng;
    const auto base = fit_two_regimes(two_line_fixture(0.05, &a));
    const auto scaled = fit_two_regimes(two_line_fixture(0.05, &b, k));
    EXPECT_NEAR(scaled.cmc_ul_per_l, k * base.cmc_ul_per_l, 1e-9 * k * base.cmc_ul_per_l) << "k " << k;
    EXPECT_NEAR(scaled.uncertainty_ul_per_l, k * base.uncertainty_ul_per_l,
                1e-6 * k * base.uncertainty_ul_per_l + 1e-12);
    EXPECT_EQ(scaled.split_index, base.split_index);
    rng.discard(100);
  }
}

TEST(FitTwoRegimes, TwoLinesNeverFitWorseThanOne) {
  std::mt19937_64 rng(31);
  for (int draw = 0; draw < 50; ++draw) {
    const auto pts = two_line_fixture(0.3, &rng);
    const auto r = fit_two_regimes(pts);
    EXPECT_LE(r.total_residual_ss, single_line_rss(pts) + 1e-12);
    EXPECT_NEAR(r.total_residual_ss, r.line_pre.residual_ss + r.line_post.residual_ss, 1e-9);
  }
}

TEST(FitTwoRegimes, IntersectionLiesBetweenInnermostPoints) {
  std::mt19937_64 rng(4);
  for (int draw = 0; draw < 50; ++draw) {
    const auto pts = two_line_fixture(0.1, &rng);
    const auto r = fit_two_regimes(pts);
    ASSERT_GE(r.split_index, 3u);
    ASSERT_LE(r.split_index, pts.size() - 3);
    EXPECT_GE(r.cmc_ul_per_l, pts[r.split_index - 1].concentration_ul_per_l);
    EXPECT_LE(r.cmc_ul_per_l, pts[r.split_index].concentration_ul_per_l);
  }
}

TEST(FitTwoRegimes, CollinearPointsHaveNoIntersection) {
  std::vector<TensiometryPoint> pts;
  for (double c : kConcentrations) pts.push_back({c, 70.0 - 3.0 * std::log(c)});
  EXPECT_THROW(fit_two_regimes(pts), NoIntersectionError);
}

TEST(FitTwoRegimes, InputErrors) {
  auto pts = two_line_fixture();
  EXPECT_THROW(fit_two_regimes(std::span(pts).first(4)), InvalidArgument);
  EXPECT_THROW(fit_two_regimes(std::span(pts).first(5)), InvalidArgument);
  EXPECT_NO_THROW(fit_two_regimes(std::span(pts).first(7)));
  auto unsorted = pts;
  std::swap(unsorted[2], unsorted[3]);
  EXPECT_THROW(fit_two_regimes(unsorted), InvalidArgument);
  auto non_positive = pts;
  non_positive[0].concentration_ul_per_l = 0.0;
  EXPECT_THROW(fit_two_regimes(non_positive), InvalidArgument);
}

TEST(FormatCmcReport, ListsEveryField) {
  const auto r = fit_two_regimes(two_line_fixture());
  std::istringstream in(format_cmc_report(r));
  std::map<std::string, double> fields;
  std::string line;
  while (std::getline(in, line)) {
    const auto colon = line.find(": ");
    ASSERT_NE(colon, std::string::npos) << line;
    fields[line.substr(0, colon)] = std::stod(line.substr(colon + 2));
  }
  EXPECT_EQ(fields.size(), 8u);
  EXPECT_DOUBLE_EQ(fields.at("cmc_ul_per_l"), r.cmc_ul_per_l);
  EXPECT_DOUBLE_EQ(fields.at("uncertainty_ul_per_l"), r.uncertainty_ul_per_l);
  EXPECT_EQ(fields.at("split_index"), 6.0);
  EXPECT_DOUBLE_EQ(fields.at("line_pre_slope"), r.line_pre.slope);
  EXPECT_DOUBLE_EQ(fields.at("line_pre_intercept"), r.line_pre.intercept);
  EXPECT_DOUBLE_EQ(fields.at("line_post_slope"), r.line_post.slope);
  EXPECT_DOUBLE_EQ(fields.at("line_post_intercept"), r.line_post.intercept);
  EXPECT_DOUBLE_EQ(fields.at("total_residual_ss"), r.total_residual_ss);
}
