#include "dropspread/cmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <fmt/format.h>

#include "dropspread/errors.hpp"

namespace dropspread {

LineFit fit_line(std::span<const double> xs, std::span<const double> ys) {
  const std::size_t n = xs.size();
  if (n != ys.size()) throw InvalidArgument("fit_line: xs and ys differ in length");
  if (n < 2) throw InvalidArgument("fit_line needs at least 2 points");
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  const double spread = std::max(std::abs(xs[0]), 1.0);
  if (!(sxx > 1e-24 * spread * spread * static_cast<double>(n))) {
    throw InvalidArgument("fit_line: all x values are equal");
  }
  LineFit fit;
  fit.points = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ys[i] - fit.at(xs[i]);
    fit.residual_ss += r * r;
  }
  if (n > 2) {
    const double sigma2 = fit.residual_ss / static_cast<double>(n - 2);
    fit.var_slope = sigma2 / sxx;
    fit.var_intercept = sigma2 * (1.0 / static_cast<double>(n) + mx * mx / sxx);
    fit.cov_slope_intercept = -mx * sigma2 / sxx;
  }
  return fit;
}

CmcResult fit_two_regimes(std::span<const TensiometryPoint> points, const CmcOptions& options) {
  const std::size_t n = points.size();
  const std::size_t k_min = std::max<std::size_t>(options.min_points_per_side, 2);
  if (n < 2 * k_min) {
    throw InvalidArgument("CMC fit needs at least " + std::to_string(2 * k_min) + " points, got " +
                          std::to_string(n));
  }
  std::vector<double> xs(n);
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(points[i].concentration_ul_per_l > 0.0)) {
      throw InvalidArgument("concentrations must be positive");
    }
    if (i > 0 && !(points[i].concentration_ul_per_l > points[i - 1].concentration_ul_per_l)) {
      throw InvalidArgument("points must be sorted by strictly increasing concentration");
    }
    xs[i] = std::log(points[i].concentration_ul_per_l);
    ys[i] = points[i].surface_tension_mN_per_m;
  }

  CmcResult best;
  best.total_residual_ss = std::numeric_limits<double>::infinity();
  const std::span<const double> x(xs);
  const std::span<const double> y(ys);
  for (std::size_t k = k_min; k + k_min <= n; ++k) {
    const LineFit pre = fit_line(x.first(k), y.first(k));
    const LineFit post = fit_line(x.subspan(k), y.subspan(k));
    const double total = pre.residual_ss + post.residual_ss;
    if (total < best.total_residual_ss) {
      best.total_residual_ss = total;
      best.line_pre = pre;
      best.line_post = post;
      best.split_index = k;
    }
  }

  const LineFit& a = best.line_pre;
  const LineFit& b = best.line_post;
  const double dm = a.slope - b.slope;
  const double scale = std::max({1.0, std::abs(a.slope), std::abs(b.slope)});
  if (std::abs(dm) <= options.parallel_tolerance * scale) {
    throw NoIntersectionError("the two fitted lines are parallel (slopes " +
                              fmt::format("{:.6g} and {:.6g}", a.slope, b.slope) + ")");
  }
  const double x_star = (b.intercept - a.intercept) / dm;
  if (!(x_star >= xs.front() && x_star <= xs.back())) {
    throw NoIntersectionError(fmt::format("the fitted lines cross at {:.6g} ul/l, outside the data range",
                                          std::exp(x_star)));
  }

  // x* = (b2 - b1) / (m1 - m2); fits of the two regimes are independent.
  const double d_b1 = -1.0 / dm;
  const double d_b2 = 1.0 / dm;
  const double d_m1 = -x_star / dm;
  const double d_m2 = x_star / dm;
  const double var_x = d_m1 * d_m1 * a.var_slope + d_b1 * d_b1 * a.var_intercept +
                       2.0 * d_m1 * d_b1 * a.cov_slope_intercept + d_m2 * d_m2 * b.var_slope +
                       d_b2 * d_b2 * b.var_intercept + 2.0 * d_m2 * d_b2 * b.cov_slope_intercept;

  best.cmc_ul_per_l = std::exp(x_star);
  best.uncertainty_ul_per_l = best.cmc_ul_per_l * std::sqrt(std::max(var_x, 0.0));
  return best;
}

std::string format_cmc_report(const CmcResult& r) {
  return fmt::format(
      "cmc_ul_per_l: {}\n"
      "uncertainty_ul_per_l: {}\n"
      "split_index: {}\n"
      "line_pre_slope: {}\n"
      "line_pre_intercept: {}\n"
      "line_post_slope: {}\n"
      "line_post_intercept: {}\n"
      "total_residual_ss: {}\n",
      r.cmc_ul_per_l, r.uncertainty_ul_per_l, r.split_index, r.line_pre.slope, r.line_pre.intercept,
      r.line_post.slope, r.line_post.intercept, r.total_residual_ss);
}

}  // namespace dropspread
