#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace dropspread {

struct TensiometryPoint {
  double concentration_ul_per_l = 0.0;
  double surface_tension_mN_per_m = 0.0;
};

/// Ordinary least squares y = slope * x + intercept.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double var_slope = 0.0;
  double var_intercept = 0.0;
  double cov_slope_intercept = 0.0;
  double residual_ss = 0.0;
  std::size_t points = 0;

  double at(double x) const { return slope * x + intercept; }
};

/// Covariance is sigma^2 (X^T X)^-1 with sigma^2 = RSS / (n - 2); zero for n == 2.
/// Throws InvalidArgument for n < 2, mismatched lengths, or all-equal xs.
LineFit fit_line(std::span<const double> xs, std::span<const double> ys);

struct CmcResult {
  double cmc_ul_per_l = 0.0;
  double uncertainty_ul_per_l = 0.0;
  LineFit line_pre;   // in (ln c, surface tension)
  LineFit line_post;
  /// Number of points in the pre-CMC regime; post regime starts at this index.
  std::size_t split_index = 0;
  double total_residual_ss = 0.0;
};

struct CmcOptions {
  std::size_t min_points_per_side = 3;
  /// Lines count as parallel when |slope_pre - slope_post| <= tol * max(1, |slope_pre|, |slope_post|).
  double parallel_tolerance = 1e-8;
};

/// Two-line fit in the (ln c, surface tension) plane. The split index is
/// chosen by exhaustive search minimising the summed residual of both lines;
/// the CMC is exp of the intersection abscissa and its uncertainty comes from
/// first-order propagation of both lines' parameter covariances.
///
/// Throws InvalidArgument for too few points, unsorted or non-positive
/// concentrations; NoIntersectionError when the best lines are parallel or
/// cross outside the measured concentration range.
CmcResult fit_two_regimes(std::span<const TensiometryPoint> points, const CmcOptions& options = {});

/// Multi-line `key: value` report.
std::string format_cmc_report(const CmcResult& result);

}  // namespace dropspread
