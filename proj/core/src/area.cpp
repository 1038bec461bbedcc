#include "dropspread/area.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "dropspread/errors.hpp"
#include "dropspread/image_io.hpp"

namespace dropspread {

void OpticsScale::validate() const {
  if (!(microns_per_pixel > 0.0) || !std::isfinite(microns_per_pixel)) {
    throw InvalidArgument("microns_per_pixel must be positive, got " + std::to_string(microns_per_pixel));
  }
}

OpticsScale OpticsScale::for_grid(const GridScale& grid) const {
  return {microns_per_pixel * std::sqrt(grid.pixel_area())};
}

std::int64_t count_wet_pixels(std::span<const std::uint8_t> labels) {
  std::int64_t n = 0;
  for (auto v : labels) {
    if (v > 1) throw InvalidArgument("mask value " + std::to_string(v) + " is not binary");
    n += v;
  }
  return n;
}

std::int64_t count_wet_pixels(const BinaryMask& mask) { return count_wet_pixels(mask.labels()); }

double pixels_to_area(std::int64_t count, const OpticsScale& scale) {
  if (count < 0) throw InvalidArgument("pixel count must be non-negative");
  scale.validate();
  const double side_mm = scale.microns_per_pixel / 1000.0;
  return static_cast<double>(count) * side_mm * side_mm;
}

AreaSample make_area_sample(int frame_index, double timestamp_s, const BinaryMask& mask,
                            const OpticsScale& scale) {
  const auto wet = count_wet_pixels(mask);
  return {frame_index, timestamp_s, wet, pixels_to_area(wet, scale)};
}

namespace {

void sort_by_time(std::vector<AreaSample>& series) {
  std::stable_sort(series.begin(), series.end(),
                   [](const AreaSample& a, const AreaSample& b) { return a.timestamp_s < b.timestamp_s; });
}

Tensor side_by_side(const Tensor& frame, const BinaryMask& mask) {
  Tensor out(3, frame.height(), frame.width() * 2);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < frame.height(); ++y) {
      for (int x = 0; x < frame.width(); ++x) {
        out.at(c, y, x) = frame.at(c, y, x);
        out.at(c, y, x + frame.width()) = mask.at(y, x) ? 1.0 : 0.0;
      }
    }
  }
  return out;
}

}  // namespace

std::vector<AreaSample> series_from_masks(std::span<const FrameRecord> frames,
                                          std::span<const BinaryMask> masks,
                                          const OpticsScale& scale) {
  if (frames.size() != masks.size()) throw InvalidArgument("one mask per frame is required");
  std::vector<AreaSample> series;
  series.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    series.push_back(make_area_sample(frames[i].index, frames[i].timestamp_s, masks[i], scale));
  }
  sort_by_time(series);
  return series;
}

std::vector<AreaSample> measure_series(std::span<const FrameRecord> frames,
                                       const ModelParameters& params, const OpticsScale& scale,
                                       const MeasureOptions& options) {
  scale.validate();
  check_grid_side(options.grid_side);
  if (options.overlay_dir) std::filesystem::create_directories(*options.overlay_dir);
  const int side = options.grid_side;
  std::vector<AreaSample> series;
  series.reserve(frames.size());
  for (const auto& frame : frames) {
    try {
      const Tensor image = read_image(frame.image_path);
      const GridScale grid{static_cast<double>(image.width()) / side,
                           static_cast<double>(image.height()) / side};
      const Tensor resized = resize_bilinear(image, side, side);
      const BinaryMask mask = predict_mask(params, resized);
      series.push_back(make_area_sample(frame.index, frame.timestamp_s, mask, scale.for_grid(grid)));
      if (options.overlay_dir) {
        write_image(*options.overlay_dir / fmt::format("overlay_{:06d}.png", frame.index),
                    side_by_side(resized, mask));
      }
    } catch (const Error& e) {
      throw Error("frame " + std::to_string(frame.index) + " (" + frame.image_path.string() +
                  "): " + e.what());
    }
  }
  sort_by_time(series);
  return series;
}

MaxAreaEstimate estimate_max_area(std::span<const AreaSample> series, const PlateauOptions& options) {
  const std::size_t n = series.size();
  if (n < 5) throw InvalidArgument("plateau estimation needs at least 5 samples, got " + std::to_string(n));
  if (!(options.window_fraction > 0.0 && options.window_fraction <= 1.0)) {
    throw InvalidArgument("window_fraction must lie in (0, 1]");
  }
  if (!(options.flatness_tol >= 0.0 && options.flatness_tol < 1.0)) {
    throw InvalidArgument("flatness_tol must lie in [0, 1)");
  }
  const double tol = options.flatness_tol;
  const auto fraction_len = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(options.window_fraction * static_cast<double>(n))));
  const std::size_t min_len = std::min(n, std::max<std::size_t>(3, fraction_len));

  double series_max = series[0].area_mm2;
  for (const auto& s : series) series_max = std::max(series_max, s.area_mm2);

  std::size_t best_begin = 0;
  std::size_t best_len = 0;
  double best_mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double lo = series[i].area_mm2;
    double hi = lo;
    double sum = 0.0;
    for (std::size_t j = i; j < n; ++j) {
      const double a = series[j].area_mm2;
      lo = std::min(lo, a);
      hi = std::max(hi, a);
      sum += a;
      // The window mean never exceeds the series max, so a wider range can never qualify again.
      if (hi - lo > tol * series_max) break;
      const std::size_t len = j - i + 1;
      if (len < min_len) continue;
      const double mean = sum / static_cast<double>(len);
      const bool flat = hi - lo <= tol * mean;
      const bool near_max = mean >= (1.0 - tol) * series_max;
      if (!flat || !near_max) continue;
      if (len > best_len || (len == best_len && mean > best_mean)) {
        best_begin = i;
        best_len = len;
        best_mean = mean;
      }
    }
  }

  MaxAreaEstimate est;
  if (best_len == 0) {
    est.no_plateau = true;
    best_len = std::min(n, fraction_len);
    best_begin = n - best_len;
  }
  double lo = series[best_begin].area_mm2;
  double hi = lo;
  double sum = 0.0;
  for (std::size_t k = best_begin; k < best_begin + best_len; ++k) {
    lo = std::min(lo, series[k].area_mm2);
    hi = std::max(hi, series[k].area_mm2);
    sum += series[k].area_mm2;
  }
  est.max_area_mm2 = sum / static_cast<double>(best_len);
  est.error_mm2 = 0.5 * (hi - lo);
  est.window_begin = best_begin;
  est.window_end = best_begin + best_len;
  est.plateau_start_s = series[best_begin].timestamp_s;
  est.plateau_end_s = series[best_begin + best_len - 1].timestamp_s;
  return est;
}

double cmc_fraction(double concentration_ul_per_l, double cmc_ul_per_l) {
  if (!(cmc_ul_per_l > 0.0)) throw InvalidArgument("CMC must be positive");
  return concentration_ul_per_l / cmc_ul_per_l;
}

StudentInterval student_interval(std::span<const double> measurements, double confidence) {
  const std::size_t n = measurements.size();
  if (n < 2) throw InvalidArgument("a Student interval needs at least 2 measurements");
  if (!(confidence > 0.0 && confidence < 1.0)) throw InvalidArgument("confidence must lie in (0, 1)");
  const double mean = std::accumulate(measurements.begin(), measurements.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : measurements) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  const boost::math::students_t dist(static_cast<double>(n - 1));
  const double t = boost::math::quantile(dist, 0.5 * (1.0 + confidence));
  return {mean, t * sd / std::sqrt(static_cast<double>(n))};
}

}  // namespace dropspread
