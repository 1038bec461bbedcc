#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "dropspread/ingestion.hpp"
#include "dropspread/model.hpp"
#include "dropspread/tensor.hpp"
#include "dropspread/training.hpp"

namespace dropspread {

/// Object-plane side length of one pixel, in micrometres.
struct OpticsScale {
  double microns_per_pixel = 1.0;

  /// Throws InvalidArgument unless strictly positive and finite.
  void validate() const;
  /// Scale of a grid pixel that covers `grid` source pixels.
  OpticsScale for_grid(const GridScale& grid) const;
};

struct AreaSample {
  int frame_index = 0;
  double timestamp_s = 0.0;
  std::int64_t wet_pixels = 0;
  double area_mm2 = 0.0;

  friend bool operator==(const AreaSample&, const AreaSample&) = default;
};

/// Throws InvalidArgument on a label outside {0, 1}.
std::int64_t count_wet_pixels(std::span<const std::uint8_t> labels);
std::int64_t count_wet_pixels(const BinaryMask& mask);

/// count * (microns_per_pixel / 1000)^2, in mm^2.
double pixels_to_area(std::int64_t count, const OpticsScale& scale);

AreaSample make_area_sample(int frame_index, double timestamp_s, const BinaryMask& mask,
                            const OpticsScale& scale);

/// Area series of precomputed masks (one per timestamp), ordered by time.
std::vector<AreaSample> series_from_masks(std::span<const FrameRecord> frames,
                                          std::span<const BinaryMask> masks,
                                          const OpticsScale& scale);

struct MeasureOptions {
  /// Square side frames are resized to before inference (power of two).
  int grid_side = 1024;
  /// When set, a side-by-side frame | mask PNG is written per frame.
  std::optional<std::filesystem::path> overlay_dir;
};

/// Reads each frame, resizes it to the grid, segments it and converts the wet
/// count to mm^2 with the resize factor folded into the scale. Errors are
/// rethrown as Error with the frame index prepended.
std::vector<AreaSample> measure_series(std::span<const FrameRecord> frames,
                                       const ModelParameters& params, const OpticsScale& scale,
                                       const MeasureOptions& options);

struct PlateauOptions {
  double window_fraction = 0.10;
  double flatness_tol = 0.05;
};

struct MaxAreaEstimate {
  double concentration_ul_per_l = 0.0;
  double cmc_fraction = 0.0;
  double max_area_mm2 = 0.0;
  double error_mm2 = 0.0;  // half the min-to-max range inside the window
  double plateau_start_s = 0.0;
  double plateau_end_s = 0.0;
  std::size_t window_begin = 0;  // sample indices, half-open
  std::size_t window_end = 0;
  bool no_plateau = false;
};

/// Longest contiguous window (at least max(3, ceil(window_fraction * n))
/// samples) with (max - min) <= flatness_tol * mean and mean >= (1 - flatness_tol)
/// * series max; ties go to the higher mean. Without such a window the last
/// ceil(window_fraction * n) samples are used and `no_plateau` is set.
/// Throws InvalidArgument for fewer than 5 samples or out-of-range options.
MaxAreaEstimate estimate_max_area(std::span<const AreaSample> series, const PlateauOptions& options = {});

/// concentration / cmc. Throws InvalidArgument when cmc <= 0.
double cmc_fraction(double concentration_ul_per_l, double cmc_ul_per_l);

struct StudentInterval {
  double mean = 0.0;
  double half_width = 0.0;
};

/// mean +- t_{(1+confidence)/2, n-1} * s / sqrt(n). Throws InvalidArgument for n < 2.
StudentInterval student_interval(std::span<const double> measurements, double confidence = 0.95);

}  // namespace dropspread
