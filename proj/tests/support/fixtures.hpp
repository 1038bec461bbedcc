#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dropspread/area.hpp"
#include "dropspread/tensor.hpp"
#include "dropspread/training.hpp"

namespace dropspread::testkit {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Pixel (y, x) is set iff its centre lies strictly inside the circle.
BinaryMask disk_mask(int height, int width, double cy, double cx, double radius);

/// Synthetic leaf frame: textured green-grey background, a darker wet disk and,
/// optionally, a bright specular spot inside the disk. Geometry is given as a
/// fraction of the side so the same scene can be rendered at any resolution.
struct Scene {
  double cy = 0.5;
  double cx = 0.5;
  double radius = 0.25;
  bool specular_spot = true;

  double spot_cy() const { return cy - 0.3 * radius; }
  double spot_cx() const { return cx; }
  double spot_radius() const { return 0.15 * radius; }
};

Tensor render_scene(const Scene& scene, int side);
BinaryMask scene_mask(const Scene& scene, int side);
BinaryMask scene_spot_mask(const Scene& scene, int side);
AnnotatedSample scene_sample(const Scene& scene, int side, const std::string& id);

/// The two annotated frames the overfit checks train on.
std::vector<AnnotatedSample> overfit_fixtures(int side);

/// Writes `samples` as `<id>.png` + `<id>_mask.png` into `dir`.
void write_annotated(const std::filesystem::path& dir, const std::vector<AnnotatedSample>& samples);

/// Lossless (FFV1) video of a disk growing linearly from r0 to r1 (fractions of side).
void write_growing_disk_video(const std::filesystem::path& path, int frames, double fps, int side,
                              double r0, double r1);

/// Area series with the given values at 1 s spacing.
std::vector<AreaSample> series_of(const std::vector<double>& areas);

/// Rise 0 -> 50 over 20 samples, 30 plateau samples at 50 +- 1, fall to 20 over 20 samples.
std::vector<AreaSample> rise_plateau_fall_series(std::uint64_t seed = 1);

}  // namespace dropspread::testkit
