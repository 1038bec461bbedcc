#include "fixtures.hpp"

#include <cmath>
#include <cstdlib>
#include <random>
#include <stdexcept>

#include <opencv2/core.hpp>
#include <opencv2/videoio.hpp>

#include "dropspread/image_io.hpp"

namespace dropspread::testkit {

namespace fs = std::filesystem;

TempDir::TempDir() {
  std::string templ = (fs::temp_directory_path() / "dropspread-test-XXXXXX").string();
  if (!mkdtemp(templ.data())) throw std::runtime_error("mkdtemp failed");
  path_ = templ;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

BinaryMask disk_mask(int height, int width, double cy, double cx, double radius) {
  BinaryMask m(height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dy = y + 0.5 - cy;
      const double dx = x + 0.5 - cx;
      m.set(y, x, dy * dy + dx * dx < radius * radius);
    }
  }
  return m;
}

BinaryMask scene_mask(const Scene& s, int side) {
  return disk_mask(side, side, s.cy * side, s.cx * side, s.radius * side);
}

BinaryMask scene_spot_mask(const Scene& s, int side) {
  if (!s.specular_spot) return BinaryMask(side, side);
  return disk_mask(side, side, s.spot_cy() * side, s.spot_cx() * side, s.spot_radius() * side);
}

Tensor render_scene(const Scene& s, int side) {
  const BinaryMask wet = scene_mask(s, side);
  const BinaryMask spot = scene_spot_mask(s, side);
  Tensor img(3, side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double u = (x + 0.5) / side;
      const double v = (y + 0.5) / side;
      const double vein = 0.05 * std::sin(2.0 * M_PI * (5.0 * u + 2.0 * v));
      for (int c = 0; c < 3; ++c) {
        double value = 0.35 + 0.15 * c + vein;
        if (wet.at(y, x)) value = 0.2 + 0.05 * c;
        if (spot.at(y, x)) value = 0.95;
        img.at(c, y, x) = value;
      }
    }
  }
  return img;
}

AnnotatedSample scene_sample(const Scene& scene, int side, const std::string& id) {
  return {render_scene(scene, side), scene_mask(scene, side), id, {}};
}

std::vector<AnnotatedSample> overfit_fixtures(int side) {
  return {scene_sample({0.50, 0.45, 0.25, true}, side, "fixture_a"),
          scene_sample({0.45, 0.55, 0.33, true}, side, "fixture_b")};
}

void write_annotated(const fs::path& dir, const std::vector<AnnotatedSample>& samples) {
  fs::create_directories(dir);
  for (const auto& s : samples) {
    write_image(dir / (s.source_id + ".png"), s.image);
    write_mask(dir / (s.source_id + "_mask.png"), s.mask);
  }
}

void write_growing_disk_video(const fs::path& path, int frames, double fps, int side, double r0,
                              double r1) {
  cv::VideoWriter writer(path.string(), cv::VideoWriter::fourcc('F', 'F', 'V', '1'), fps,
                         cv::Size(side, side));
  if (!writer.isOpened()) throw std::runtime_error("cannot open video writer for " + path.string());
  for (int k = 0; k < frames; ++k) {
    const double r = frames > 1 ? r0 + (r1 - r0) * k / (frames - 1) : r0;
    const Tensor img = render_scene({0.5, 0.5, r, true}, side);
    cv::Mat bgr(side, side, CV_8UC3);
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        auto& px = bgr.at<cv::Vec3b>(y, x);
        for (int c = 0; c < 3; ++c) {
          px[2 - c] = static_cast<unsigned char>(std::lround(img.at(c, y, x) * 255.0));
        }
      }
    }
    writer.write(bgr);
  }
}

std::vector<AreaSample> series_of(const std::vector<double>& areas) {
  std::vector<AreaSample> out;
  for (std::size_t i = 0; i < areas.size(); ++i) {
    out.push_back({static_cast<int>(i), static_cast<double>(i), 0, areas[i]});
  }
  return out;
}

std::vector<AreaSample> rise_plateau_fall_series(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  std::vector<double> a;
  for (int k = 0; k < 20; ++k) a.push_back(50.0 * k / 20.0);
  a.push_back(51.0);
  a.push_back(49.0);
  for (int k = 2; k < 30; ++k) a.push_back(50.0 + jitter(rng));
  for (int k = 0; k < 20; ++k) a.push_back(47.0 - 27.0 * k / 19.0);
  return series_of(a);
}

}  // namespace dropspread::testkit
