#include "dropspread/plot.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "dropspread/errors.hpp"

namespace dropspread {
namespace {

constexpr int kWidth = 800;
constexpr int kHeight = 560;
constexpr int kLeft = 80;
constexpr int kRight = 30;
constexpr int kTop = 30;
constexpr int kBottom = 60;

struct Axes {
  double x0, x1, y0, y1;

  cv::Point to_px(double x, double y) const {
    const double fx = (x - x0) / (x1 - x0);
    const double fy = (y - y0) / (y1 - y0);
    return {kLeft + static_cast<int>(std::lround(fx * (kWidth - kLeft - kRight))),
            kHeight - kBottom - static_cast<int>(std::lround(fy * (kHeight - kTop - kBottom)))};
  }
};

Axes padded(double x0, double x1, double y0, double y1) {
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) y1 = y0 + 1.0;
  const double px = 0.05 * (x1 - x0);
  const double py = 0.05 * (y1 - y0);
  return {x0 - px, x1 + px, std::min(0.0, y0 - py), y1 + py};
}

void draw_frame(cv::Mat& img, const Axes& ax, const std::string& xlabel, const std::string& ylabel) {
  const cv::Scalar black(0, 0, 0);
  cv::rectangle(img, cv::Point(kLeft, kTop), cv::Point(kWidth - kRight, kHeight - kBottom), black, 1);
  for (int i = 0; i <= 5; ++i) {
    const double x = ax.x0 + (ax.x1 - ax.x0) * i / 5.0;
    const double y = ax.y0 + (ax.y1 - ax.y0) * i / 5.0;
    const cv::Point px = ax.to_px(x, ax.y0);
    const cv::Point py = ax.to_px(ax.x0, y);
    cv::line(img, px, px + cv::Point(0, 5), black, 1);
    cv::putText(img, fmt::format("{:.3g}", x), px + cv::Point(-15, 22), cv::FONT_HERSHEY_SIMPLEX, 0.4, black);
    cv::line(img, py, py - cv::Point(5, 0), black, 1);
    cv::putText(img, fmt::format("{:.3g}", y), py + cv::Point(-70, 4), cv::FONT_HERSHEY_SIMPLEX, 0.4, black);
  }
  cv::putText(img, xlabel, cv::Point(kWidth / 2 - 80, kHeight - 15), cv::FONT_HERSHEY_SIMPLEX, 0.5, black);
  cv::putText(img, ylabel, cv::Point(5, kTop - 10), cv::FONT_HERSHEY_SIMPLEX, 0.5, black);
}

void save(const std::filesystem::path& path, const cv::Mat& img) {
  if (!cv::imwrite(path.string(), img)) throw IoError("cannot write plot '" + path.string() + "'");
}

cv::Scalar palette(std::size_t i) {
  static const cv::Scalar colours[] = {{180, 119, 31}, {14, 127, 255}, {44, 160, 44}, {40, 39, 214},
                                       {189, 103, 148}, {75, 86, 140}, {194, 119, 227}, {127, 127, 127}};
  return colours[i % std::size(colours)];
}

}  // namespace

void plot_max_area_scatter(const std::filesystem::path& path, const std::vector<MaxAreaEstimate>& rows) {
  cv::Mat img(kHeight, kWidth, CV_8UC3, cv::Scalar(255, 255, 255));
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  if (!rows.empty()) {
    x0 = x1 = rows.front().cmc_fraction;
    y0 = y1 = rows.front().max_area_mm2;
    for (const auto& r : rows) {
      x0 = std::min(x0, r.cmc_fraction);
      x1 = std::max(x1, r.cmc_fraction);
      y0 = std::min(y0, r.max_area_mm2 - r.error_mm2);
      y1 = std::max(y1, r.max_area_mm2 + r.error_mm2);
    }
  }
  const Axes ax = padded(x0, x1, y0, y1);
  draw_frame(img, ax, "concentration / CMC", "max area [mm^2]");
  for (const auto& r : rows) {
    const cv::Scalar c = r.no_plateau ? cv::Scalar(40, 39, 214) : cv::Scalar(180, 119, 31);
    const cv::Point lo = ax.to_px(r.cmc_fraction, r.max_area_mm2 - r.error_mm2);
    const cv::Point hi = ax.to_px(r.cmc_fraction, r.max_area_mm2 + r.error_mm2);
    cv::line(img, lo, hi, c, 1);
    cv::line(img, lo - cv::Point(4, 0), lo + cv::Point(4, 0), c, 1);
    cv::line(img, hi - cv::Point(4, 0), hi + cv::Point(4, 0), c, 1);
    cv::circle(img, ax.to_px(r.cmc_fraction, r.max_area_mm2), 4, c, cv::FILLED);
  }
  save(path, img);
}

void plot_area_curves(const std::filesystem::path& path, const std::vector<LabelledSeries>& series) {
  cv::Mat img(kHeight, kWidth, CV_8UC3, cv::Scalar(255, 255, 255));
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  bool first = true;
  for (const auto& s : series) {
    for (const auto& p : s.samples) {
      if (first) {
        x0 = x1 = p.timestamp_s;
        y0 = y1 = p.area_mm2;
        first = false;
      }
      x0 = std::min(x0, p.timestamp_s);
      x1 = std::max(x1, p.timestamp_s);
      y0 = std::min(y0, p.area_mm2);
      y1 = std::max(y1, p.area_mm2);
    }
  }
  const Axes ax = padded(x0, x1, y0, y1);
  draw_frame(img, ax, "time [s]", "wet area [mm^2]");
  for (std::size_t i = 0; i < series.size(); ++i) {
    const cv::Scalar c = palette(i);
    const auto& pts = series[i].samples;
    for (std::size_t k = 1; k < pts.size(); ++k) {
      cv::line(img, ax.to_px(pts[k - 1].timestamp_s, pts[k - 1].area_mm2),
               ax.to_px(pts[k].timestamp_s, pts[k].area_mm2), c, 1, cv::LINE_AA);
    }
    const cv::Point legend(kWidth - kRight - 150, kTop + 18 + 18 * static_cast<int>(i));
    cv::line(img, legend, legend + cv::Point(20, 0), c, 2);
    cv::putText(img, series[i].label, legend + cv::Point(26, 4), cv::FONT_HERSHEY_SIMPLEX, 0.4,
                cv::Scalar(0, 0, 0));
  }
  save(path, img);
}

}  // namespace dropspread
