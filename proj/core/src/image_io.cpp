#include "dropspread/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "dropspread/errors.hpp"

namespace dropspread {
namespace {

cv::Mat to_mat(const Tensor& t) {
  std::vector<cv::Mat> planes;
  for (int c = 0; c < t.channels(); ++c) {
    planes.emplace_back(t.height(), t.width(), CV_64F,
                        const_cast<double*>(t.plane(c).data()));
  }
  cv::Mat out;
  cv::merge(planes, out);
  return out;
}

Tensor from_mat(const cv::Mat& m) {
  Tensor t(m.channels(), m.rows, m.cols);
  std::vector<cv::Mat> planes;
  cv::split(m, planes);
  for (int c = 0; c < m.channels(); ++c) {
    cv::Mat dst(m.rows, m.cols, CV_64F, t.plane(c).data());
    planes[c].copyTo(dst);
  }
  return t;
}

}  // namespace

Tensor read_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot read image '" + path.string() + "'");
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  cv::Mat scaled;
  rgb.convertTo(scaled, CV_64FC3, 1.0 / 255.0);
  return from_mat(scaled);
}

BinaryMask read_mask(const std::filesystem::path& path, int threshold) {
  cv::Mat grey = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (grey.empty()) throw IoError("cannot read mask '" + path.string() + "'");
  BinaryMask mask(grey.rows, grey.cols);
  for (int y = 0; y < grey.rows; ++y) {
    const auto* row = grey.ptr<std::uint8_t>(y);
    for (int x = 0; x < grey.cols; ++x) mask.set(y, x, row[x] >= threshold);
  }
  return mask;
}

void write_image(const std::filesystem::path& path, const Tensor& image) {
  if (image.channels() != 3 && image.channels() != 1) {
    throw InvalidArgument("write_image needs 1 or 3 channels");
  }
  cv::Mat m = to_mat(image);
  cv::Mat bytes;
  m.convertTo(bytes, image.channels() == 3 ? CV_8UC3 : CV_8UC1, 255.0);
  if (image.channels() == 3) cv::cvtColor(bytes, bytes, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path.string(), bytes)) throw IoError("cannot write image '" + path.string() + "'");
}

void write_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  cv::Mat m(mask.height(), mask.width(), CV_8UC1);
  for (int y = 0; y < mask.height(); ++y) {
    auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < mask.width(); ++x) row[x] = mask.at(y, x) ? 255 : 0;
  }
  if (!cv::imwrite(path.string(), m)) throw IoError("cannot write mask '" + path.string() + "'");
}

Tensor resize_bilinear(const Tensor& image, int height, int width) {
  if (height < 1 || width < 1) throw InvalidArgument("resize target must be positive");
  if (image.height() == height && image.width() == width) return image;
  cv::Mat out;
  cv::resize(to_mat(image), out, cv::Size(width, height), 0, 0, cv::INTER_LINEAR);
  return from_mat(out);
}

BinaryMask resize_nearest(const BinaryMask& mask, int height, int width) {
  if (height < 1 || width < 1) throw InvalidArgument("resize target must be positive");
  if (mask.height() == height && mask.width() == width) return mask;
  cv::Mat src(mask.height(), mask.width(), CV_8UC1, const_cast<std::uint8_t*>(mask.labels().data()));
  cv::Mat out;
  cv::resize(src, out, cv::Size(width, height), 0, 0, cv::INTER_NEAREST);
  std::vector<std::uint8_t> labels(out.datastart, out.dataend);
  return BinaryMask(height, width, std::move(labels));
}

}  // namespace dropspread
