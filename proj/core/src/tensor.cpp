#include "dropspread/tensor.hpp"

#include <string>

#include "dropspread/errors.hpp"

namespace dropspread {

Tensor::Tensor(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
  if (channels < 0 || height < 0 || width < 0) {
    throw InvalidArgument("tensor dimensions must be non-negative");
  }
  data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

BinaryMask::BinaryMask(int height, int width, std::uint8_t fill)
    : height_(height), width_(width) {
  if (height < 0 || width < 0) throw InvalidArgument("mask dimensions must be non-negative");
  if (fill > 1) throw InvalidArgument("mask fill must be 0 or 1");
  labels_.assign(static_cast<std::size_t>(height) * width, fill);
}

BinaryMask::BinaryMask(int height, int width, std::vector<std::uint8_t> labels)
    : height_(height), width_(width), labels_(std::move(labels)) {
  if (height < 0 || width < 0) throw InvalidArgument("mask dimensions must be non-negative");
  if (labels_.size() != static_cast<std::size_t>(height) * width) {
    throw InvalidArgument("mask label count " + std::to_string(labels_.size()) +
                          " does not match " + std::to_string(height) + "x" +
                          std::to_string(width));
  }
  for (auto v : labels_) {
    if (v > 1) throw InvalidArgument("mask label " + std::to_string(v) + " is not binary");
  }
}

BinaryMask downsample_nearest(const BinaryMask& mask, int factor) {
  if (factor < 1) throw InvalidArgument("downsample factor must be >= 1");
  if (factor == 1) return mask;
  if (mask.height() % factor != 0 || mask.width() % factor != 0) {
    throw DimensionError("mask " + std::to_string(mask.height()) + "x" +
                             std::to_string(mask.width()) + " not divisible by " +
                             std::to_string(factor),
                         factor);
  }
  const int h = mask.height() / factor;
  const int w = mask.width() / factor;
  const int off = factor / 2;
  BinaryMask out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out.set(y, x, mask.at(y * factor + off, x * factor + off) != 0);
  }
  return out;
}

}  // namespace dropspread
