#include "layers.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dropspread/errors.hpp"

namespace dropspread::layers {
namespace {

// dst[y][x] += weight * src[y + dy][x + dx] over the valid overlap.
void accumulate_shifted(double* dst, const double* src, int h, int w, int dy, int dx,
                        double weight) {
  const int y0 = std::max(0, -dy);
  const int y1 = std::min(h, h - dy);
  const int x0 = std::max(0, -dx);
  const int x1 = std::min(w, w - dx);
  for (int y = y0; y < y1; ++y) {
    double* d = dst + static_cast<std::ptrdiff_t>(y) * w;
    const double* s = src + static_cast<std::ptrdiff_t>(y + dy) * w + dx;
    for (int x = x0; x < x1; ++x) d[x] += weight * s[x];
  }
}

// sum_{y,x} a[y][x] * b[y + dy][x + dx] over the valid overlap.
double shifted_dot(const double* a, const double* b, int h, int w, int dy, int dx) {
  const int y0 = std::max(0, -dy);
  const int y1 = std::min(h, h - dy);
  const int x0 = std::max(0, -dx);
  const int x1 = std::min(w, w - dx);
  double acc = 0.0;
  for (int y = y0; y < y1; ++y) {
    const double* pa = a + static_cast<std::ptrdiff_t>(y) * w;
    const double* pb = b + static_cast<std::ptrdiff_t>(y + dy) * w + dx;
    for (int x = x0; x < x1; ++x) acc += pa[x] * pb[x];
  }
  return acc;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct AxisTap {
  int lo;
  int hi;
  double t;  // weight of hi
};

std::vector<AxisTap> bilinear_taps(int in_size, int factor) {
  std::vector<AxisTap> taps(static_cast<std::size_t>(in_size) * factor);
  for (int o = 0; o < in_size * factor; ++o) {
    const double src = (o + 0.5) / factor - 0.5;
    int lo = static_cast<int>(std::floor(src));
    double t = src - lo;
    int hi = lo + 1;
    if (lo < 0) {
      lo = hi = 0;
      t = 0.0;
    } else if (hi > in_size - 1) {
      hi = lo = in_size - 1;
      t = 0.0;
    }
    taps[o] = {lo, hi, t};
  }
  return taps;
}

}  // namespace

Tensor conv2d(const Tensor& input, std::span<const double> weight, std::span<const double> bias,
              int out_channels, int kernel) {
  const int cin = input.channels();
  const int h = input.height();
  const int w = input.width();
  const int kk = kernel * kernel;
  if (weight.size() != static_cast<std::size_t>(out_channels) * cin * kk ||
      bias.size() != static_cast<std::size_t>(out_channels)) {
    throw InvalidArgument("conv2d weight shape does not match input channels");
  }
  const int r = kernel / 2;
  Tensor out(out_channels, h, w);
  for (int oc = 0; oc < out_channels; ++oc) {
    auto dst = out.plane(oc);
    std::fill(dst.begin(), dst.end(), bias[oc]);
    for (int ic = 0; ic < cin; ++ic) {
      const double* src = input.plane(ic).data();
      const double* wk = weight.data() + (static_cast<std::size_t>(oc) * cin + ic) * kk;
      for (int ky = 0; ky < kernel; ++ky) {
        for (int kx = 0; kx < kernel; ++kx) {
          accumulate_shifted(dst.data(), src, h, w, ky - r, kx - r, wk[ky * kernel + kx]);
        }
      }
    }
  }
  return out;
}

void conv2d_backward(const Tensor& input, std::span<const double> weight, int kernel,
                     const Tensor& d_output, Tensor* d_input, std::span<double> d_weight,
                     std::span<double> d_bias) {
  const int cin = input.channels();
  const int cout = d_output.channels();
  const int h = input.height();
  const int w = input.width();
  const int kk = kernel * kernel;
  const int r = kernel / 2;
  for (int oc = 0; oc < cout; ++oc) {
    const double* g = d_output.plane(oc).data();
    double s = 0.0;
    for (std::size_t i = 0; i < d_output.plane_size(); ++i) s += g[i];
    d_bias[oc] += s;
    for (int ic = 0; ic < cin; ++ic) {
      const double* src = input.plane(ic).data();
      double* dw = d_weight.data() + (static_cast<std::size_t>(oc) * cin + ic) * kk;
      for (int ky = 0; ky < kernel; ++ky) {
        for (int kx = 0; kx < kernel; ++kx) {
          dw[ky * kernel + kx] += shifted_dot(g, src, h, w, ky - r, kx - r);
        }
      }
    }
  }
  if (d_input == nullptr) return;
  for (int ic = 0; ic < cin; ++ic) {
    double* dst = d_input->plane(ic).data();
    for (int oc = 0; oc < cout; ++oc) {
      const double* g = d_output.plane(oc).data();
      const double* wk = weight.data() + (static_cast<std::size_t>(oc) * cin + ic) * kk;
      for (int ky = 0; ky < kernel; ++ky) {
        for (int kx = 0; kx < kernel; ++kx) {
          accumulate_shifted(dst, g, h, w, r - ky, r - kx, wk[ky * kernel + kx]);
        }
      }
    }
  }
}

Tensor silu(const Tensor& pre) {
  Tensor out(pre.channels(), pre.height(), pre.width());
  auto src = pre.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] * sigmoid(src[i]);
  return out;
}

void silu_backward(const Tensor& pre, const Tensor& d_output, Tensor& d_pre) {
  auto z = pre.values();
  auto g = d_output.values();
  auto d = d_pre.values();
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double s = sigmoid(z[i]);
    d[i] += g[i] * s * (1.0 + z[i] * (1.0 - s));
  }
}

Tensor avg_pool2(const Tensor& input) {
  const int h = input.height() / 2;
  const int w = input.width() / 2;
  Tensor out(input.channels(), h, w);
  for (int c = 0; c < input.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        out.at(c, y, x) = 0.25 * (input.at(c, 2 * y, 2 * x) + input.at(c, 2 * y, 2 * x + 1) +
                                  input.at(c, 2 * y + 1, 2 * x) +
                                  input.at(c, 2 * y + 1, 2 * x + 1));
      }
    }
  }
  return out;
}

void avg_pool2_backward(const Tensor& d_output, Tensor& d_input) {
  for (int c = 0; c < d_output.channels(); ++c) {
    for (int y = 0; y < d_output.height(); ++y) {
      for (int x = 0; x < d_output.width(); ++x) {
        const double g = 0.25 * d_output.at(c, y, x);
        d_input.at(c, 2 * y, 2 * x) += g;
        d_input.at(c, 2 * y, 2 * x + 1) += g;
        d_input.at(c, 2 * y + 1, 2 * x) += g;
        d_input.at(c, 2 * y + 1, 2 * x + 1) += g;
      }
    }
  }
}

Tensor upsample_nearest2(const Tensor& input) {
  Tensor out(input.channels(), input.height() * 2, input.width() * 2);
  for (int c = 0; c < out.channels(); ++c) {
    for (int y = 0; y < out.height(); ++y) {
      for (int x = 0; x < out.width(); ++x) out.at(c, y, x) = input.at(c, y / 2, x / 2);
    }
  }
  return out;
}

void upsample_nearest2_backward(const Tensor& d_output, Tensor& d_input) {
  for (int c = 0; c < d_output.channels(); ++c) {
    for (int y = 0; y < d_output.height(); ++y) {
      for (int x = 0; x < d_output.width(); ++x) d_input.at(c, y / 2, x / 2) += d_output.at(c, y, x);
    }
  }
}

Tensor upsample_bilinear(const Tensor& input, int factor) {
  if (factor < 1) throw InvalidArgument("upsample factor must be >= 1");
  if (factor == 1) return input;
  const auto ty = bilinear_taps(input.height(), factor);
  const auto tx = bilinear_taps(input.width(), factor);
  const int oh = input.height() * factor;
  const int ow = input.width() * factor;
  Tensor out(input.channels(), oh, ow);
  std::vector<double> row(static_cast<std::size_t>(input.width()));
  for (int c = 0; c < input.channels(); ++c) {
    for (int y = 0; y < oh; ++y) {
      const auto& a = ty[y];
      for (int j = 0; j < input.width(); ++j) {
        row[j] = (1.0 - a.t) * input.at(c, a.lo, j) + a.t * input.at(c, a.hi, j);
      }
      for (int x = 0; x < ow; ++x) {
        const auto& b = tx[x];
        out.at(c, y, x) = (1.0 - b.t) * row[b.lo] + b.t * row[b.hi];
      }
    }
  }
  return out;
}

void upsample_bilinear_backward(const Tensor& d_output, int factor, Tensor& d_input) {
  if (factor == 1) {
    auto d = d_input.values();
    auto g = d_output.values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    return;
  }
  const auto ty = bilinear_taps(d_input.height(), factor);
  const auto tx = bilinear_taps(d_input.width(), factor);
  std::vector<double> row(static_cast<std::size_t>(d_input.width()));
  for (int c = 0; c < d_output.channels(); ++c) {
    for (int y = 0; y < d_output.height(); ++y) {
      std::fill(row.begin(), row.end(), 0.0);
      for (int x = 0; x < d_output.width(); ++x) {
        const auto& b = tx[x];
        const double g = d_output.at(c, y, x);
        row[b.lo] += (1.0 - b.t) * g;
        row[b.hi] += b.t * g;
      }
      const auto& a = ty[y];
      for (int j = 0; j < d_input.width(); ++j) {
        d_input.at(c, a.lo, j) += (1.0 - a.t) * row[j];
        d_input.at(c, a.hi, j) += a.t * row[j];
      }
    }
  }
}

Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw InvalidArgument("concat requires equal spatial size");
  }
  Tensor out(a.channels() + b.channels(), a.height(), a.width());
  auto dst = out.values();
  std::copy(a.values().begin(), a.values().end(), dst.begin());
  std::copy(b.values().begin(), b.values().end(), dst.begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

Tensor softmax_channels(const Tensor& logits) {
  Tensor out(logits.channels(), logits.height(), logits.width());
  const std::size_t n = logits.plane_size();
  const int levels = logits.channels();
  for (std::size_t i = 0; i < n; ++i) {
    double m = logits.plane(0)[i];
    for (int c = 1; c < levels; ++c) m = std::max(m, logits.plane(c)[i]);
    double z = 0.0;
    for (int c = 0; c < levels; ++c) {
      const double e = std::exp(logits.plane(c)[i] - m);
      out.plane(c)[i] = e;
      z += e;
    }
    for (int c = 0; c < levels; ++c) out.plane(c)[i] /= z;
  }
  return out;
}

void softmax_channels_backward(const Tensor& probs, const Tensor& d_probs, Tensor& d_logits) {
  const std::size_t n = probs.plane_size();
  const int levels = probs.channels();
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0;
    for (int c = 0; c < levels; ++c) dot += probs.plane(c)[i] * d_probs.plane(c)[i];
    for (int c = 0; c < levels; ++c) {
      d_logits.plane(c)[i] += probs.plane(c)[i] * (d_probs.plane(c)[i] - dot);
    }
  }
}

Tensor slice_channel(const Tensor& t, int c) {
  Tensor out(1, t.height(), t.width());
  auto src = t.plane(c);
  std::copy(src.begin(), src.end(), out.values().begin());
  return out;
}

}  // namespace dropspread::layers
