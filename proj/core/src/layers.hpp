#pragma once

// Forward/backward kernels for the network. Backward functions accumulate
// (+=) into their gradient outputs.

#include <span>

#include "dropspread/tensor.hpp"

namespace dropspread::layers {

/// Square convolution with kernel 1 or 3 (zero padding keeps H x W).
/// weight layout [out][in][k][k].
Tensor conv2d(const Tensor& input, std::span<const double> weight, std::span<const double> bias,
              int out_channels, int kernel);

void conv2d_backward(const Tensor& input, std::span<const double> weight, int kernel,
                     const Tensor& d_output, Tensor* d_input, std::span<double> d_weight,
                     std::span<double> d_bias);

/// x * sigmoid(x).
Tensor silu(const Tensor& pre);
/// d_pre += d_out * silu'(pre).
void silu_backward(const Tensor& pre, const Tensor& d_output, Tensor& d_pre);

Tensor avg_pool2(const Tensor& input);
void avg_pool2_backward(const Tensor& d_output, Tensor& d_input);

Tensor upsample_nearest2(const Tensor& input);
void upsample_nearest2_backward(const Tensor& d_output, Tensor& d_input);

Tensor upsample_bilinear(const Tensor& input, int factor);
void upsample_bilinear_backward(const Tensor& d_output, int factor, Tensor& d_input);

/// Channel-wise concatenation [a; b].
Tensor concat(const Tensor& a, const Tensor& b);

/// Softmax across the channel axis at each pixel.
Tensor softmax_channels(const Tensor& logits);
/// d_logits += J^T d_probs for the softmax Jacobian.
void softmax_channels_backward(const Tensor& probs, const Tensor& d_probs, Tensor& d_logits);

/// Copies channel `c` into a single-channel tensor.
Tensor slice_channel(const Tensor& t, int c);

}  // namespace dropspread::layers
