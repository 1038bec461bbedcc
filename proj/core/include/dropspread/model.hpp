#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dropspread/tensor.hpp"

namespace dropspread {

/// Shape of the dual-head encoder-decoder.
///
/// Level l (0 = full resolution) carries `level_width(l)` feature channels.
/// Level 0..pyramid_depth each get a side classifier for both heads.
struct ModelConfig {
  int pyramid_depth = 6;
  int base_channels = 8;
  int input_channels = 3;

  /// Throws InvalidArgument on depth < 1 or channel counts < 1.
  void validate() const;
  int level_width(int level) const;
  int required_divisor() const { return 1 << pyramid_depth; }
  int level_count() const { return pyramid_depth + 1; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Number of learnable scalars for `config`.
///
/// With w_l = level_width(l), c_in = input_channels and D = pyramid_depth:
///   encoder  sum_{l=0..D}   (9 a_l w_l + w_l) + (9 w_l w_l + w_l), a_0 = c_in, a_l = w_{l-1}
///   decoder  sum_{l=0..D-1} (9 (w_{l+1} + w_l) w_l + w_l) + (9 w_l w_l + w_l)
///   heads    sum_{l=0..D}   4 w_l + 4
std::size_t parameter_count(const ModelConfig& config);

/// All network weights in one flat buffer, addressed by name.
class ModelParameters {
 public:
  struct Entry {
    std::string name;
    std::vector<int> shape;
    std::size_t offset = 0;
    std::size_t size = 0;

    friend bool operator==(const Entry&, const Entry&) = default;
  };

  /// Zero-filled parameters with the canonical layout for `config`.
  explicit ModelParameters(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  const std::vector<Entry>& entries() const { return entries_; }
  /// Throws InvalidArgument for an unknown name.
  const Entry& entry(std::string_view name) const;

  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> array(std::string_view name);
  std::span<const double> array(std::string_view name) const;

  bool all_finite() const;

  friend bool operator==(const ModelParameters&, const ModelParameters&) = default;

 private:
  ModelConfig config_;
  std::vector<Entry> entries_;
  std::vector<double> values_;
};

/// Deterministic He-normal initialisation. Same (config, seed) gives bit-identical values
/// on every platform (the generator is fixed, not std::normal_distribution).
ModelParameters build_model(const ModelConfig& config, std::uint64_t seed);

/// Multi-resolution outputs of one forward pass.
struct PredictionPyramid {
  std::vector<Tensor> seg_side_scores;   // level l is 1 x H/2^l x W/2^l
  std::vector<Tensor> edge_side_scores;  // same family
  Tensor seg_attention;                  // (D+1) x H x W, softmax over channel axis
  Tensor edge_attention;
  Tensor final_seg_scores;               // 1 x H x W, logits
  Tensor final_edge_scores;
};

/// d(loss)/d(score) for every score map of a PredictionPyramid.
struct PyramidGradient {
  std::vector<Tensor> seg_side_scores;
  std::vector<Tensor> edge_side_scores;
  Tensor final_seg_scores;
  Tensor final_edge_scores;

  /// Zero gradient with the shapes of `pyramid`.
  static PyramidGradient zeros_like(const PredictionPyramid& pyramid);
};

/// Intermediate activations kept by forward_with_trace for backward().
struct ForwardTrace;

struct ForwardTraceDeleter {
  void operator()(ForwardTrace* trace) const;
};
using ForwardTracePtr = std::unique_ptr<ForwardTrace, ForwardTraceDeleter>;

/// Throws DimensionError (naming the divisor) when H or W is not a multiple of
/// 2^pyramid_depth, InvalidArgument on a channel mismatch.
void check_input(const ModelConfig& config, const Tensor& image);

PredictionPyramid forward(const ModelParameters& params, const Tensor& image);
std::vector<PredictionPyramid> forward(const ModelParameters& params,
                                       std::span<const Tensor> images);

PredictionPyramid forward_with_trace(const ModelParameters& params, const Tensor& image,
                                     ForwardTracePtr& trace);

/// Accumulates d(loss)/d(params) into `param_grad` (same layout as params.values()).
void backward(const ModelParameters& params, const ForwardTrace& trace,
              const PyramidGradient& grad, std::span<double> param_grad);

/// Bilinear (half-pixel centred, edge clamped) upsampling by an integer factor.
Tensor upsample_bilinear(const Tensor& input, int factor);

/// final(x) = sum_l attention_l(x) * upsample(side_l)(x).
///
/// `side_scores[l]` may be at any resolution that divides the attention
/// resolution by an integer factor. Throws InvariantViolation when an
/// attention column does not sum to 1 within 1e-5 or has negative entries.
Tensor merge_with_attention(std::span<const Tensor> side_scores, const Tensor& attention);

/// 1 where score > 0 (probability > 0.5).
BinaryMask mask_from_scores(const Tensor& scores);

BinaryMask predict_mask(const ModelParameters& params, const Tensor& image);

}  // namespace dropspread
