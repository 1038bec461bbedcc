#include "dropspread/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "dropspread/errors.hpp"
#include "layers.hpp"

namespace dropspread {

// Head channels per level: seg score, edge score, seg attention logit, edge attention logit.
namespace {
constexpr int kHeadChannels = 4;
constexpr int kSegScore = 0;
constexpr int kEdgeScore = 1;
constexpr int kSegAttention = 2;
constexpr int kEdgeAttention = 3;
}  // namespace

struct ForwardTrace {
  struct Block {
    Tensor input, pre1, act1, pre2, out;
  };
  std::vector<Block> enc;
  std::vector<Block> dec;
  std::vector<Tensor> head;
  std::vector<Tensor> seg_up;
  std::vector<Tensor> edge_up;
  Tensor seg_attention;
  Tensor edge_attention;
};

void ForwardTraceDeleter::operator()(ForwardTrace* trace) const { delete trace; }

void ModelConfig::validate() const {
  if (pyramid_depth < 1) {
    throw InvalidArgument("pyramid_depth must be >= 1 (got " + std::to_string(pyramid_depth) + ")");
  }
  if (pyramid_depth > 12) throw InvalidArgument("pyramid_depth above 12 is not supported");
  if (base_channels < 1) {
    throw InvalidArgument("base_channels must be >= 1 (got " + std::to_string(base_channels) + ")");
  }
  if (input_channels < 1) throw InvalidArgument("input_channels must be >= 1");
}

int ModelConfig::level_width(int level) const { return base_channels << std::min(level, 2); }

std::size_t parameter_count(const ModelConfig& config) {
  config.validate();
  const int depth = config.pyramid_depth;
  std::size_t n = 0;
  for (int l = 0; l <= depth; ++l) {
    const std::size_t w = config.level_width(l);
    const std::size_t a = l == 0 ? config.input_channels : config.level_width(l - 1);
    n += 9 * a * w + w + 9 * w * w + w;
    n += kHeadChannels * w + kHeadChannels;
  }
  for (int l = 0; l < depth; ++l) {
    const std::size_t w = config.level_width(l);
    const std::size_t up = config.level_width(l + 1);
    n += 9 * (up + w) * w + w + 9 * w * w + w;
  }
  return n;
}

namespace {

std::string enc_name(int l) { return "enc" + std::to_string(l); }
std::string dec_name(int l) { return "dec" + std::to_string(l); }
std::string head_name(int l) { return "head" + std::to_string(l); }

struct LayoutBuilder {
  std::vector<ModelParameters::Entry> entries;
  std::size_t offset = 0;

  void add(std::string name, std::vector<int> shape) {
    std::size_t size = 1;
    for (int d : shape) size *= static_cast<std::size_t>(d);
    entries.push_back({std::move(name), std::move(shape), offset, size});
    offset += size;
  }
  void add_conv(const std::string& prefix, int in, int out, int kernel) {
    add(prefix + ".weight", {out, in, kernel, kernel});
    add(prefix + ".bias", {out});
  }
};

}  // namespace

ModelParameters::ModelParameters(const ModelConfig& config) : config_(config) {
  config.validate();
  LayoutBuilder b;
  const int depth = config.pyramid_depth;
  for (int l = 0; l <= depth; ++l) {
    const int in = l == 0 ? config.input_channels : config.level_width(l - 1);
    const int w = config.level_width(l);
    b.add_conv(enc_name(l) + ".conv1", in, w, 3);
    b.add_conv(enc_name(l) + ".conv2", w, w, 3);
  }
  for (int l = 0; l < depth; ++l) {
    const int w = config.level_width(l);
    b.add_conv(dec_name(l) + ".conv1", config.level_width(l + 1) + w, w, 3);
    b.add_conv(dec_name(l) + ".conv2", w, w, 3);
  }
  for (int l = 0; l <= depth; ++l) b.add_conv(head_name(l), config.level_width(l), kHeadChannels, 1);
  entries_ = std::move(b.entries);
  values_.assign(b.offset, 0.0);
}

const ModelParameters::Entry& ModelParameters::entry(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e;
  }
  throw InvalidArgument("unknown parameter array '" + std::string(name) + "'");
}

std::span<double> ModelParameters::array(std::string_view name) {
  const auto& e = entry(name);
  return std::span<double>(values_).subspan(e.offset, e.size);
}

std::span<const double> ModelParameters::array(std::string_view name) const {
  const auto& e = entry(name);
  return std::span<const double>(values_).subspan(e.offset, e.size);
}

bool ModelParameters::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

ModelParameters build_model(const ModelConfig& config, std::uint64_t seed) {
  ModelParameters params(config);
  std::mt19937_64 engine(seed);
  auto uniform = [&engine] { return (static_cast<double>(engine() >> 11) + 0.5) * 0x1.0p-53; };
  auto normal = [&uniform] {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  };
  for (const auto& e : params.entries()) {
    if (e.shape.size() != 4) continue;  // biases start at zero
    const double fan_in = static_cast<double>(e.shape[1]) * e.shape[2] * e.shape[3];
    const bool head = e.name.starts_with("head");
    const double stddev = std::sqrt((head ? 1.0 : 2.0) / fan_in);
    for (double& v : params.array(e.name)) v = stddev * normal();
  }
  return params;
}

PyramidGradient PyramidGradient::zeros_like(const PredictionPyramid& pyramid) {
  PyramidGradient g;
  for (const auto& t : pyramid.seg_side_scores) g.seg_side_scores.emplace_back(1, t.height(), t.width());
  for (const auto& t : pyramid.edge_side_scores) g.edge_side_scores.emplace_back(1, t.height(), t.width());
  g.final_seg_scores = Tensor(1, pyramid.final_seg_scores.height(), pyramid.final_seg_scores.width());
  g.final_edge_scores = Tensor(1, pyramid.final_edge_scores.height(), pyramid.final_edge_scores.width());
  return g;
}

void check_input(const ModelConfig& config, const Tensor& image) {
  const int div = config.required_divisor();
  if (image.height() < div || image.width() < div || image.height() % div != 0 ||
      image.width() % div != 0) {
    throw DimensionError("input " + std::to_string(image.height()) + "x" +
                             std::to_string(image.width()) +
                             " is not divisible by 2^pyramid_depth = " + std::to_string(div),
                         div);
  }
  if (image.channels() != config.input_channels) {
    throw InvalidArgument("input has " + std::to_string(image.channels()) +
                          " channels, model expects " + std::to_string(config.input_channels));
  }
}

namespace {

ForwardTrace::Block run_block(const ModelParameters& params, const std::string& prefix,
                              Tensor input, int width, bool keep) {
  ForwardTrace::Block b;
  b.input = std::move(input);
  b.pre1 = layers::conv2d(b.input, params.array(prefix + ".conv1.weight"),
                          params.array(prefix + ".conv1.bias"), width, 3);
  b.act1 = layers::silu(b.pre1);
  if (!keep) b.pre1 = Tensor();
  b.pre2 = layers::conv2d(b.act1, params.array(prefix + ".conv2.weight"),
                          params.array(prefix + ".conv2.bias"), width, 3);
  b.out = layers::silu(b.pre2);
  if (!keep) {
    b.input = Tensor();
    b.act1 = Tensor();
    b.pre2 = Tensor();
  }
  return b;
}

Tensor block_backward(const ModelParameters& params, const std::string& prefix,
                      const ForwardTrace::Block& b, const Tensor& d_out, std::span<double> grad,
                      bool need_input_grad) {
  const auto& e1w = params.entry(prefix + ".conv1.weight");
  const auto& e1b = params.entry(prefix + ".conv1.bias");
  const auto& e2w = params.entry(prefix + ".conv2.weight");
  const auto& e2b = params.entry(prefix + ".conv2.bias");

  Tensor d_pre2(b.pre2.channels(), b.pre2.height(), b.pre2.width());
  layers::silu_backward(b.pre2, d_out, d_pre2);
  Tensor d_act1(b.act1.channels(), b.act1.height(), b.act1.width());
  layers::conv2d_backward(b.act1, params.array(e2w.name), 3, d_pre2, &d_act1,
                          grad.subspan(e2w.offset, e2w.size), grad.subspan(e2b.offset, e2b.size));
  Tensor d_pre1(b.pre1.channels(), b.pre1.height(), b.pre1.width());
  layers::silu_backward(b.pre1, d_act1, d_pre1);
  Tensor d_input;
  if (need_input_grad) d_input = Tensor(b.input.channels(), b.input.height(), b.input.width());
  layers::conv2d_backward(b.input, params.array(e1w.name), 3, d_pre1,
                          need_input_grad ? &d_input : nullptr, grad.subspan(e1w.offset, e1w.size),
                          grad.subspan(e1b.offset, e1b.size));
  return d_input;
}

void check_attention(const Tensor& attention) {
  const std::size_t n = attention.plane_size();
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (int c = 0; c < attention.channels(); ++c) {
      const double a = attention.plane(c)[i];
      if (!(a >= 0.0)) throw InvariantViolation("attention weight is negative or NaN");
      s += a;
    }
    if (std::abs(s - 1.0) > 1e-5) {
      throw InvariantViolation("attention weights sum to " + std::to_string(s) + " at pixel " +
                               std::to_string(i));
    }
  }
}

Tensor weighted_sum(std::span<const Tensor> upsampled, const Tensor& attention) {
  Tensor out(1, attention.height(), attention.width());
  auto dst = out.values();
  for (int l = 0; l < attention.channels(); ++l) {
    auto a = attention.plane(l);
    auto s = upsampled[l].values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += a[i] * s[i];
  }
  return out;
}

PredictionPyramid forward_impl(const ModelParameters& params, const Tensor& image,
                               ForwardTrace& trace, bool keep) {
  const ModelConfig& cfg = params.config();
  check_input(cfg, image);
  const int depth = cfg.pyramid_depth;
  const int levels = cfg.level_count();
  const int h = image.height();
  const int w = image.width();

  trace.enc.resize(levels);
  trace.enc[0] = run_block(params, enc_name(0), image, cfg.level_width(0), keep);
  for (int l = 1; l <= depth; ++l) {
    trace.enc[l] = run_block(params, enc_name(l), layers::avg_pool2(trace.enc[l - 1].out),
                             cfg.level_width(l), keep);
  }

  PredictionPyramid out;
  out.seg_side_scores.resize(levels);
  out.edge_side_scores.resize(levels);
  trace.head.resize(levels);
  trace.seg_up.resize(levels);
  trace.edge_up.resize(levels);
  Tensor seg_logits(levels, h, w);
  Tensor edge_logits(levels, h, w);

  auto emit_head = [&](int l, const Tensor& features) {
    const std::string name = head_name(l);
    Tensor head = layers::conv2d(features, params.array(name + ".weight"),
                                 params.array(name + ".bias"), kHeadChannels, 1);
    const int factor = 1 << l;
    out.seg_side_scores[l] = layers::slice_channel(head, kSegScore);
    out.edge_side_scores[l] = layers::slice_channel(head, kEdgeScore);
    trace.seg_up[l] = layers::upsample_bilinear(out.seg_side_scores[l], factor);
    trace.edge_up[l] = layers::upsample_bilinear(out.edge_side_scores[l], factor);
    const Tensor sa = layers::upsample_bilinear(layers::slice_channel(head, kSegAttention), factor);
    const Tensor ea = layers::upsample_bilinear(layers::slice_channel(head, kEdgeAttention), factor);
    std::copy(sa.values().begin(), sa.values().end(), seg_logits.plane(l).begin());
    std::copy(ea.values().begin(), ea.values().end(), edge_logits.plane(l).begin());
    if (keep) trace.head[l] = std::move(head);
  };

  // Decoder: dec_D is the bottleneck encoder output.
  emit_head(depth, trace.enc[depth].out);
  trace.dec.resize(depth);
  const Tensor* deeper = &trace.enc[depth].out;
  for (int l = depth - 1; l >= 0; --l) {
    Tensor merged = layers::concat(layers::upsample_nearest2(*deeper), trace.enc[l].out);
    trace.dec[l] = run_block(params, dec_name(l), std::move(merged), cfg.level_width(l), keep);
    if (!keep) {
      // Inputs of the level below are all that is needed from here on.
      if (l + 1 < depth) trace.dec[l + 1].out = Tensor();
      trace.enc[l + 1].out = Tensor();
    }
    emit_head(l, trace.dec[l].out);
    deeper = &trace.dec[l].out;
  }

  out.seg_attention = layers::softmax_channels(seg_logits);
  out.edge_attention = layers::softmax_channels(edge_logits);
  out.final_seg_scores = weighted_sum(trace.seg_up, out.seg_attention);
  out.final_edge_scores = weighted_sum(trace.edge_up, out.edge_attention);
  if (keep) {
    trace.seg_attention = out.seg_attention;
    trace.edge_attention = out.edge_attention;
  }
  return out;
}

}  // namespace

PredictionPyramid forward(const ModelParameters& params, const Tensor& image) {
  ForwardTrace trace;
  return forward_impl(params, image, trace, false);
}

std::vector<PredictionPyramid> forward(const ModelParameters& params,
                                       std::span<const Tensor> images) {
  std::vector<PredictionPyramid> out;
  out.reserve(images.size());
  for (const auto& image : images) out.push_back(forward(params, image));
  return out;
}

PredictionPyramid forward_with_trace(const ModelParameters& params, const Tensor& image,
                                     ForwardTracePtr& trace) {
  trace.reset(new ForwardTrace());
  return forward_impl(params, image, *trace, true);
}

void backward(const ModelParameters& params, const ForwardTrace& trace,
              const PyramidGradient& grad, std::span<double> param_grad) {
  const ModelConfig& cfg = params.config();
  const int depth = cfg.pyramid_depth;
  const int levels = cfg.level_count();
  if (param_grad.size() != params.size()) {
    throw InvalidArgument("gradient buffer size does not match parameter count");
  }
  if (static_cast<int>(grad.seg_side_scores.size()) != levels ||
      static_cast<int>(grad.edge_side_scores.size()) != levels) {
    throw InvalidArgument("pyramid gradient has wrong level count");
  }

  // Merge heads: final = sum_l a_l * up_l, a = softmax(logits).
  std::vector<Tensor> d_head(levels);
  for (int l = 0; l < levels; ++l) {
    const auto& h = trace.head[l];
    d_head[l] = Tensor(kHeadChannels, h.height(), h.width());
  }
  auto merge_backward = [&](const std::vector<Tensor>& up, const Tensor& attention,
                            const Tensor& d_final, const std::vector<Tensor>& d_side,
                            int score_channel, int attention_channel) {
    Tensor d_att(levels, attention.height(), attention.width());
    auto g = d_final.values();
    for (int l = 0; l < levels; ++l) {
      auto a = attention.plane(l);
      auto s = up[l].values();
      auto da = d_att.plane(l);
      Tensor d_up(1, attention.height(), attention.width());
      auto du = d_up.values();
      for (std::size_t i = 0; i < g.size(); ++i) {
        du[i] = a[i] * g[i];
        da[i] = s[i] * g[i];
      }
      const int factor = 1 << l;
      Tensor d_score(1, d_head[l].height(), d_head[l].width());
      layers::upsample_bilinear_backward(d_up, factor, d_score);
      auto dst = d_head[l].plane(score_channel);
      auto direct = d_side[l].values();
      auto via = d_score.values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += via[i] + direct[i];
    }
    Tensor d_logits(levels, attention.height(), attention.width());
    layers::softmax_channels_backward(attention, d_att, d_logits);
    for (int l = 0; l < levels; ++l) {
      Tensor plane(1, attention.height(), attention.width());
      auto src = d_logits.plane(l);
      std::copy(src.begin(), src.end(), plane.values().begin());
      Tensor d_small(1, d_head[l].height(), d_head[l].width());
      layers::upsample_bilinear_backward(plane, 1 << l, d_small);
      auto dst = d_head[l].plane(attention_channel);
      auto v = d_small.values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += v[i];
    }
  };
  merge_backward(trace.seg_up, trace.seg_attention, grad.final_seg_scores, grad.seg_side_scores,
                 kSegScore, kSegAttention);
  merge_backward(trace.edge_up, trace.edge_attention, grad.final_edge_scores,
                 grad.edge_side_scores, kEdgeScore, kEdgeAttention);

  // Head convolutions: features are dec_l.out (l < D) or enc_D.out.
  std::vector<Tensor> d_features(levels);
  for (int l = 0; l < levels; ++l) {
    const Tensor& features = l == depth ? trace.enc[depth].out : trace.dec[l].out;
    d_features[l] = Tensor(features.channels(), features.height(), features.width());
    const auto& ew = params.entry(head_name(l) + ".weight");
    const auto& eb = params.entry(head_name(l) + ".bias");
    layers::conv2d_backward(features, params.array(ew.name), 1, d_head[l], &d_features[l],
                            param_grad.subspan(ew.offset, ew.size),
                            param_grad.subspan(eb.offset, eb.size));
  }

  // Decoder, finest level first so each level's gradient is complete before use.
  std::vector<Tensor> d_enc_out(levels);
  for (int l = 0; l <= depth; ++l) {
    const auto& o = trace.enc[l].out;
    d_enc_out[l] = Tensor(o.channels(), o.height(), o.width());
  }
  {
    auto dst = d_enc_out[depth].values();
    auto src = d_features[depth].values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  for (int l = 0; l < depth; ++l) {
    Tensor d_in = block_backward(params, dec_name(l), trace.dec[l], d_features[l], param_grad, true);
    const int up_channels = cfg.level_width(l + 1);
    Tensor d_up(up_channels, d_in.height(), d_in.width());
    std::copy_n(d_in.values().begin(), d_up.size(), d_up.values().begin());
    Tensor& d_deeper = l + 1 == depth ? d_enc_out[depth] : d_features[l + 1];
    layers::upsample_nearest2_backward(d_up, d_deeper);
    auto skip = d_enc_out[l].values();
    auto src = d_in.values().subspan(d_up.size());
    for (std::size_t i = 0; i < skip.size(); ++i) skip[i] += src[i];
  }

  for (int l = depth; l >= 0; --l) {
    Tensor d_in = block_backward(params, enc_name(l), trace.enc[l], d_enc_out[l], param_grad, l > 0);
    if (l > 0) layers::avg_pool2_backward(d_in, d_enc_out[l - 1]);
  }
}

Tensor upsample_bilinear(const Tensor& input, int factor) {
  return layers::upsample_bilinear(input, factor);
}

Tensor merge_with_attention(std::span<const Tensor> side_scores, const Tensor& attention) {
  if (static_cast<int>(side_scores.size()) != attention.channels()) {
    throw InvalidArgument("attention has " + std::to_string(attention.channels()) +
                          " levels but " + std::to_string(side_scores.size()) +
                          " side maps were given");
  }
  check_attention(attention);
  std::vector<Tensor> up;
  up.reserve(side_scores.size());
  for (const auto& s : side_scores) {
    if (s.channels() != 1 || s.height() == 0 || attention.height() % s.height() != 0 ||
        attention.width() % s.width() != 0 ||
        attention.height() / s.height() != attention.width() / s.width()) {
      throw DimensionError("side map does not divide the attention resolution", 0);
    }
    up.push_back(layers::upsample_bilinear(s, attention.height() / s.height()));
  }
  return weighted_sum(up, attention);
}

BinaryMask mask_from_scores(const Tensor& scores) {
  BinaryMask mask(scores.height(), scores.width());
  for (int y = 0; y < scores.height(); ++y) {
    for (int x = 0; x < scores.width(); ++x) mask.set(y, x, scores.at(0, y, x) > 0.0);
  }
  return mask;
}

BinaryMask predict_mask(const ModelParameters& params, const Tensor& image) {
  return mask_from_scores(forward(params, image).final_seg_scores);
}

}  // namespace dropspread
