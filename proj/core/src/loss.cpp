#include "dropspread/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dropspread/errors.hpp"

namespace dropspread {
namespace {

// log(1 + exp(x)) without overflow.
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require_same_shape(const Tensor& scores, const BinaryMask& target) {
  if (scores.channels() != 1 || scores.height() != target.height() ||
      scores.width() != target.width()) {
    throw InvalidArgument("score map " + std::to_string(scores.channels()) + "x" +
                          std::to_string(scores.height()) + "x" + std::to_string(scores.width()) +
                          " does not match target " + std::to_string(target.height()) + "x" +
                          std::to_string(target.width()));
  }
}

struct WeightedMap {
  const Tensor* scores;
  TargetPair targets;  // only the relevant member is used
  bool edge;
  double weight;
};

}  // namespace

double LossConfig::supervision_weight(int level) const {
  if (supervision_weights.empty()) return 1.0;
  return supervision_weights.at(static_cast<std::size_t>(level));
}

void LossConfig::validate(int level_count) const {
  if (!(edge_weight >= 0.0) || !(final_weight >= 0.0)) {
    throw InvalidArgument("loss weights must be non-negative");
  }
  if (!supervision_weights.empty() &&
      static_cast<int>(supervision_weights.size()) != level_count) {
    throw InvalidArgument("expected " + std::to_string(level_count) +
                          " supervision weights, got " +
                          std::to_string(supervision_weights.size()));
  }
  double total = final_weight * (1.0 + edge_weight);
  for (int l = 0; l < level_count; ++l) {
    const double w = supervision_weight(l);
    if (!(w >= 0.0)) throw InvalidArgument("supervision weights must be non-negative");
    total += w * (1.0 + edge_weight);
  }
  if (!(total > 0.0)) throw InvalidArgument("at least one loss weight must be positive");
}

TargetPair TargetPair::from_mask(BinaryMask seg) {
  TargetPair t;
  t.edge_target = edge_targets_from_mask(seg);
  t.seg_target = std::move(seg);
  return t;
}

double beta(const BinaryMask& target) {
  if (target.empty()) throw InvalidArgument("beta of an empty mask");
  const auto labels = target.labels();
  const auto zeros = std::count(labels.begin(), labels.end(), std::uint8_t{0});
  return static_cast<double>(zeros) / static_cast<double>(labels.size());
}

double bce(std::span<const double> probabilities, const BinaryMask& target) {
  if (probabilities.size() != target.size()) {
    throw InvalidArgument("probability count does not match target size");
  }
  constexpr double kClamp = 1e-12;
  double loss = 0.0;
  const auto labels = target.labels();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = std::clamp(probabilities[i], kClamp, 1.0 - kClamp);
    loss -= labels[i] ? std::log(p) : std::log1p(-p);
  }
  return loss;
}

double balanced_bce_from_scores(const Tensor& scores, const BinaryMask& target) {
  require_same_shape(scores, target);
  const double b = beta(target);
  const auto s = scores.values();
  const auto labels = target.labels();
  double wet = 0.0;
  double dry = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    // -log sigmoid(s) = softplus(-s); -log(1 - sigmoid(s)) = softplus(s)
    if (labels[i]) {
      wet += softplus(-s[i]);
    } else {
      dry += softplus(s[i]);
    }
  }
  // beta == 1 exactly when Y1 is empty, so the (1 - beta) term vanishes too.
  return b * wet + (1.0 - b) * dry;
}

Tensor balanced_bce_gradient(const Tensor& scores, const BinaryMask& target) {
  require_same_shape(scores, target);
  const double b = beta(target);
  Tensor grad(1, scores.height(), scores.width());
  const auto s = scores.values();
  auto g = grad.values();
  const auto labels = target.labels();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    g[i] = labels[i] ? -b * sigmoid(-s[i]) : (1.0 - b) * sigmoid(s[i]);
  }
  return grad;
}

BinaryMask edge_targets_from_mask(const BinaryMask& seg) {
  const int h = seg.height();
  const int w = seg.width();
  BinaryMask edges(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto v = seg.at(y, x);
      const bool edge = (y > 0 && seg.at(y - 1, x) != v) || (y + 1 < h && seg.at(y + 1, x) != v) ||
                        (x > 0 && seg.at(y, x - 1) != v) || (x + 1 < w && seg.at(y, x + 1) != v);
      edges.set(y, x, edge);
    }
  }
  return edges;
}

TargetPair level_targets(const TargetPair& targets, int level) {
  if (level == 0) return targets;
  return TargetPair::from_mask(downsample_nearest(targets.seg_target, 1 << level));
}

namespace {

std::vector<WeightedMap> collect_maps(const PredictionPyramid& pyramid, const TargetPair& targets,
                                      const LossConfig& config) {
  const int levels = static_cast<int>(pyramid.seg_side_scores.size());
  if (levels == 0 || static_cast<int>(pyramid.edge_side_scores.size()) != levels) {
    throw InvalidArgument("prediction pyramid has inconsistent level counts");
  }
  config.validate(levels);
  if (targets.seg_target.height() != pyramid.final_seg_scores.height() ||
      targets.seg_target.width() != pyramid.final_seg_scores.width() ||
      targets.edge_target.height() != targets.seg_target.height() ||
      targets.edge_target.width() != targets.seg_target.width()) {
    throw InvalidArgument("targets do not match the pyramid's full resolution");
  }
  std::vector<WeightedMap> maps;
  for (int l = 0; l < levels; ++l) {
    const double w = config.supervision_weight(l);
    if (w == 0.0) continue;
    TargetPair t = level_targets(targets, l);
    if (config.edge_weight > 0.0) {
      maps.push_back({&pyramid.edge_side_scores[l], t, true, w * config.edge_weight});
    }
    maps.push_back({&pyramid.seg_side_scores[l], std::move(t), false, w});
  }
  if (config.final_weight > 0.0) {
    maps.push_back({&pyramid.final_seg_scores, targets, false, config.final_weight});
    if (config.edge_weight > 0.0) {
      maps.push_back(
          {&pyramid.final_edge_scores, targets, true, config.final_weight * config.edge_weight});
    }
  }
  return maps;
}

double map_scale(const WeightedMap& m, const LossConfig& config, double weight_sum) {
  if (config.reduction == LossReduction::sum) return m.weight;
  return m.weight / (static_cast<double>(m.scores->size()) * weight_sum);
}

double weight_sum(const std::vector<WeightedMap>& maps) {
  double s = 0.0;
  for (const auto& m : maps) s += m.weight;
  return s;
}

}  // namespace

double total_loss(const PredictionPyramid& pyramid, const TargetPair& targets,
                  const LossConfig& config) {
  const auto maps = collect_maps(pyramid, targets, config);
  const double wsum = weight_sum(maps);
  double total = 0.0;
  for (const auto& m : maps) {
    const auto& target = m.edge ? m.targets.edge_target : m.targets.seg_target;
    total += map_scale(m, config, wsum) * balanced_bce_from_scores(*m.scores, target);
  }
  return total;
}

LossWithGradient total_loss_with_gradient(const PredictionPyramid& pyramid,
                                          const TargetPair& targets, const LossConfig& config) {
  const auto maps = collect_maps(pyramid, targets, config);
  const double wsum = weight_sum(maps);
  LossWithGradient out{0.0, PyramidGradient::zeros_like(pyramid)};

  auto grad_slot = [&](const Tensor* scores) -> Tensor& {
    if (scores == &pyramid.final_seg_scores) return out.gradient.final_seg_scores;
    if (scores == &pyramid.final_edge_scores) return out.gradient.final_edge_scores;
    for (std::size_t l = 0; l < pyramid.seg_side_scores.size(); ++l) {
      if (scores == &pyramid.seg_side_scores[l]) return out.gradient.seg_side_scores[l];
      if (scores == &pyramid.edge_side_scores[l]) return out.gradient.edge_side_scores[l];
    }
    throw InvariantViolation("score map not part of the pyramid");
  };

  for (const auto& m : maps) {
    const auto& target = m.edge ? m.targets.edge_target : m.targets.seg_target;
    const double scale = map_scale(m, config, wsum);
    out.value += scale * balanced_bce_from_scores(*m.scores, target);
    const Tensor g = balanced_bce_gradient(*m.scores, target);
    auto dst = grad_slot(m.scores).values();
    auto src = g.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
  }
  return out;
}

}  // namespace dropspread
