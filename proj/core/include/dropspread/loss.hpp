#pragma once

#include <span>
#include <vector>

#include "dropspread/model.hpp"
#include "dropspread/tensor.hpp"

namespace dropspread {

enum class LossReduction {
  /// Weighted sum of per-map balanced BCE sums.
  sum,
  /// Each map's balanced BCE divided by its pixel count; total divided by the weight sum.
  mean,
};

/// Weights of the deep-supervision aggregate.
///
/// Map weights: seg side l -> supervision(l), edge side l -> edge_weight * supervision(l),
/// final seg -> final_weight, final edge -> edge_weight * final_weight.
struct LossConfig {
  double edge_weight = 1.0;
  double final_weight = 1.0;
  /// One per pyramid level; empty means 1.0 for every level.
  std::vector<double> supervision_weights;
  LossReduction reduction = LossReduction::mean;

  double supervision_weight(int level) const;
  /// Throws InvalidArgument on negative weights, wrong length, or all-zero weights.
  void validate(int level_count) const;
};

struct TargetPair {
  BinaryMask seg_target;
  BinaryMask edge_target;

  static TargetPair from_mask(BinaryMask seg);
};

/// |Y0| / |Y|: the fraction of 0-labelled pixels. Throws InvalidArgument on an empty mask.
double beta(const BinaryMask& target);

/// Plain binary cross entropy (summed, non-negative). Probabilities are clamped
/// to [1e-12, 1 - 1e-12].
double bce(std::span<const double> probabilities, const BinaryMask& target);

/// -beta * sum_{Y1} log sigmoid(s) - (1 - beta) * sum_{Y0} log(1 - sigmoid(s)), evaluated
/// with log1p/exp so no probability is ever materialised.
double balanced_bce_from_scores(const Tensor& scores, const BinaryMask& target);

/// d balanced_bce_from_scores / d score, same shape as `scores`.
Tensor balanced_bce_gradient(const Tensor& scores, const BinaryMask& target);

/// A pixel is an edge iff one of its 4-neighbours carries the opposite label.
BinaryMask edge_targets_from_mask(const BinaryMask& seg_target);

/// Targets used at pyramid level l: seg downsampled by nearest neighbour,
/// edges recomputed from that downsampled seg (level 0 uses targets.edge_target).
TargetPair level_targets(const TargetPair& targets, int level);

double total_loss(const PredictionPyramid& pyramid, const TargetPair& targets,
                  const LossConfig& config);

struct LossWithGradient {
  double value = 0.0;
  PyramidGradient gradient;
};

LossWithGradient total_loss_with_gradient(const PredictionPyramid& pyramid,
                                          const TargetPair& targets, const LossConfig& config);

}  // namespace dropspread
