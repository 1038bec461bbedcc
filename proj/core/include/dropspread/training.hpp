#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dropspread/loss.hpp"
#include "dropspread/model.hpp"
#include "dropspread/tensor.hpp"

namespace dropspread {

/// Source pixels per grid pixel along each axis (1.0 when never resized).
struct GridScale {
  double x = 1.0;
  double y = 1.0;

  /// Source-pixel area covered by one grid pixel.
  double pixel_area() const { return x * y; }
};

struct AnnotatedSample {
  Tensor image;  // 3 x H x W, [0, 1]
  BinaryMask mask;
  std::string source_id;
  GridScale scale;
};

/// Pairs `<stem>.png` with `<stem>_mask.png` (mask >= 128 is wet), sorted by stem.
/// An empty directory gives an empty list. Throws IoError naming the offending
/// files for an unpaired image/mask or mismatched dimensions.
std::vector<AnnotatedSample> load_annotated(const std::filesystem::path& dir);

struct DatasetSplit {
  std::vector<AnnotatedSample> train;
  std::vector<AnnotatedSample> validation;
};

/// Seeded shuffle, then the first round(fraction * N) samples (clamped to
/// [1, N - 1]) go to training. Requires N >= 2 and 0 < fraction < 1.
DatasetSplit split(std::vector<AnnotatedSample> samples, double train_fraction, std::uint64_t seed);

enum class Transform { identity, rotate90, rotate180, rotate270, mirror_horizontal, mirror_vertical };

inline constexpr std::array<Transform, 6> kAugmentations = {
    Transform::identity,          Transform::rotate90,        Transform::rotate180,
    Transform::rotate270,         Transform::mirror_horizontal, Transform::mirror_vertical};

Tensor apply_transform(const Tensor& image, Transform t);
BinaryMask apply_transform(const BinaryMask& mask, Transform t);

/// The six variants of kAugmentations, image and mask transformed together.
std::vector<AnnotatedSample> augment(const AnnotatedSample& sample);
std::vector<AnnotatedSample> augment_all(std::span<const AnnotatedSample> samples);

/// Throws InvalidArgument unless side is a power of two.
void check_grid_side(int side);

/// Image bilinear, mask nearest-neighbour, to side x side. The returned
/// sample's scale is multiplied by the resize factors.
AnnotatedSample resize_to_grid(const AnnotatedSample& sample, int side = 1024);

enum class LrSchedule {
  constant,
  /// lr * (1 - (epoch - 1) / epochs): full rate in epoch 1, lr / epochs in the last.
  linear_decay,
};

struct TrainOptions {
  int epochs = 10;
  double learning_rate = 1e-4;
  LrSchedule lr_schedule = LrSchedule::constant;
  std::uint64_t seed = 0;
  int batch_size = 1;
  LossConfig loss;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  int epochs = 0;
  std::uint64_t seed = 0;
  TrainOptions options;
  /// 1-based epoch of the lowest validation loss; 0 when no epoch ran.
  int best_epoch = 0;
};

struct TrainResult {
  ModelParameters params;       // after the last epoch
  ModelParameters best_params;  // lowest validation loss
  TrainHistory history;
};

/// Step size used during `epoch` (1-based).
double learning_rate_at(const TrainOptions& options, int epoch);

/// Adam over shuffled mini-batches. Train loss of an epoch is the mean of
/// per-sample losses seen during that epoch; validation loss is evaluated
/// after the epoch (on the training set when `validation` is empty).
/// Throws TrainingDiverged with the epoch index on a non-finite loss.
TrainResult train(ModelParameters params, std::span<const AnnotatedSample> training,
                  std::span<const AnnotatedSample> validation, const TrainOptions& options);

/// Mean total_loss over `samples`.
double evaluate_loss(const ModelParameters& params, std::span<const AnnotatedSample> samples,
                     const LossConfig& config);

/// Fraction of pixels where predict_mask agrees with the annotation.
double pixel_accuracy(const ModelParameters& params, std::span<const AnnotatedSample> samples);

}  // namespace dropspread
