#include "dropspread/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "dropspread/errors.hpp"
#include "dropspread/image_io.hpp"

namespace dropspread {

namespace fs = std::filesystem;

std::vector<AnnotatedSample> load_annotated(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("annotation directory '" + dir.string() + "' not found");
  constexpr std::string_view kMaskSuffix = "_mask";
  std::map<std::string, fs::path> images;
  std::map<std::string, fs::path> masks;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
    const std::string stem = entry.path().stem().string();
    if (stem.ends_with(kMaskSuffix)) {
      masks[stem.substr(0, stem.size() - kMaskSuffix.size())] = entry.path();
    } else {
      images[stem] = entry.path();
    }
  }
  for (const auto& [stem, path] : masks) {
    if (!images.contains(stem)) {
      throw IoError("mask '" + path.filename().string() + "' has no image '" + stem + ".png'");
    }
  }
  std::vector<AnnotatedSample> samples;
  for (const auto& [stem, path] : images) {
    const auto it = masks.find(stem);
    if (it == masks.end()) {
      throw IoError("image '" + path.filename().string() + "' has no mask '" + stem +
                    "_mask.png'");
    }
    AnnotatedSample s;
    s.image = read_image(path);
    s.mask = read_mask(it->second);
    if (s.mask.height() != s.image.height() || s.mask.width() != s.image.width()) {
      throw IoError("dimension mismatch: '" + path.filename().string() + "' is " +
                    std::to_string(s.image.width()) + "x" + std::to_string(s.image.height()) +
                    " but '" + it->second.filename().string() + "' is " +
                    std::to_string(s.mask.width()) + "x" + std::to_string(s.mask.height()));
    }
    s.source_id = stem;
    samples.push_back(std::move(s));
  }
  return samples;
}

namespace {

void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& engine) {
  // Explicit Fisher-Yates: std::shuffle's draw sequence is implementation-defined.
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = engine() % i;
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace

DatasetSplit split(std::vector<AnnotatedSample> samples, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("train fraction must lie strictly between 0 and 1");
  }
  const std::size_t n = samples.size();
  if (n < 2) throw InvalidArgument("need at least 2 samples to split, got " + std::to_string(n));
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 engine(seed);
  shuffle_indices(idx, engine);
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n))), 1, n - 1);
  DatasetSplit out;
  for (std::size_t k = 0; k < n; ++k) {
    auto& dst = k < n_train ? out.train : out.validation;
    dst.push_back(std::move(samples[idx[k]]));
  }
  return out;
}

namespace {

// Source coordinate of output pixel (y, x) for a transform of an h x w input.
template <typename Fn>
void for_each_mapped(int h, int w, Transform t, Fn&& fn) {
  const bool swap = t == Transform::rotate90 || t == Transform::rotate270;
  const int oh = swap ? w : h;
  const int ow = swap ? h : w;
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      int sy = y;
      int sx = x;
      switch (t) {
        case Transform::identity: break;
        case Transform::rotate90:  // counter-clockwise
          sy = x;
          sx = w - 1 - y;
          break;
        case Transform::rotate180:
          sy = h - 1 - y;
          sx = w - 1 - x;
          break;
        case Transform::rotate270:
          sy = h - 1 - x;
          sx = y;
          break;
        case Transform::mirror_horizontal: sx = w - 1 - x; break;
        case Transform::mirror_vertical: sy = h - 1 - y; break;
      }
      fn(y, x, sy, sx);
    }
  }
}

bool swaps_axes(Transform t) { return t == Transform::rotate90 || t == Transform::rotate270; }

}  // namespace

Tensor apply_transform(const Tensor& image, Transform t) {
  const int h = image.height();
  const int w = image.width();
  Tensor out(image.channels(), swaps_axes(t) ? w : h, swaps_axes(t) ? h : w);
  for (int c = 0; c < image.channels(); ++c) {
    for_each_mapped(h, w, t, [&](int y, int x, int sy, int sx) { out.at(c, y, x) = image.at(c, sy, sx); });
  }
  return out;
}

BinaryMask apply_transform(const BinaryMask& mask, Transform t) {
  const int h = mask.height();
  const int w = mask.width();
  BinaryMask out(swaps_axes(t) ? w : h, swaps_axes(t) ? h : w);
  for_each_mapped(h, w, t, [&](int y, int x, int sy, int sx) { out.set(y, x, mask.at(sy, sx) != 0); });
  return out;
}

std::vector<AnnotatedSample> augment(const AnnotatedSample& sample) {
  static constexpr const char* kNames[] = {"id", "r90", "r180", "r270", "mh", "mv"};
  std::vector<AnnotatedSample> out;
  out.reserve(kAugmentations.size());
  for (std::size_t i = 0; i < kAugmentations.size(); ++i) {
    const Transform t = kAugmentations[i];
    AnnotatedSample s;
    s.image = apply_transform(sample.image, t);
    s.mask = apply_transform(sample.mask, t);
    s.source_id = sample.source_id + "#" + kNames[i];
    s.scale = swaps_axes(t) ? GridScale{sample.scale.y, sample.scale.x} : sample.scale;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<AnnotatedSample> augment_all(std::span<const AnnotatedSample> samples) {
  std::vector<AnnotatedSample> out;
  out.reserve(samples.size() * kAugmentations.size());
  for (const auto& s : samples) {
    auto v = augment(s);
    std::move(v.begin(), v.end(), std::back_inserter(out));
  }
  return out;
}

void check_grid_side(int side) {
  if (side < 1 || (side & (side - 1)) != 0) {
    throw InvalidArgument("grid side " + std::to_string(side) + " is not a power of two");
  }
}

AnnotatedSample resize_to_grid(const AnnotatedSample& sample, int side) {
  check_grid_side(side);
  AnnotatedSample out;
  out.image = resize_bilinear(sample.image, side, side);
  out.mask = resize_nearest(sample.mask, side, side);
  out.source_id = sample.source_id;
  out.scale.x = sample.scale.x * static_cast<double>(sample.image.width()) / side;
  out.scale.y = sample.scale.y * static_cast<double>(sample.image.height()) / side;
  return out;
}

namespace {

// Adam with bias correction.
class Adam {
 public:
  Adam(std::size_t n, double lr) : lr_(lr), m_(n, 0.0), v_(n, 0.0) {}

  void set_learning_rate(double lr) { lr_ = lr; }

  void step(std::span<double> params, std::span<const double> grad) {
    constexpr double b1 = 0.9;
    constexpr double b2 = 0.999;
    constexpr double eps = 1e-8;
    ++t_;
    const double c1 = 1.0 - std::pow(b1, t_);
    const double c2 = 1.0 - std::pow(b2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
      v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps);
    }
  }

 private:
  double lr_;
  int t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

TargetPair targets_for(const AnnotatedSample& s) { return TargetPair::from_mask(s.mask); }

}  // namespace

double learning_rate_at(const TrainOptions& options, int epoch) {
  if (options.lr_schedule == LrSchedule::linear_decay && options.epochs > 0) {
    return options.learning_rate * (1.0 - static_cast<double>(epoch - 1) / options.epochs);
  }
  return options.learning_rate;
}

double evaluate_loss(const ModelParameters& params, std::span<const AnnotatedSample> samples,
                     const LossConfig& config) {
  if (samples.empty()) throw InvalidArgument("evaluate_loss on an empty set");
  double total = 0.0;
  for (const auto& s : samples) total += total_loss(forward(params, s.image), targets_for(s), config);
  return total / static_cast<double>(samples.size());
}

double pixel_accuracy(const ModelParameters& params, std::span<const AnnotatedSample> samples) {
  std::size_t agree = 0;
  std::size_t total = 0;
  for (const auto& s : samples) {
    const BinaryMask predicted = predict_mask(params, s.image);
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      agree += predicted.labels()[i] == s.mask.labels()[i];
    }
    total += predicted.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(agree) / static_cast<double>(total);
}

TrainResult train(ModelParameters params, std::span<const AnnotatedSample> training,
                  std::span<const AnnotatedSample> validation, const TrainOptions& options) {
  if (training.empty()) throw InvalidArgument("training set is empty");
  if (options.epochs < 0) throw InvalidArgument("epochs must be >= 0");
  if (options.batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (!(options.learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  options.loss.validate(params.config().level_count());
  for (const auto& s : training) check_input(params.config(), s.image);
  const auto val_set = validation.empty() ? training : validation;
  for (const auto& s : val_set) check_input(params.config(), s.image);

  TrainResult result{params, params, {}};
  auto& history = result.history;
  history.epochs = options.epochs;
  history.seed = options.seed;
  history.options = options;

  Adam adam(params.size(), options.learning_rate);
  std::mt19937_64 engine(options.seed);
  std::vector<std::size_t> order(training.size());
  std::vector<double> grad(params.size());
  double best_val = std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle_indices(order, engine);
    adam.set_learning_rate(learning_rate_at(options, epoch));

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const auto& sample = training[order[k]];
        ForwardTracePtr trace;
        const PredictionPyramid pyramid = forward_with_trace(params, sample.image, trace);
        auto lg = total_loss_with_gradient(pyramid, targets_for(sample), options.loss);
        if (!std::isfinite(lg.value)) {
          throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch), epoch);
        }
        epoch_loss += lg.value;
        backward(params, *trace, lg.gradient, grad);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (double& g : grad) g *= inv;
      adam.step(params.values(), grad);
    }
    if (!params.all_finite()) {
      throw TrainingDiverged("non-finite parameters after epoch " + std::to_string(epoch), epoch);
    }

    const double train_loss = epoch_loss / static_cast<double>(training.size());
    const double val_loss = evaluate_loss(params, val_set, options.loss);
    if (!std::isfinite(val_loss)) {
      throw TrainingDiverged("non-finite validation loss at epoch " + std::to_string(epoch), epoch);
    }
    history.train_loss.push_back(train_loss);
    history.validation_loss.push_back(val_loss);
    if (val_loss < best_val) {
      best_val = val_loss;
      history.best_epoch = epoch;
      result.best_params = params;
    }
  }
  result.params = std::move(params);
  return result;
}

}  // namespace dropspread
