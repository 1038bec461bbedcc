#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "dropspread/area.hpp"
#include "dropspread/loss.hpp"
#include "dropspread/model.hpp"
#include "dropspread/training.hpp"

namespace dropspread {

/// Key = value run configuration. The first setting must be
/// `config_version = 1`; `#` starts a comment. Unknown keys are errors.
///
///   config_version = 1
///   annotations_dir = data/annotated
///   epochs = 320
///   learning_rate = 1e-4
struct RunConfig {
  std::filesystem::path frames_dir;
  std::filesystem::path annotations_dir;
  std::filesystem::path checkpoint;
  std::filesystem::path output_dir;

  double microns_per_pixel = 0.0;  // 0 = unset
  std::optional<double> concentration_ul_per_l;
  double cmc_ul_per_l = 80.0;

  double fps = 30.0;
  int stride = 1;

  int side = 1024;
  int pyramid_depth = 6;
  int base_channels = 8;

  int epochs = 320;
  double learning_rate = 1e-4;
  LrSchedule lr_schedule = LrSchedule::constant;  // `constant` or `linear_decay`
  int batch_size = 1;
  double train_fraction = 0.8;
  bool augment = true;
  std::uint64_t seed = 0;

  double edge_weight = 1.0;
  double final_weight = 1.0;
  double supervision_weight = 1.0;

  double window_fraction = 0.10;
  double flatness_tol = 0.05;

  /// Applies one `key = value` setting. Throws InvalidArgument on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  /// Throws InvalidArgument when a numeric field is out of range.
  void validate() const;

  ModelConfig model_config() const;
  TrainOptions train_options() const;
  PlateauOptions plateau_options() const;
  OpticsScale optics() const;

  /// Canonical text form (round-trips through parse_run_config).
  std::string to_text() const;
};

inline constexpr int kRunConfigVersion = 1;

/// Throws FormatError on a missing/unsupported version or malformed line.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace dropspread
