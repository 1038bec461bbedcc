#include "dropspread/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "dropspread/errors.hpp"

namespace dropspread {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T v{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size() || value.empty()) {
    throw InvalidArgument("config key '" + key + "': '" + value + "' is not a valid number");
  }
  return v;
}

LrSchedule parse_schedule(const std::string& key, const std::string& value) {
  if (value == "constant") return LrSchedule::constant;
  if (value == "linear_decay") return LrSchedule::linear_decay;
  throw InvalidArgument("config key '" + key + "': '" + value + "' is not constant or linear_decay");
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw InvalidArgument("config key '" + key + "': '" + value + "' is not a boolean");
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "frames_dir") frames_dir = value;
  else if (key == "annotations_dir") annotations_dir = value;
  else if (key == "checkpoint") checkpoint = value;
  else if (key == "output_dir") output_dir = value;
  else if (key == "microns_per_pixel") microns_per_pixel = parse_number<double>(key, value);
  else if (key == "concentration_ul_per_l") concentration_ul_per_l = parse_number<double>(key, value);
  else if (key == "cmc_ul_per_l") cmc_ul_per_l = parse_number<double>(key, value);
  else if (key == "fps") fps = parse_number<double>(key, value);
  else if (key == "stride") stride = parse_number<int>(key, value);
  else if (key == "side") side = parse_number<int>(key, value);
  else if (key == "pyramid_depth") pyramid_depth = parse_number<int>(key, value);
  else if (key == "base_channels") base_channels = parse_number<int>(key, value);
  else if (key == "epochs") epochs = parse_number<int>(key, value);
  else if (key == "learning_rate") learning_rate = parse_number<double>(key, value);
  else if (key == "lr_schedule") lr_schedule = parse_schedule(key, value);
  else if (key == "batch_size") batch_size = parse_number<int>(key, value);
  else if (key == "train_fraction") train_fraction = parse_number<double>(key, value);
  else if (key == "augment") augment = parse_bool(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "edge_weight") edge_weight = parse_number<double>(key, value);
  else if (key == "final_weight") final_weight = parse_number<double>(key, value);
  else if (key == "supervision_weight") supervision_weight = parse_number<double>(key, value);
  else if (key == "window_fraction") window_fraction = parse_number<double>(key, value);
  else if (key == "flatness_tol") flatness_tol = parse_number<double>(key, value);
  else throw InvalidArgument("unknown config key '" + key + "'");
}

void RunConfig::validate() const {
  model_config().validate();
  check_grid_side(side);
  if (side % (1 << pyramid_depth) != 0) {
    throw InvalidArgument(fmt::format("side {} is not divisible by 2^pyramid_depth = {}", side,
                                      1 << pyramid_depth));
  }
  if (!(fps > 0.0)) throw InvalidArgument("fps must be positive");
  if (stride < 1) throw InvalidArgument("stride must be >= 1");
  if (epochs < 0) throw InvalidArgument("epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("train_fraction must lie strictly between 0 and 1");
  }
  if (!(cmc_ul_per_l > 0.0)) throw InvalidArgument("cmc_ul_per_l must be positive");
  if (microns_per_pixel < 0.0) throw InvalidArgument("microns_per_pixel must be positive");
  train_options().loss.validate(pyramid_depth + 1);
  const PlateauOptions p = plateau_options();
  if (!(p.window_fraction > 0.0 && p.window_fraction <= 1.0)) {
    throw InvalidArgument("window_fraction must lie in (0, 1]");
  }
  if (!(p.flatness_tol >= 0.0 && p.flatness_tol < 1.0)) {
    throw InvalidArgument("flatness_tol must lie in [0, 1)");
  }
}

ModelConfig RunConfig::model_config() const {
  return ModelConfig{pyramid_depth, base_channels, 3};
}

TrainOptions RunConfig::train_options() const {
  TrainOptions o;
  o.epochs = epochs;
  o.learning_rate = learning_rate;
  o.lr_schedule = lr_schedule;
  o.seed = seed;
  o.batch_size = batch_size;
  o.loss.edge_weight = edge_weight;
  o.loss.final_weight = final_weight;
  o.loss.supervision_weights.assign(static_cast<std::size_t>(pyramid_depth + 1), supervision_weight);
  o.loss.reduction = LossReduction::mean;
  return o;
}

PlateauOptions RunConfig::plateau_options() const { return {window_fraction, flatness_tol}; }

OpticsScale RunConfig::optics() const {
  if (!(microns_per_pixel > 0.0)) {
    throw InvalidArgument("microns_per_pixel is required (set it in the config or pass --microns-per-pixel)");
  }
  return {microns_per_pixel};
}

std::string RunConfig::to_text() const {
  std::string s = fmt::format("config_version = {}\n", kRunConfigVersion);
  auto put = [&s](const char* key, const auto& value) { s += fmt::format("{} = {}\n", key, value); };
  if (!frames_dir.empty()) put("frames_dir", frames_dir.string());
  if (!annotations_dir.empty()) put("annotations_dir", annotations_dir.string());
  if (!checkpoint.empty()) put("checkpoint", checkpoint.string());
  if (!output_dir.empty()) put("output_dir", output_dir.string());
  if (microns_per_pixel > 0.0) put("microns_per_pixel", microns_per_pixel);
  if (concentration_ul_per_l) put("concentration_ul_per_l", *concentration_ul_per_l);
  put("cmc_ul_per_l", cmc_ul_per_l);
  put("fps", fps);
  put("stride", stride);
  put("side", side);
  put("pyramid_depth", pyramid_depth);
  put("base_channels", base_channels);
  put("epochs", epochs);
  put("learning_rate", learning_rate);
  put("lr_schedule", lr_schedule == LrSchedule::linear_decay ? "linear_decay" : "constant");
  put("batch_size", batch_size);
  put("train_fraction", train_fraction);
  put("augment", augment ? "true" : "false");
  put("seed", seed);
  put("edge_weight", edge_weight);
  put("final_weight", final_weight);
  put("supervision_weight", supervision_weight);
  put("window_fraction", window_fraction);
  put("flatness_tol", flatness_tol);
  return s;
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int number = 0;
  bool version_seen = false;
  while (std::getline(ss, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("config line " + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!version_seen) {
      if (key != "config_version") {
        throw FormatError("config must start with 'config_version = " +
                          std::to_string(kRunConfigVersion) + "'");
      }
      if (value != std::to_string(kRunConfigVersion)) {
        throw FormatError("unsupported config_version " + value);
      }
      version_seen = true;
      continue;
    }
    try {
      cfg.set(key, value);
    } catch (const InvalidArgument& e) {
      throw FormatError("config line " + std::to_string(number) + ": " + e.what());
    }
  }
  if (!version_seen) throw FormatError("config is missing 'config_version'");
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_run_config(ss.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace dropspread
