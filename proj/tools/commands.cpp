#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "dropspread/area.hpp"
#include "dropspread/checkpoint.hpp"
#include "dropspread/cmc.hpp"
#include "dropspread/csv_io.hpp"
#include "dropspread/errors.hpp"
#include "dropspread/image_io.hpp"
#include "dropspread/ingestion.hpp"
#include "dropspread/plot.hpp"
#include "dropspread/run_config.hpp"
#include "dropspread/training.hpp"

namespace dropspread::cli {
namespace {

namespace fs = std::filesystem;

// Flags that mirror a RunConfig key. Values are kept as text and applied
// through RunConfig::set so flags and config files parse identically.
class Overrides {
 public:
  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto* opt = app->add_option(flag, values_[key], help);
    options_.emplace_back(opt, key);
  }

  void apply(RunConfig& cfg) const {
    for (const auto& [opt, key] : options_) {
      if (opt->count() > 0) cfg.set(key, values_.at(key));
    }
  }

 private:
  std::map<std::string, std::string> values_;
  std::vector<std::pair<CLI::Option*, std::string>> options_;
};

// Removes registered outputs unless commit() was called.
class OutputGuard {
 public:
  OutputGuard() = default;
  OutputGuard(const OutputGuard&) = delete;
  OutputGuard& operator=(const OutputGuard&) = delete;
  ~OutputGuard() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& p : paths_) fs::remove_all(p, ec);
  }

  void file(const fs::path& p) { paths_.push_back(p); }
  /// Registers a directory only if it does not exist yet.
  void new_directory(const fs::path& p) {
    if (!fs::exists(p)) paths_.push_back(p);
  }
  void commit() { committed_ = true; }

 private:
  std::vector<fs::path> paths_;
  bool committed_ = false;
};

struct Context {
  std::string config_path;
  Overrides overrides;

  RunConfig config() const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    overrides.apply(cfg);
    cfg.validate();
    return cfg;
  }
};

void require_path(const fs::path& p, const char* what) {
  if (p.empty()) throw InvalidArgument(std::string(what) + " is required");
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

fs::path default_history_path(const fs::path& checkpoint) {
  fs::path p = checkpoint;
  p.replace_extension(".history.csv");
  return p;
}

int cmd_extract(const fs::path& video, const fs::path& out_dir, int stride, double fps,
                const std::string& decoder, const std::string& ffmpeg, std::ostream& out) {
  ExtractOptions opts;
  opts.stride = stride;
  if (fps > 0.0) opts.fps = fps;
  opts.decoder = decoder == "ffmpeg" ? Decoder::ffmpeg : Decoder::opencv;
  opts.ffmpeg_executable = ffmpeg;
  const auto records = extract_frames(video, out_dir, opts);
  out << fmt::format("extracted {} frames to {}\n", records.size(), out_dir.string());
  return 0;
}

int cmd_train(const RunConfig& cfg, fs::path history_path, std::ostream& out) {
  require_path(cfg.annotations_dir, "annotations_dir (--annotations)");
  require_path(cfg.checkpoint, "checkpoint (--checkpoint)");
  if (history_path.empty()) history_path = default_history_path(cfg.checkpoint);

  auto samples = load_annotated(cfg.annotations_dir);
  if (samples.empty()) {
    throw InvalidArgument("no annotated samples in '" + cfg.annotations_dir.string() + "'");
  }
  for (auto& s : samples) s = resize_to_grid(s, cfg.side);
  auto parts = split(std::move(samples), cfg.train_fraction, cfg.seed);
  const auto train_set = cfg.augment ? augment_all(parts.train) : parts.train;

  const TrainOptions options = cfg.train_options();
  const auto result = train(build_model(cfg.model_config(), cfg.seed), train_set, parts.validation, options);

  Checkpoint ckpt{result.best_params, cfg.side, {}};
  ckpt.metadata["seed"] = std::to_string(cfg.seed);
  ckpt.metadata["epochs"] = std::to_string(cfg.epochs);
  ckpt.metadata["best_epoch"] = std::to_string(result.history.best_epoch);
  ckpt.metadata["train_samples"] = std::to_string(train_set.size());
  ckpt.metadata["validation_samples"] = std::to_string(parts.validation.size());
  if (!result.history.train_loss.empty()) {
    ckpt.metadata["final_train_loss"] = fmt::format("{}", result.history.train_loss.back());
    ckpt.metadata["final_validation_loss"] = fmt::format("{}", result.history.validation_loss.back());
  }

  OutputGuard guard;
  ensure_parent(cfg.checkpoint);
  ensure_parent(history_path);
  guard.file(cfg.checkpoint);
  guard.file(history_path);
  save_checkpoint(cfg.checkpoint, ckpt);
  write_history_csv(history_path, result.history);
  guard.commit();

  out << fmt::format("trained {} epochs on {} samples ({} validation); best epoch {}\n", cfg.epochs,
                     train_set.size(), parts.validation.size(), result.history.best_epoch);
  out << fmt::format("checkpoint: {}\nhistory: {}\n", cfg.checkpoint.string(), history_path.string());
  return 0;
}

int cmd_predict(const RunConfig& cfg, const fs::path& image_path, const fs::path& out_path,
                std::ostream& out) {
  require_path(cfg.checkpoint, "checkpoint (--checkpoint)");
  const Checkpoint ckpt = load_checkpoint(cfg.checkpoint);
  const Tensor image = read_image(image_path);
  const Tensor resized = resize_bilinear(image, ckpt.grid_side, ckpt.grid_side);
  const BinaryMask grid_mask = predict_mask(ckpt.params, resized);
  const BinaryMask mask = resize_nearest(grid_mask, image.height(), image.width());

  OutputGuard guard;
  ensure_parent(out_path);
  guard.file(out_path);
  write_mask(out_path, mask);
  guard.commit();
  out << fmt::format("{}: {} wet pixels of {}\n", out_path.string(), count_wet_pixels(mask), mask.size());
  return 0;
}

int cmd_measure(const RunConfig& cfg, const fs::path& series_path, const fs::path& overlay_dir,
                std::ostream& out) {
  require_path(cfg.frames_dir, "frames_dir (--frames)");
  require_path(cfg.checkpoint, "checkpoint (--checkpoint)");
  const OpticsScale optics = cfg.optics();
  const Checkpoint ckpt = load_checkpoint(cfg.checkpoint);
  const auto frames = load_frames(cfg.frames_dir, cfg.fps, cfg.stride);

  OutputGuard guard;
  MeasureOptions opts;
  opts.grid_side = ckpt.grid_side;
  if (!overlay_dir.empty()) {
    guard.new_directory(overlay_dir);
    opts.overlay_dir = overlay_dir;
  }
  SeriesFile series;
  series.concentration_ul_per_l = cfg.concentration_ul_per_l;
  series.samples = measure_series(frames, ckpt.params, optics, opts);

  ensure_parent(series_path);
  guard.file(series_path);
  write_series_csv(series_path, series);
  guard.commit();
  out << fmt::format("measured {} frames -> {}\n", series.samples.size(), series_path.string());
  return 0;
}

int cmd_summarize(const RunConfig& cfg, const std::vector<fs::path>& inputs, const fs::path& summary_path,
                  fs::path plot_dir, std::ostream& out) {
  std::vector<MaxAreaEstimate> rows;
  std::vector<LabelledSeries> curves;
  for (const auto& path : inputs) {
    const SeriesFile series = read_series_csv(path);
    if (!series.concentration_ul_per_l) {
      throw FormatError(path.string() + ": missing '# concentration_ul_per_l = <value>' metadata");
    }
    const double c = *series.concentration_ul_per_l;
    MaxAreaEstimate est;
    try {
      est = estimate_max_area(series.samples, cfg.plateau_options());
    } catch (const Error& e) {
      throw Error(path.string() + ": " + e.what());
    }
    est.concentration_ul_per_l = c;
    est.cmc_fraction = cmc_fraction(c, cfg.cmc_ul_per_l);
    rows.push_back(est);
    curves.push_back({fmt::format("{} ul/l", c), series.samples});
  }
  if (plot_dir.empty()) plot_dir = summary_path.has_parent_path() ? summary_path.parent_path() : fs::path(".");

  OutputGuard guard;
  ensure_parent(summary_path);
  guard.new_directory(plot_dir);
  fs::create_directories(plot_dir);
  const fs::path scatter = plot_dir / "max_area_vs_cmc_fraction.png";
  const fs::path curves_png = plot_dir / "area_vs_time.png";
  guard.file(summary_path);
  guard.file(scatter);
  guard.file(curves_png);
  write_summary_csv(summary_path, rows);
  plot_max_area_scatter(scatter, rows);
  plot_area_curves(curves_png, curves);
  guard.commit();

  for (const auto& r : rows) {
    out << fmt::format("{} ul/l ({:.4g} x CMC): max area {:.6g} +- {:.3g} mm^2{}\n", r.concentration_ul_per_l,
                       r.cmc_fraction, r.max_area_mm2, r.error_mm2, r.no_plateau ? " [no plateau]" : "");
  }
  return 0;
}

int cmd_cmc_fit(const fs::path& input, const fs::path& report_path, std::ostream& out) {
  const auto points = read_tensiometry_csv(input);
  const CmcResult result = fit_two_regimes(points);
  const std::string report = format_cmc_report(result);
  if (!report_path.empty()) {
    OutputGuard guard;
    ensure_parent(report_path);
    guard.file(report_path);
    std::ofstream f(report_path, std::ios::binary | std::ios::trunc);
    f << report;
    f.close();
    if (!f) throw IoError("cannot write '" + report_path.string() + "'");
    guard.commit();
  }
  out << report;
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Droplet spreading segmentation and surfactant analysis", "dropspread"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "dropspread 0.1.0");

  // extract-frames
  auto* extract = app.add_subcommand("extract-frames", "Decode a video into frame_%06d.png + frames.csv");
  std::string video, frames_out, decoder = "opencv", ffmpeg = "ffmpeg";
  int extract_stride = 1;
  double extract_fps = 0.0;
  extract->add_option("--video", video, "Input video file")->required();
  extract->add_option("--out", frames_out, "Output frame directory")->required();
  extract->add_option("--stride", extract_stride, "Keep every N-th frame")->check(CLI::PositiveNumber);
  extract->add_option("--fps", extract_fps, "Frame rate for timestamps (default: from the container)")
      ->check(CLI::PositiveNumber);
  extract->add_option("--decoder", decoder, "opencv or ffmpeg")->check(CLI::IsMember({"opencv", "ffmpeg"}));
  extract->add_option("--ffmpeg", ffmpeg, "ffmpeg executable for --decoder ffmpeg");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the segmentation network on annotated frames");
  Context train_ctx;
  std::string history;
  train_cmd->add_option("--config", train_ctx.config_path, "Run config file");
  train_ctx.overrides.add(train_cmd, "--annotations", "annotations_dir", "Directory of <stem>.png + <stem>_mask.png");
  train_ctx.overrides.add(train_cmd, "--checkpoint", "checkpoint", "Output checkpoint path");
  train_ctx.overrides.add(train_cmd, "--epochs", "epochs", "Training epochs");
  train_ctx.overrides.add(train_cmd, "--lr", "learning_rate", "Adam learning rate");
  train_ctx.overrides.add(train_cmd, "--lr-schedule", "lr_schedule", "constant or linear_decay");
  train_ctx.overrides.add(train_cmd, "--batch-size", "batch_size", "Samples per optimisation step");
  train_ctx.overrides.add(train_cmd, "--seed", "seed", "Seed for init, split and shuffling");
  train_ctx.overrides.add(train_cmd, "--side", "side", "Training grid side (power of two)");
  train_ctx.overrides.add(train_cmd, "--depth", "pyramid_depth", "Pyramid depth");
  train_ctx.overrides.add(train_cmd, "--base-channels", "base_channels", "Full-resolution feature width");
  train_ctx.overrides.add(train_cmd, "--train-fraction", "train_fraction", "Training share of the samples");
  train_ctx.overrides.add(train_cmd, "--augment", "augment", "Six-fold rotation/mirror augmentation (true/false)");
  train_ctx.overrides.add(train_cmd, "--edge-weight", "edge_weight", "Edge-head loss weight");
  train_cmd->add_option("--history", history, "Loss history CSV (default: <checkpoint>.history.csv)");

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Segment one image into a wet/dry mask");
  Context predict_ctx;
  std::string image_path, mask_out;
  predict_cmd->add_option("--config", predict_ctx.config_path, "Run config file");
  predict_ctx.overrides.add(predict_cmd, "--checkpoint", "checkpoint", "Trained checkpoint");
  predict_cmd->add_option("--image", image_path, "Input image")->required();
  predict_cmd->add_option("--out", mask_out, "Output mask PNG (0 dry, 255 wet)")->required();

  // measure
  auto* measure_cmd = app.add_subcommand("measure", "Measure the wet area of every frame");
  Context measure_ctx;
  std::string series_out, overlay_dir;
  measure_cmd->add_option("--config", measure_ctx.config_path, "Run config file");
  measure_ctx.overrides.add(measure_cmd, "--checkpoint", "checkpoint", "Trained checkpoint");
  measure_ctx.overrides.add(measure_cmd, "--frames", "frames_dir", "Frame directory");
  measure_ctx.overrides.add(measure_cmd, "--microns-per-pixel", "microns_per_pixel", "Object-plane pixel size");
  measure_ctx.overrides.add(measure_cmd, "--concentration", "concentration_ul_per_l", "Surfactant concentration, ul/l");
  measure_ctx.overrides.add(measure_cmd, "--fps", "fps", "Frame rate when frames.csv is absent");
  measure_ctx.overrides.add(measure_cmd, "--stride", "stride", "Measure every N-th frame");
  measure_cmd->add_option("--out", series_out, "Series CSV")->required();
  measure_cmd->add_option("--overlay-dir", overlay_dir, "Write side-by-side frame|mask images here");

  // summarize
  auto* summarize_cmd = app.add_subcommand("summarize", "Plateau maximum of each series, plus plots");
  Context summarize_ctx;
  std::vector<std::string> series_in;
  std::string summary_out, plot_dir;
  summarize_cmd->add_option("--config", summarize_ctx.config_path, "Run config file");
  summarize_ctx.overrides.add(summarize_cmd, "--cmc", "cmc_ul_per_l", "Critical micelle concentration, ul/l");
  summarize_ctx.overrides.add(summarize_cmd, "--window-fraction", "window_fraction", "Minimum plateau window share");
  summarize_ctx.overrides.add(summarize_cmd, "--flatness-tol", "flatness_tol", "Relative plateau flatness");
  summarize_cmd->add_option("series", series_in, "Series CSV files")->required()->check(CLI::ExistingFile);
  summarize_cmd->add_option("--out", summary_out, "Summary CSV")->required();
  summarize_cmd->add_option("--plot-dir", plot_dir, "Directory for PNG plots (default: next to --out)");

  // cmc-fit
  auto* cmc_cmd = app.add_subcommand("cmc-fit", "Fit the CMC from tensiometry data");
  std::string tensiometry, report_out;
  cmc_cmd->add_option("input", tensiometry, "CSV concentration_ul_per_l,surface_tension_mN_per_m")->required();
  cmc_cmd->add_option("--out", report_out, "Also write the report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*extract) return cmd_extract(video, frames_out, extract_stride, extract_fps, decoder, ffmpeg, out);
    if (*train_cmd) return cmd_train(train_ctx.config(), history, out);
    if (*predict_cmd) return cmd_predict(predict_ctx.config(), image_path, mask_out, out);
    if (*measure_cmd) return cmd_measure(measure_ctx.config(), series_out, overlay_dir, out);
    if (*summarize_cmd) {
      std::vector<fs::path> paths(series_in.begin(), series_in.end());
      return cmd_summarize(summarize_ctx.config(), paths, summary_out, plot_dir, out);
    }
    if (*cmc_cmd) return cmd_cmc_fit(tensiometry, report_out, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace dropspread::cli
