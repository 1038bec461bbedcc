#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "dropspread/area.hpp"
#include "dropspread/cmc.hpp"
#include "dropspread/training.hpp"

namespace dropspread {

/// Series file: optional `# concentration_ul_per_l = <value>` line, then
/// `frame_index,timestamp_s,wet_pixels,area_mm2`.
struct SeriesFile {
  std::optional<double> concentration_ul_per_l;
  std::vector<AreaSample> samples;
};

void write_series_csv(const std::filesystem::path& path, const SeriesFile& series);
/// Throws FormatError (file:line) on a malformed file.
SeriesFile read_series_csv(const std::filesystem::path& path);

/// `concentration_ul_per_l,cmc_fraction,max_area_mm2,error_mm2,no_plateau`, no_plateau as 0/1.
void write_summary_csv(const std::filesystem::path& path, const std::vector<MaxAreaEstimate>& rows);
std::vector<MaxAreaEstimate> read_summary_csv(const std::filesystem::path& path);

/// `concentration_ul_per_l,surface_tension_mN_per_m`.
std::vector<TensiometryPoint> read_tensiometry_csv(const std::filesystem::path& path);
void write_tensiometry_csv(const std::filesystem::path& path, const std::vector<TensiometryPoint>& points);

/// `epoch,train_loss,validation_loss`.
void write_history_csv(const std::filesystem::path& path, const TrainHistory& history);

}  // namespace dropspread
