#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dropspread/area.hpp"

namespace dropspread {

struct LabelledSeries {
  std::string label;
  std::vector<AreaSample> samples;
};

/// Max area vs concentration (as CMC fraction) with range error bars, PNG.
void plot_max_area_scatter(const std::filesystem::path& path, const std::vector<MaxAreaEstimate>& rows);

/// Overlaid area-vs-time curves, one colour per series, PNG.
void plot_area_curves(const std::filesystem::path& path, const std::vector<LabelledSeries>& series);

}  // namespace dropspread
