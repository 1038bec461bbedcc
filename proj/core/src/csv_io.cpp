#include "dropspread/csv_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "csv_util.hpp"
#include "dropspread/errors.hpp"

namespace dropspread {

namespace fs = std::filesystem;

namespace detail {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) out.push_back(trim(f));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

FormatError bad(const fs::path& path, std::size_t line, const std::string& what) {
  return FormatError(path.string() + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

CsvDocument read_csv_document(const fs::path& path, const std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  CsvDocument doc;
  std::string line;
  std::size_t number = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (!header_seen) {
      if (t.front() == '#') {
        doc.comments.push_back(trim(std::string_view(t).substr(1)));
        continue;
      }
      if (split_fields(t) != header) {
        std::string expected;
        for (const auto& h : header) expected += (expected.empty() ? "" : ",") + h;
        throw bad(path, number, "expected header '" + expected + "'");
      }
      header_seen = true;
      continue;
    }
    auto fields = split_fields(t);
    if (fields.size() != header.size()) {
      throw bad(path, number, "expected " + std::to_string(header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
    }
    doc.rows.push_back({number, std::move(fields)});
  }
  if (!header_seen) throw bad(path, number, "missing header");
  return doc;
}

std::vector<CsvRow> read_csv(const fs::path& path, const std::vector<std::string>& header) {
  return read_csv_document(path, header).rows;
}

double parse_double(std::string_view text, const fs::path& path, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw bad(path, line, "'" + std::string(text) + "' is not a number");
  }
  return v;
}

std::int64_t parse_int(std::string_view text, const fs::path& path, std::size_t line) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw bad(path, line, "'" + std::string(text) + "' is not an integer");
  }
  return v;
}

void write_text_atomically(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out) throw IoError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "'");
  }
}

}  // namespace detail

namespace {
const std::vector<std::string> kSeriesHeader = {"frame_index", "timestamp_s", "wet_pixels", "area_mm2"};
const std::vector<std::string> kSummaryHeader = {"concentration_ul_per_l", "cmc_fraction",
                                                 "max_area_mm2", "error_mm2", "no_plateau"};
const std::vector<std::string> kTensiometryHeader = {"concentration_ul_per_l",
                                                     "surface_tension_mN_per_m"};
constexpr std::string_view kConcentrationKey = "concentration_ul_per_l";

std::string join_header(const std::vector<std::string>& h) {
  std::string s;
  for (const auto& f : h) s += (s.empty() ? "" : ",") + f;
  return s + "\n";
}
}  // namespace

void write_series_csv(const fs::path& path, const SeriesFile& series) {
  std::string text;
  if (series.concentration_ul_per_l) {
    text += fmt::format("# {} = {}\n", kConcentrationKey, *series.concentration_ul_per_l);
  }
  text += join_header(kSeriesHeader);
  for (const auto& s : series.samples) {
    text += fmt::format("{},{},{},{}\n", s.frame_index, s.timestamp_s, s.wet_pixels, s.area_mm2);
  }
  detail::write_text_atomically(path, text);
}

SeriesFile read_series_csv(const fs::path& path) {
  const auto doc = detail::read_csv_document(path, kSeriesHeader);
  SeriesFile out;
  for (const auto& c : doc.comments) {
    const auto eq = c.find('=');
    if (eq == std::string::npos) continue;
    std::string key = c.substr(0, eq);
    key.erase(key.find_last_not_of(" \t") + 1);
    if (key != kConcentrationKey) continue;
    std::string value = c.substr(eq + 1);
    value.erase(0, value.find_first_not_of(" \t"));
    out.concentration_ul_per_l = detail::parse_double(value, path, 1);
  }
  for (const auto& row : doc.rows) {
    AreaSample s;
    s.frame_index = static_cast<int>(detail::parse_int(row.fields[0], path, row.line));
    s.timestamp_s = detail::parse_double(row.fields[1], path, row.line);
    s.wet_pixels = detail::parse_int(row.fields[2], path, row.line);
    s.area_mm2 = detail::parse_double(row.fields[3], path, row.line);
    if (s.wet_pixels < 0 || s.area_mm2 < 0.0) {
      throw FormatError(path.string() + ":" + std::to_string(row.line) + ": negative area");
    }
    out.samples.push_back(s);
  }
  return out;
}

void write_summary_csv(const fs::path& path, const std::vector<MaxAreaEstimate>& rows) {
  std::string text = join_header(kSummaryHeader);
  for (const auto& r : rows) {
    text += fmt::format("{},{},{},{},{}\n", r.concentration_ul_per_l, r.cmc_fraction, r.max_area_mm2,
                        r.error_mm2, r.no_plateau ? 1 : 0);
  }
  detail::write_text_atomically(path, text);
}

std::vector<MaxAreaEstimate> read_summary_csv(const fs::path& path) {
  std::vector<MaxAreaEstimate> out;
  for (const auto& row : detail::read_csv(path, kSummaryHeader)) {
    MaxAreaEstimate e;
    e.concentration_ul_per_l = detail::parse_double(row.fields[0], path, row.line);
    e.cmc_fraction = detail::parse_double(row.fields[1], path, row.line);
    e.max_area_mm2 = detail::parse_double(row.fields[2], path, row.line);
    e.error_mm2 = detail::parse_double(row.fields[3], path, row.line);
    e.no_plateau = detail::parse_int(row.fields[4], path, row.line) != 0;
    out.push_back(e);
  }
  return out;
}

std::vector<TensiometryPoint> read_tensiometry_csv(const fs::path& path) {
  std::vector<TensiometryPoint> out;
  for (const auto& row : detail::read_csv(path, kTensiometryHeader)) {
    out.push_back({detail::parse_double(row.fields[0], path, row.line),
                   detail::parse_double(row.fields[1], path, row.line)});
  }
  return out;
}

void write_tensiometry_csv(const fs::path& path, const std::vector<TensiometryPoint>& points) {
  std::string text = join_header(kTensiometryHeader);
  for (const auto& p : points) {
    text += fmt::format("{},{}\n", p.concentration_ul_per_l, p.surface_tension_mN_per_m);
  }
  detail::write_text_atomically(path, text);
}

void write_history_csv(const fs::path& path, const TrainHistory& history) {
  std::string text = "epoch,train_loss,validation_loss\n";
  for (std::size_t i = 0; i < history.train_loss.size(); ++i) {
    text += fmt::format("{},{},{}\n", i + 1, history.train_loss[i], history.validation_loss[i]);
  }
  detail::write_text_atomically(path, text);
}

}  // namespace dropspread
