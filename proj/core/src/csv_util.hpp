#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dropspread::detail {

struct CsvRow {
  std::size_t line = 0;  // 1-based line number in the file
  std::vector<std::string> fields;
};

struct CsvDocument {
  std::vector<std::string> comments;  // text after '#', leading comment block only
  std::vector<CsvRow> rows;
};

/// Reads a comma-separated file whose header must equal `header`. Lines
/// starting with '#' before the header are returned as comments; blank lines
/// are skipped. Throws IoError / FormatError with file and line.
CsvDocument read_csv_document(const std::filesystem::path& path,
                              const std::vector<std::string>& header);
std::vector<CsvRow> read_csv(const std::filesystem::path& path, const std::vector<std::string>& header);

double parse_double(std::string_view text, const std::filesystem::path& path, std::size_t line);
std::int64_t parse_int(std::string_view text, const std::filesystem::path& path, std::size_t line);

/// Writes to `<path>.tmp` then renames over `path`.
void write_text_atomically(const std::filesystem::path& path, const std::string& text);

}  // namespace dropspread::detail
