#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "dropspread/model.hpp"

namespace dropspread {

/// On-disk layout:
///   line 1   "dropspread-checkpoint v1"
///   line 2   single-line JSON header: {"config": {...}, "grid_side": N,
///            "metadata": {...}, "arrays": [{"name", "shape", "offset", "size"}, ...]}
///   rest     little-endian IEEE-754 float64 values, arrays back to back
inline constexpr const char* kCheckpointTag = "dropspread-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelParameters params;
  /// Square input side the model was trained at; measurement resizes frames to it.
  int grid_side = 0;
  std::map<std::string, std::string> metadata;
};

/// Writes atomically (temp file + rename). Throws IoError.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Throws IoError when unreadable, FormatError (with the file name) when the
/// tag, version, layout or payload is wrong.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dropspread
