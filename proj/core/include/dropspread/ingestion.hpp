#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dropspread {

struct FrameRecord {
  int index = 0;             // frame number in the source video
  double timestamp_s = 0.0;  // index / fps
  std::filesystem::path image_path;

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

/// Name of the sidecar written next to extracted frames: `index,timestamp_s,filename`.
inline constexpr const char* kFrameIndexFile = "frames.csv";

/// Image files (png, jpg, jpeg, bmp, tif, tiff) of `dir` in lexicographic
/// order; every stride-th one is kept with timestamp = position / fps.
/// Throws InvalidArgument on fps <= 0 or stride < 1, IoError when the
/// directory has no frames or a frame cannot be read.
std::vector<FrameRecord> index_frame_dir(const std::filesystem::path& dir, double fps, int stride = 1);

void write_frame_index(const std::filesystem::path& dir, const std::vector<FrameRecord>& records);
std::vector<FrameRecord> read_frame_index(const std::filesystem::path& dir);

/// Uses the frames.csv sidecar when present (then `fps` is ignored), otherwise index_frame_dir.
std::vector<FrameRecord> load_frames(const std::filesystem::path& dir, double fps, int stride = 1);

enum class Decoder {
  /// OpenCV videoio (FFmpeg/GStreamer backed).
  opencv,
  /// An `ffmpeg` executable on PATH or at `ffmpeg_executable`.
  ffmpeg,
};

struct ExtractOptions {
  int stride = 1;
  /// Overrides the container's frame rate; required for the ffmpeg decoder.
  std::optional<double> fps;
  Decoder decoder = Decoder::opencv;
  std::string ffmpeg_executable = "ffmpeg";
};

/// Decodes `video` and writes every stride-th frame losslessly as
/// `frame_%06d.png` (numbered by source frame index) plus frames.csv.
/// On any failure everything written so far is removed.
/// Throws DecoderUnavailable when the ffmpeg executable is missing, IoError
/// when the video cannot be opened or decoded.
std::vector<FrameRecord> extract_frames(const std::filesystem::path& video,
                                        const std::filesystem::path& out_dir,
                                        const ExtractOptions& options);

}  // namespace dropspread
