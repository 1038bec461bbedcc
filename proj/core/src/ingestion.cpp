#include "dropspread/ingestion.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/videoio.hpp>

#include "dropspread/errors.hpp"
#include "csv_util.hpp"

namespace dropspread {

namespace fs = std::filesystem;

namespace {

bool is_frame_file(const fs::path& p) {
  static constexpr std::array<std::string_view, 6> kExt = {".png", ".jpg", ".jpeg",
                                                           ".bmp", ".tif", ".tiff"};
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return std::find(kExt.begin(), kExt.end(), ext) != kExt.end();
}

void check_readable(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  char byte = 0;
  if (!in || !in.get(byte)) throw IoError("frame '" + p.string() + "' is unreadable");
}

std::string frame_name(int index) { return fmt::format("frame_{:06d}.png", index); }

// Removes files created by a failed extraction unless committed.
class OutputGuard {
 public:
  explicit OutputGuard(fs::path dir) : dir_(std::move(dir)), created_dir_(!fs::exists(dir_)) {}
  OutputGuard(const OutputGuard&) = delete;
  OutputGuard& operator=(const OutputGuard&) = delete;
  ~OutputGuard() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& f : files_) fs::remove(f, ec);
    if (created_dir_) fs::remove_all(dir_, ec);
  }
  void track(fs::path p) { files_.push_back(std::move(p)); }
  void commit() { committed_ = true; }

 private:
  fs::path dir_;
  bool created_dir_;
  bool committed_ = false;
  std::vector<fs::path> files_;
};

std::optional<fs::path> find_executable(const std::string& name) {
  if (name.find('/') != std::string::npos) {
    if (fs::is_regular_file(name)) return fs::path(name);
    return std::nullopt;
  }
  const char* path_env = std::getenv("PATH");
  if (path_env == nullptr) return std::nullopt;
  std::stringstream ss(path_env);
  std::string dir;
  while (std::getline(ss, dir, ':')) {
    if (dir.empty()) continue;
    const fs::path candidate = fs::path(dir) / name;
    if (fs::is_regular_file(candidate)) return candidate;
  }
  return std::nullopt;
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

void validate(double fps, int stride) {
  if (!(fps > 0.0)) throw InvalidArgument("fps must be positive");
  if (stride < 1) throw InvalidArgument("stride must be >= 1");
}

std::vector<FrameRecord> extract_with_opencv(const fs::path& video, const fs::path& out_dir,
                                             const ExtractOptions& options, OutputGuard& guard) {
  cv::VideoCapture capture(video.string());
  if (!capture.isOpened()) throw IoError("cannot open video '" + video.string() + "'");
  double fps = options.fps.value_or(capture.get(cv::CAP_PROP_FPS));
  if (!(fps > 0.0)) {
    throw IoError("video '" + video.string() + "' reports no frame rate; pass --fps");
  }
  validate(fps, options.stride);
  std::vector<FrameRecord> records;
  cv::Mat frame;
  for (int n = 0; capture.read(frame); ++n) {
    if (n % options.stride != 0) continue;
    const fs::path out = out_dir / frame_name(n);
    guard.track(out);
    if (!cv::imwrite(out.string(), frame)) throw IoError("cannot write frame '" + out.string() + "'");
    records.push_back({n, n / fps, out});
  }
  if (records.empty()) throw IoError("no frames could be decoded from '" + video.string() + "'");
  return records;
}

std::vector<FrameRecord> extract_with_ffmpeg(const fs::path& video, const fs::path& out_dir,
                                             const ExtractOptions& options, OutputGuard& guard) {
  const auto exe = find_executable(options.ffmpeg_executable);
  if (!exe) {
    throw DecoderUnavailable("frame decoder '" + options.ffmpeg_executable +
                             "' not found; install ffmpeg, use the OpenCV decoder, or pre-extract "
                             "frames as PNG files into a directory and pass it with --frames");
  }
  if (!options.fps) throw InvalidArgument("the ffmpeg decoder needs an explicit --fps");
  const double fps = *options.fps;
  validate(fps, options.stride);
  if (!fs::is_regular_file(video)) throw IoError("cannot open video '" + video.string() + "'");

  const fs::path staging = out_dir / ".extract-staging";
  fs::create_directories(staging);
  guard.track(staging);
  const std::string cmd = fmt::format(
      "{} -nostdin -v error -i {} -vf {} -vsync 0 -start_number 0 {} 2>&1", shell_quote(exe->string()),
      shell_quote(video.string()),
      shell_quote(fmt::format("select=not(mod(n\\,{}))", options.stride)),
      shell_quote((staging / "f_%06d.png").string()));
  const int rc = std::system(cmd.c_str());
  if (rc != 0) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw IoError("ffmpeg failed to decode '" + video.string() + "' (exit " + std::to_string(rc) + ")");
  }
  std::vector<fs::path> staged;
  for (const auto& e : fs::directory_iterator(staging)) staged.push_back(e.path());
  std::sort(staged.begin(), staged.end());
  std::vector<FrameRecord> records;
  for (std::size_t k = 0; k < staged.size(); ++k) {
    const int n = static_cast<int>(k) * options.stride;
    const fs::path out = out_dir / frame_name(n);
    guard.track(out);
    fs::rename(staged[k], out);
    records.push_back({n, n / fps, out});
  }
  fs::remove_all(staging);
  if (records.empty()) throw IoError("no frames could be decoded from '" + video.string() + "'");
  return records;
}

}  // namespace

std::vector<FrameRecord> index_frame_dir(const fs::path& dir, double fps, int stride) {
  validate(fps, stride);
  if (!fs::is_directory(dir)) throw IoError("frame directory '" + dir.string() + "' not found");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_frame_file(e.path())) files.push_back(e.path());
  }
  if (files.empty()) throw IoError("frame directory '" + dir.string() + "' contains no frames");
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  std::vector<FrameRecord> records;
  for (std::size_t i = 0; i < files.size(); i += stride) {
    check_readable(files[i]);
    const int index = static_cast<int>(i);
    records.push_back({index, index / fps, files[i]});
  }
  return records;
}

void write_frame_index(const fs::path& dir, const std::vector<FrameRecord>& records) {
  std::string text = "index,timestamp_s,filename\n";
  for (const auto& r : records) {
    text += fmt::format("{},{},{}\n", r.index, r.timestamp_s, r.image_path.filename().string());
  }
  detail::write_text_atomically(dir / kFrameIndexFile, text);
}

std::vector<FrameRecord> read_frame_index(const fs::path& dir) {
  const fs::path path = dir / kFrameIndexFile;
  const auto rows = detail::read_csv(path, {"index", "timestamp_s", "filename"});
  std::vector<FrameRecord> records;
  for (const auto& row : rows) {
    FrameRecord r;
    r.index = static_cast<int>(detail::parse_int(row.fields[0], path, row.line));
    r.timestamp_s = detail::parse_double(row.fields[1], path, row.line);
    r.image_path = dir / row.fields[2];
    if (!records.empty() && !(r.timestamp_s > records.back().timestamp_s)) {
      throw FormatError(path.string() + ":" + std::to_string(row.line) +
                        ": timestamps must be strictly increasing");
    }
    records.push_back(std::move(r));
  }
  if (records.empty()) throw IoError("frame index '" + path.string() + "' lists no frames");
  return records;
}

std::vector<FrameRecord> load_frames(const fs::path& dir, double fps, int stride) {
  if (!fs::exists(dir / kFrameIndexFile)) return index_frame_dir(dir, fps, stride);
  if (stride < 1) throw InvalidArgument("stride must be >= 1");
  const auto all = read_frame_index(dir);
  std::vector<FrameRecord> out;
  for (std::size_t i = 0; i < all.size(); i += stride) {
    check_readable(all[i].image_path);
    out.push_back(all[i]);
  }
  return out;
}

std::vector<FrameRecord> extract_frames(const fs::path& video, const fs::path& out_dir,
                                        const ExtractOptions& options) {
  if (options.stride < 1) throw InvalidArgument("stride must be >= 1");
  if (options.fps && !(*options.fps > 0.0)) throw InvalidArgument("fps must be positive");
  if (options.decoder == Decoder::ffmpeg && !find_executable(options.ffmpeg_executable)) {
    // Fail before touching the output directory.
    throw DecoderUnavailable("frame decoder '" + options.ffmpeg_executable +
                             "' not found; install ffmpeg, use the OpenCV decoder, or pre-extract "
                             "frames as PNG files into a directory and pass it with --frames");
  }
  OutputGuard guard(out_dir);
  fs::create_directories(out_dir);
  auto records = options.decoder == Decoder::ffmpeg
                     ? extract_with_ffmpeg(video, out_dir, options, guard)
                     : extract_with_opencv(video, out_dir, options, guard);
  guard.track(out_dir / kFrameIndexFile);
  write_frame_index(out_dir, records);
  guard.commit();
  return records;
}

}  // namespace dropspread
