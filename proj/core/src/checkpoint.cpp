#include "dropspread/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "dropspread/errors.hpp"

namespace dropspread {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

FormatError corrupt(const std::filesystem::path& path, const std::string& why) {
  return FormatError("checkpoint '" + path.string() + "': " + why);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const auto& params = checkpoint.params;
  const auto& cfg = params.config();
  nlohmann::ordered_json header;
  header["config"] = {{"pyramid_depth", cfg.pyramid_depth},
                      {"base_channels", cfg.base_channels},
                      {"input_channels", cfg.input_channels}};
  header["grid_side"] = checkpoint.grid_side;
  header["metadata"] = checkpoint.metadata;
  auto arrays = nlohmann::ordered_json::array();
  for (const auto& e : params.entries()) {
    arrays.push_back({{"name", e.name}, {"shape", e.shape}, {"offset", e.offset}, {"size", e.size}});
  }
  header["arrays"] = std::move(arrays);

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint '" + tmp.string() + "'");
    out << kCheckpointTag << " v" << kCheckpointVersion << '\n' << header.dump() << '\n';
    const auto values = params.values();
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!out) throw IoError("failed writing checkpoint '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot move checkpoint into place at '" + path.string() + "': " + ec.message());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");

  std::string tag_line;
  std::getline(in, tag_line);
  const std::string expected_prefix = std::string(kCheckpointTag) + " v";
  if (!tag_line.starts_with(expected_prefix)) throw corrupt(path, "missing format tag");
  const std::string version = tag_line.substr(expected_prefix.size());
  if (version != std::to_string(kCheckpointVersion)) {
    throw corrupt(path, "unsupported version " + version + " (expected " +
                            std::to_string(kCheckpointVersion) + ")");
  }

  std::string header_line;
  std::getline(in, header_line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
    ModelConfig cfg;
    cfg.pyramid_depth = header.at("config").at("pyramid_depth").get<int>();
    cfg.base_channels = header.at("config").at("base_channels").get<int>();
    cfg.input_channels = header.at("config").at("input_channels").get<int>();

    Checkpoint ck{ModelParameters(cfg), header.at("grid_side").get<int>(), {}};
    ck.metadata = header.at("metadata").get<std::map<std::string, std::string>>();

    const auto& arrays = header.at("arrays");
    const auto& entries = ck.params.entries();
    if (arrays.size() != entries.size()) throw corrupt(path, "array count does not match config");
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& a = arrays[i];
      if (a.at("name").get<std::string>() != entries[i].name ||
          a.at("shape").get<std::vector<int>>() != entries[i].shape ||
          a.at("offset").get<std::size_t>() != entries[i].offset) {
        throw corrupt(path, "array '" + a.at("name").get<std::string>() +
                                "' does not match the layout for its config");
      }
    }

    std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto values = ck.params.values();
    if (payload.size() != values.size() * sizeof(double)) {
      throw corrupt(path, "payload has " + std::to_string(payload.size()) + " bytes, expected " +
                              std::to_string(values.size() * sizeof(double)));
    }
    std::memcpy(values.data(), payload.data(), payload.size());
    if (!ck.params.all_finite()) throw corrupt(path, "non-finite parameter values");
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw corrupt(path, std::string("bad header: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw corrupt(path, e.what());
  }
}

}  // namespace dropspread
