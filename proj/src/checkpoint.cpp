#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "ecgx/error.hpp"
#include "ecgx/model.hpp"

namespace ecgx {

namespace {

constexpr char kMagic[8] = {'E', 'C', 'G', 'X', 'C', 'K', 'P', 'T'};

template <typename T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const std::filesystem::path& path) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw Error(ErrorKind::CorruptRecord, path.string() + ": truncated checkpoint");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void save_checkpoint(const CnnModel& model, const std::filesystem::path& path,
                     const nlohmann::json& extra) {
  nlohmann::json header;
  header["format"] = "ecgx-checkpoint";
  header["version"] = kCheckpointVersion;
  header["config"] = to_json(model.config);
  header["in_channels"] = model.in_channels;
  header["in_length"] = model.in_length;
  header["seed"] = model.seed;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& p : model.params) tensors.push_back({{"name", p.name}, {"shape", p.shape}});
  header["tensors"] = tensors;
  header["extra"] = extra;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : model.params) {
    for (double v : p.values) put_le<double>(out, v);
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

CnnModel load_checkpoint(const std::filesystem::path& path, nlohmann::json* extra) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw Error(ErrorKind::UnsupportedFormat, path.string() + ": not an ecgx checkpoint");
  }
  const auto version = get_le<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::UnsupportedFormat,
                path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto len = get_le<std::uint64_t>(in, path);
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) {
    throw Error(ErrorKind::CorruptRecord, path.string() + ": truncated checkpoint header");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::CorruptRecord, path.string() + ": bad checkpoint header: " + e.what());
  }
  const auto config = model_config_from_json(header.at("config"));
  CnnModel model = init_model(config, header.at("in_channels").get<std::size_t>(),
                              header.at("in_length").get<std::size_t>(),
                              header.at("seed").get<std::uint64_t>());
  const auto& tensors = header.at("tensors");
  if (tensors.size() != model.params.size()) {
    throw Error(ErrorKind::CorruptRecord, path.string() + ": tensor count does not match config");
  }
  for (std::size_t k = 0; k < model.params.size(); ++k) {
    auto& p = model.params[k];
    if (tensors[k].at("name").get<std::string>() != p.name ||
        tensors[k].at("shape").get<std::vector<std::size_t>>() != p.shape) {
      throw Error(ErrorKind::CorruptRecord, path.string() + ": tensor " + p.name + " mismatch");
    }
    for (double& v : p.values) v = get_le<double>(in, path);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorKind::CorruptRecord, path.string() + ": trailing bytes after tensors");
  }
  if (extra) *extra = header.value("extra", nlohmann::json::object());
  return model;
}

}  // namespace ecgx
