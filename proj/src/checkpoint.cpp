#include "planefield/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "planefield/errors.hpp"

namespace planefield {

static_assert(std::endian::native == std::endian::little, "checkpoint blobs assume a little-endian host");

namespace {

using nlohmann::json;
constexpr char kMagic[8] = {'P', 'L', 'N', 'F', '0', '0', '0', '1'};

std::uint32_t crc_of(const char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void put_doubles(std::string& out, std::span<const double> v) {
  out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

}  // namespace

std::string serialize_checkpoint(TrainState& state) {
  const auto params = trainable_tensors(state);
  json header;
  header["config"] = to_entries(state.config);
  header["iteration"] = state.iter;
  header["rng"] = state.rng.state();
  header["adam"] = {{"step", state.adam.step},
                    {"beta1", state.adam.beta1},
                    {"beta2", state.adam.beta2},
                    {"eps", state.adam.eps}};
  const auto& c = state.camera;
  header["camera"] = {{"fx", c.fx},       {"fy", c.fy},         {"cx", c.cx},     {"cy", c.cy},
                      {"width", c.width}, {"height", c.height}, {"near", c.near}};
  header["frame_times"] = state.frame_times;
  json tensors = json::array();
  for (const auto& p : params) tensors.push_back({{"name", p.name}, {"shape", p.tensor->shape()}});
  header["tensors"] = tensors;
  const std::string text = header.dump();

  std::string out(kMagic, 8);
  const std::uint64_t len = text.size();
  out.append(reinterpret_cast<const char*>(&len), 8);
  out += text;
  for (const auto& p : params) put_doubles(out, p.tensor->values());
  for (const auto& m : state.adam.m) put_doubles(out, m);
  for (const auto& v : state.adam.v) put_doubles(out, v);
  const std::uint32_t crc = crc_of(out.data(), out.size());
  out.append(reinterpret_cast<const char*>(&crc), 4);
  return out;
}

TrainState deserialize_checkpoint(const std::string& bytes) {
  using K = CheckpointError::Kind;
  if (bytes.size() < 8) throw CheckpointError(K::Truncated, "checkpoint: file shorter than the magic");
  if (std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw CheckpointError(K::Version, "checkpoint: unrecognized magic/version '" + bytes.substr(0, 8) + "'");
  if (bytes.size() < 16) throw CheckpointError(K::Truncated, "checkpoint: header length missing");
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, 8);
  if (len > bytes.size() - 16) throw CheckpointError(K::Truncated, "checkpoint: header truncated");

  json header;
  try {
    header = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));
  } catch (const std::exception& e) {
    throw CheckpointError(K::Format, std::string("checkpoint: malformed header: ") + e.what());
  }

  try {
    std::size_t blob_values = 0;
    for (const auto& t : header.at("tensors")) blob_values += element_count(t.at("shape").get<Shape>());
    const std::size_t expected = 16 + len + 3 * blob_values * sizeof(double) + 4;
    if (bytes.size() < expected) throw CheckpointError(K::Truncated, "checkpoint: parameter data truncated");
    if (bytes.size() > expected) throw CheckpointError(K::Format, "checkpoint: trailing bytes after checksum");
    std::uint32_t stored = 0;
    std::memcpy(&stored, bytes.data() + expected - 4, 4);
    if (stored != crc_of(bytes.data(), expected - 4))
      throw CheckpointError(K::Checksum, "checkpoint: CRC32 mismatch");

    TrainConfig config;
    apply_config(config, header.at("config").get<ConfigEntries>());
    CameraModel cam;
    const auto& jc = header.at("camera");
    cam.fx = jc.at("fx").get<double>();
    cam.fy = jc.at("fy").get<double>();
    cam.cx = jc.at("cx").get<double>();
    cam.cy = jc.at("cy").get<double>();
    cam.width = jc.at("width").get<std::size_t>();
    cam.height = jc.at("height").get<std::size_t>();
    cam.near = jc.at("near").get<double>();
    TrainState state = make_train_state(config, cam, header.at("frame_times").get<std::vector<double>>());
    state.iter = header.at("iteration").get<std::size_t>();
    state.rng.set_state(header.at("rng").get<std::string>());
    const auto& ja = header.at("adam");
    state.adam.step = ja.at("step").get<std::size_t>();
    state.adam.beta1 = ja.at("beta1").get<double>();
    state.adam.beta2 = ja.at("beta2").get<double>();
    state.adam.eps = ja.at("eps").get<double>();

    const auto params = trainable_tensors(state);
    const auto& jt = header.at("tensors");
    if (jt.size() != params.size())
      throw CheckpointError(K::Format, "checkpoint: tensor count does not match the configured model");
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto name = jt[i].at("name").get<std::string>();
      const auto shape = jt[i].at("shape").get<Shape>();
      if (name != params[i].name || shape != params[i].tensor->shape())
        throw CheckpointError(K::Format, "checkpoint: tensor " + name + " " + shape_string(shape) +
                                             " does not match " + params[i].name + " " +
                                             shape_string(params[i].tensor->shape()));
    }
    const char* cursor = bytes.data() + 16 + len;
    auto take = [&](std::span<double> dst) {
      std::memcpy(dst.data(), cursor, dst.size() * sizeof(double));
      cursor += dst.size() * sizeof(double);
    };
    for (const auto& p : params) take(p.tensor->values());
    for (auto& m : state.adam.m) take(m);
    for (auto& v : state.adam.v) take(v);
    return state;
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(K::Format, std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(TrainState& state, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(state);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw CheckpointError(CheckpointError::Kind::Io, "checkpoint: cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError(CheckpointError::Kind::Io, "checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::Io, "checkpoint: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace planefield
