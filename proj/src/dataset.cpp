#include "planefield/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "planefield/errors.hpp"
#include "planefield/image_io.hpp"

namespace planefield {

namespace fs = std::filesystem;
using nlohmann::json;

std::string frame_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu.png", index);
  return buf;
}

std::vector<double> normalized_times(std::size_t count) {
  if (count == 0) throw ContractViolation("normalized_times: no frames");
  std::vector<double> out(count, 0.0);
  if (count == 1) return out;
  for (std::size_t i = 0; i < count; ++i)
    out[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(count - 1);
  out.back() = 1.0;
  return out;
}

std::vector<double> normalized_times(const std::vector<double>& ts) {
  if (ts.empty()) throw ContractViolation("normalized_times: no timestamps");
  for (std::size_t i = 1; i < ts.size(); ++i)
    if (!(ts[i] > ts[i - 1])) throw ContractViolation("normalized_times: timestamps must be strictly increasing");
  std::vector<double> out(ts.size(), 0.0);
  if (ts.size() == 1) return out;
  const double span = ts.back() - ts.front();
  for (std::size_t i = 0; i < ts.size(); ++i) out[i] = -1.0 + 2.0 * (ts[i] - ts.front()) / span;
  out.front() = -1.0;
  out.back() = 1.0;
  return out;
}

namespace {

template <typename T>
bool read_number(const json& meta, const char* key, T& out, std::vector<std::string>& problems) {
  if (!meta.contains(key)) {
    problems.push_back(std::string("meta.json: missing key '") + key + "'");
    return false;
  }
  if (!meta[key].is_number()) {
    problems.push_back(std::string("meta.json: key '") + key + "' is not a number");
    return false;
  }
  out = meta[key].get<T>();
  return true;
}

}  // namespace

Dataset load_dataset(const fs::path& dir) {
  std::vector<std::string> problems;
  Dataset data;

  json meta;
  const fs::path meta_path = dir / "meta.json";
  if (!fs::exists(meta_path)) {
    problems.push_back("missing file " + meta_path.string());
  } else {
    try {
      std::ifstream in(meta_path);
      meta = json::parse(in);
    } catch (const std::exception& e) {
      problems.push_back("meta.json: unreadable (" + std::string(e.what()) + ")");
    }
  }

  std::vector<double> timestamps;
  if (meta.is_object()) {
    auto& cam = data.camera;
    read_number(meta, "fx", cam.fx, problems);
    read_number(meta, "fy", cam.fy, problems);
    read_number(meta, "cx", cam.cx, problems);
    read_number(meta, "cy", cam.cy, problems);
    read_number(meta, "width", cam.width, problems);
    read_number(meta, "height", cam.height, problems);
    read_number(meta, "near", cam.near, problems);
    read_number(meta, "depth_scale", data.depth_scale, problems);
    read_number(meta, "fps", data.fps, problems);
    if (!(cam.fx > 0) || !(cam.fy > 0)) problems.push_back("meta.json: fx and fy must be positive");
    if (!(cam.near > 0)) problems.push_back("meta.json: near must be positive");
    if (!(data.depth_scale > 0)) problems.push_back("meta.json: depth_scale must be positive");
    if (meta.contains("poses") && meta["poses"].is_array() && meta["poses"].size() > 1)
      problems.push_back("meta.json: multiple camera poses are not supported");
    if (meta.contains("timestamps")) {
      if (!meta["timestamps"].is_array()) {
        problems.push_back("meta.json: timestamps must be an array");
      } else {
        for (const auto& t : meta["timestamps"]) {
          if (!t.is_number()) {
            problems.push_back("meta.json: non-numeric timestamp");
            break;
          }
          timestamps.push_back(t.get<double>());
        }
      }
    }
  } else if (!meta.is_null()) {
    problems.push_back("meta.json: top level must be an object");
  }

  const fs::path images = dir / "images";
  std::size_t count = 0;
  if (!fs::is_directory(images)) {
    problems.push_back("missing directory " + images.string());
  } else {
    while (fs::exists(images / frame_file_name(count))) ++count;
    if (count == 0) problems.push_back("no frames in " + images.string());
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(images))
      if (e.path().extension() == ".png") ++files;
    if (files != count) problems.push_back("images/: frame numbering is not contiguous from 000000");
  }

  if (!timestamps.empty() && timestamps.size() != count)
    problems.push_back("meta.json: " + std::to_string(timestamps.size()) + " timestamps for " +
                       std::to_string(count) + " frames");
  for (std::size_t i = 1; i < timestamps.size(); ++i)
    if (!(timestamps[i] > timestamps[i - 1])) {
      problems.push_back("meta.json: timestamps are not strictly increasing at frame " + std::to_string(i));
      break;
    }

  const bool have_masks = fs::is_directory(dir / "masks");
  const bool have_depth = fs::is_directory(dir / "depth");
  const std::size_t w = data.camera.width, h = data.camera.height;
  auto check_size = [&](const PngPixels& px, const std::string& what) {
    if (px.width != w || px.height != h) {
      problems.push_back(what + ": resolution " + std::to_string(px.width) + "x" + std::to_string(px.height) +
                         " does not match " + std::to_string(w) + "x" + std::to_string(h));
      return false;
    }
    return true;
  };

  for (std::size_t i = 0; i < count; ++i) {
    const std::string name = frame_file_name(i);
    MaskedFrame frame;
    frame.image = Image(w, h, 3);
    frame.mask.assign(w * h, 1);
    try {
      const PngPixels px = read_png(images / name);
      if (px.channels != 3 || px.bit_depth != 8) {
        problems.push_back("images/" + name + ": expected 8-bit RGB");
      } else if (check_size(px, "images/" + name)) {
        for (std::size_t k = 0; k < px.samples.size(); ++k) frame.image.data[k] = px.samples[k] / 255.0;
      }
    } catch (const std::exception& e) {
      problems.push_back("images/" + name + ": " + e.what());
    }
    if (have_masks) {
      const fs::path mp = dir / "masks" / name;
      if (!fs::exists(mp)) {
        problems.push_back("missing file masks/" + name);
      } else {
        try {
          const PngPixels px = read_png(mp);
          if (px.channels != 1 || px.bit_depth != 8) {
            problems.push_back("masks/" + name + ": expected 8-bit grayscale");
          } else if (check_size(px, "masks/" + name)) {
            std::size_t visible = 0;
            for (std::size_t k = 0; k < px.samples.size(); ++k) {
              frame.mask[k] = px.samples[k] >= 128 ? 0 : 1;
              visible += frame.mask[k];
            }
            if (visible == 0) data.warnings.push_back("frame " + std::to_string(i) + " is fully occluded");
          }
        } catch (const std::exception& e) {
          problems.push_back("masks/" + name + ": " + e.what());
        }
      }
    }
    if (have_depth) {
      const fs::path dp = dir / "depth" / name;
      std::vector<double> depth(w * h, 0.0);
      if (!fs::exists(dp)) {
        problems.push_back("missing file depth/" + name);
      } else {
        try {
          const PngPixels px = read_png(dp);
          if (px.channels != 1 || px.bit_depth != 16) {
            problems.push_back("depth/" + name + ": expected 16-bit grayscale");
          } else if (check_size(px, "depth/" + name)) {
            for (std::size_t k = 0; k < px.samples.size(); ++k) depth[k] = px.samples[k] * data.depth_scale;
          }
        } catch (const std::exception& e) {
          problems.push_back("depth/" + name + ": " + e.what());
        }
      }
      data.depth.push_back(std::move(depth));
    }
    data.frames.push_back(std::move(frame));
  }

  if (!problems.empty()) throw ValidationError(problems);
  data.times = timestamps.empty() ? normalized_times(count) : normalized_times(timestamps);
  for (std::size_t i = 0; i < count; ++i) data.frames[i].time = data.times[i];
  return data;
}

void write_dataset(const fs::path& dir, const Dataset& data) {
  if (data.frames.empty()) throw ContractViolation("write_dataset: no frames");
  const auto& cam = data.camera;
  cam.validate();
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  if (data.has_depth()) fs::create_directories(dir / "depth");
  for (std::size_t i = 0; i < data.frames.size(); ++i) {
    const auto& f = data.frames[i];
    const std::string name = frame_file_name(i);
    write_png8(dir / "images" / name, f.image);
    PngPixels mask{cam.width, cam.height, 1, 8, std::vector<std::uint16_t>(cam.width * cam.height)};
    for (std::size_t k = 0; k < mask.samples.size(); ++k) mask.samples[k] = f.mask[k] ? 0 : 255;
    write_png(dir / "masks" / name, mask);
    if (data.has_depth()) {
      PngPixels depth{cam.width, cam.height, 1, 16, std::vector<std::uint16_t>(cam.width * cam.height)};
      for (std::size_t k = 0; k < depth.samples.size(); ++k) {
        const double q = std::round(data.depth[i][k] / data.depth_scale);
        depth.samples[k] = static_cast<std::uint16_t>(std::clamp(q, 0.0, 65535.0));
      }
      write_png(dir / "depth" / name, depth);
    }
  }
  json meta = {{"fx", cam.fx},         {"fy", cam.fy},       {"cx", cam.cx},
               {"cy", cam.cy},         {"width", cam.width}, {"height", cam.height},
               {"near", cam.near},     {"depth_scale", data.depth_scale},
               {"fps", data.fps}};
  std::ofstream(dir / "meta.json") << meta.dump(2) << "\n";
}

NdcMapping ndc_bounds(const Dataset& data) { return ndc_bounds(data.camera); }

}  // namespace planefield
