#include "planefield/pixsampler.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "planefield/errors.hpp"

namespace planefield {

std::vector<std::vector<double>> occlusion_scale(std::span<const std::vector<std::uint8_t>> masks,
                                                 double beta) {
  if (masks.empty()) throw ContractViolation("occlusion_scale: no masks");
  if (!(beta > 0)) throw ContractViolation("occlusion_scale: beta must be positive");
  const std::size_t pixels = masks[0].size();
  std::vector<double> visible(pixels, 0.0);
  for (const auto& m : masks) {
    if (m.size() != pixels) throw ContractViolation("occlusion_scale: mask sizes differ");
    for (std::size_t p = 0; p < pixels; ++p) visible[p] += m[p] ? 1.0 : 0.0;
  }
  const double frames = static_cast<double>(masks.size());
  std::vector<std::vector<double>> out(masks.size(), std::vector<double>(pixels, 0.0));
  for (std::size_t i = 0; i < masks.size(); ++i)
    for (std::size_t p = 0; p < pixels; ++p)
      if (masks[i][p] && visible[p] > 0) out[i][p] = beta * frames / visible[p];
  return out;
}

std::vector<WeightMap> weight_maps(std::span<const MaskedFrame> frames, const SamplerParams& params) {
  if (frames.empty()) throw ContractViolation("weight_maps: empty frame list");
  if (!(params.alpha > 0)) throw ContractViolation("weight_maps: alpha must be positive");
  if (params.window < 1) throw ContractViolation("weight_maps: window must be at least 1");
  const std::size_t w = frames[0].image.width;
  const std::size_t h = frames[0].image.height;
  const std::size_t pixels = w * h;
  std::vector<std::vector<std::uint8_t>> masks;
  for (const auto& f : frames) {
    if (f.image.width != w || f.image.height != h || f.image.channels != 3 || f.mask.size() != pixels)
      throw ContractViolation("weight_maps: frame/mask shapes differ");
    masks.push_back(f.mask);
  }
  const auto omega = occlusion_scale(masks, params.beta);

  const std::size_t count = frames.size();
  const std::size_t n = params.window;
  std::vector<WeightMap> maps;
  maps.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    // Window i - n < j < i + n, clipped to the sequence.
    const std::size_t lo = i + 1 > n ? i + 1 - n : 0;
    const std::size_t hi = std::min(count - 1, i + n - 1);
    WeightMap map;
    map.frame = i;
    map.width = w;
    map.height = h;
    map.weights.assign(pixels, 0.0);
    const auto& fi = frames[i];
    for (std::size_t p = 0; p < pixels; ++p) {
      if (omega[i][p] == 0) continue;
      double diff = 0;
      for (std::size_t j = lo; j <= hi; ++j) {
        const auto& fj = frames[j];
        double l1 = 0;
        for (std::size_t c = 0; c < 3; ++c) {
          const double a = fi.mask[p] ? fi.image.data[p * 3 + c] : 0.0;
          const double b = fj.mask[p] ? fj.image.data[p * 3 + c] : 0.0;
          l1 += std::fabs(a - b);
        }
        diff = std::max(diff, l1 / 3.0);
      }
      const double term = params.mode == AlphaMode::LowerBound ? std::max(diff, params.alpha)
                                                               : std::min(diff, params.alpha);
      map.weights[p] = term * omega[i][p];
    }
    for (double v : map.weights) map.total += v;
    maps.push_back(std::move(map));
  }
  return maps;
}

BatchSampler::BatchSampler(std::span<const WeightMap> maps) {
  if (maps.empty()) throw ContractViolation("BatchSampler: no weight maps");
  width_ = maps[0].width;
  height_ = maps[0].height;
  cdf_.reserve(maps.size() * width_ * height_);
  double acc = 0;
  for (const auto& m : maps) {
    if (m.width != width_ || m.height != height_) throw ContractViolation("BatchSampler: map sizes differ");
    for (double v : m.weights) {
      if (v < 0) throw ContractViolation("BatchSampler: negative weight");
      acc += v;
      cdf_.push_back(acc);
    }
  }
  if (!(acc > 0)) throw ContractViolation("BatchSampler: all sampling weights are zero");
}

std::vector<PixelDraw> BatchSampler::draw(std::size_t batch, Rng& rng) const {
  if (batch == 0) throw ContractViolation("draw_batch: batch must be at least 1");
  const std::size_t pixels = width_ * height_;
  std::vector<PixelDraw> out;
  out.reserve(batch);
  const double total = cdf_.back();
  for (std::size_t k = 0; k < batch; ++k) {
    const double u = rng.uniform() * total;
    // First cell whose cumulative weight exceeds u; zero-weight cells never win.
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) it = std::prev(it);
    std::size_t idx = static_cast<std::size_t>(it - cdf_.begin());
    while (idx > 0 && cdf_[idx] == cdf_[idx - 1]) --idx;  // only reachable at u == total after rounding
    out.push_back({idx / pixels, (idx % pixels) / width_, idx % width_});
  }
  return out;
}

std::vector<PixelDraw> draw_batch(std::span<const WeightMap> maps, std::size_t batch, Rng& rng) {
  return BatchSampler(maps).draw(batch, rng);
}

namespace {

constexpr char kCacheMagic[8] = {'P', 'L', 'W', 'M', '0', '0', '0', '1'};

struct Fnv1a {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  }
  template <typename T>
  void value(const T& v) {
    bytes(&v, sizeof(T));
  }
};

}  // namespace

std::uint64_t weight_map_key(std::span<const MaskedFrame> frames, const SamplerParams& params) {
  Fnv1a f;
  f.value(frames.size());
  for (const auto& fr : frames) {
    f.value(fr.image.width);
    f.value(fr.image.height);
    f.bytes(fr.image.data.data(), fr.image.data.size() * sizeof(double));
    f.bytes(fr.mask.data(), fr.mask.size());
  }
  f.value(params.alpha);
  f.value(params.beta);
  f.value(params.window);
  f.value(static_cast<int>(params.mode));
  return f.h;
}

std::vector<WeightMap> cached_weight_maps(std::span<const MaskedFrame> frames,
                                          const SamplerParams& params,
                                          const std::filesystem::path& cache_dir) {
  const std::uint64_t key = weight_map_key(frames, params);
  std::ostringstream name;
  name << "weightmaps_" << std::hex << key << ".bin";
  const auto path = cache_dir / name.str();

  if (std::ifstream in{path, std::ios::binary}) {
    char magic[8];
    std::uint64_t stored = 0, count = 0, w = 0, h = 0;
    in.read(magic, 8);
    in.read(reinterpret_cast<char*>(&stored), 8);
    in.read(reinterpret_cast<char*>(&count), 8);
    in.read(reinterpret_cast<char*>(&w), 8);
    in.read(reinterpret_cast<char*>(&h), 8);
    if (in && std::memcmp(magic, kCacheMagic, 8) == 0 && stored == key && count == frames.size()) {
      std::vector<WeightMap> maps(count);
      bool ok = true;
      for (std::size_t i = 0; i < count && ok; ++i) {
        maps[i].frame = i;
        maps[i].width = w;
        maps[i].height = h;
        maps[i].weights.resize(w * h);
        in.read(reinterpret_cast<char*>(maps[i].weights.data()),
                static_cast<std::streamsize>(w * h * sizeof(double)));
        ok = static_cast<bool>(in);
        for (double v : maps[i].weights) maps[i].total += v;
      }
      if (ok) return maps;
    }
  }

  auto maps = weight_maps(frames, params);
  std::filesystem::create_directories(cache_dir);
  std::ofstream out(path, std::ios::binary);
  const std::uint64_t count = maps.size(), w = maps[0].width, h = maps[0].height;
  out.write(kCacheMagic, 8);
  out.write(reinterpret_cast<const char*>(&key), 8);
  out.write(reinterpret_cast<const char*>(&count), 8);
  out.write(reinterpret_cast<const char*>(&w), 8);
  out.write(reinterpret_cast<const char*>(&h), 8);
  for (const auto& m : maps)
    out.write(reinterpret_cast<const char*>(m.weights.data()),
              static_cast<std::streamsize>(m.weights.size() * sizeof(double)));
  return maps;
}

void export_weight_map(const WeightMap& map, const std::filesystem::path& png_path) {
  Image img(map.width, map.height, 1);
  const double peak = map.weights.empty() ? 0.0 : *std::max_element(map.weights.begin(), map.weights.end());
  for (std::size_t i = 0; i < map.weights.size(); ++i)
    img.data[i] = peak > 0 ? map.weights[i] / peak : 0.0;
  write_png8(png_path, img);
}

}  // namespace planefield
