#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "planefield/image_io.hpp"
#include "planefield/rng.hpp"

namespace planefield {

/// One video frame with its tissue mask (1 = tissue visible, 0 = tool).
struct MaskedFrame {
  Image image;                     // H x W x 3
  std::vector<std::uint8_t> mask;  // H x W
  double time = 0.0;
};

struct WeightMap {
  std::size_t frame = 0;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> weights;  // H x W, non-negative
  double total = 0.0;
};

/// How the temporal-difference term is combined with alpha.
enum class AlphaMode {
  LowerBound,  // max(diff, alpha): unchanged pixels keep weight alpha
  Cap,         // min(diff, alpha): the literal printed composition
};

struct SamplerParams {
  double alpha = 0.1;
  double beta = 1.0;
  std::size_t window = 25;
  AlphaMode mode = AlphaMode::LowerBound;
};

/// Per-frame occlusion scaling beta * M_i * T / sum_j M_j; pixels never
/// visible in any frame get 0.
std::vector<std::vector<double>> occlusion_scale(std::span<const std::vector<std::uint8_t>> masks,
                                                 double beta);

std::vector<WeightMap> weight_maps(std::span<const MaskedFrame> frames, const SamplerParams& params);

struct PixelDraw {
  std::size_t frame = 0;
  std::size_t row = 0;
  std::size_t col = 0;

  bool operator==(const PixelDraw&) const = default;
};

/// Multinomial sampler over the weights of every pixel of every frame.
class BatchSampler {
 public:
  explicit BatchSampler(std::span<const WeightMap> maps);

  std::vector<PixelDraw> draw(std::size_t batch, Rng& rng) const;
  double total() const { return cdf_.empty() ? 0.0 : cdf_.back(); }

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> cdf_;
};

std::vector<PixelDraw> draw_batch(std::span<const WeightMap> maps, std::size_t batch, Rng& rng);

/// Content hash of frames, masks and sampler parameters (cache key).
std::uint64_t weight_map_key(std::span<const MaskedFrame> frames, const SamplerParams& params);

/// Loads weight maps from `cache_dir` when a file for this content key
/// exists, otherwise builds and stores them.
std::vector<WeightMap> cached_weight_maps(std::span<const MaskedFrame> frames,
                                          const SamplerParams& params,
                                          const std::filesystem::path& cache_dir);

/// Max-normalized 8-bit grayscale image of one map.
void export_weight_map(const WeightMap& map, const std::filesystem::path& png_path);

}  // namespace planefield
