#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "planefield/losses.hpp"
#include "planefield/optim.hpp"
#include "planefield/pixsampler.hpp"

namespace planefield {

/// Every training hyperparameter. Defaults are the 9k preset.
struct TrainConfig {
  std::size_t iters = 9000;
  std::size_t batch_rays = 2048;
  double lr_init = 0.01;
  std::size_t lr_warmup_iters = 512;
  std::size_t feat_dim = 32;
  std::size_t oneblob_bins = 16;
  double huber_delta = 0.2;
  double sampler_alpha = 0.1;
  double sampler_beta = 1.0;
  std::size_t sampler_window = 25;
  AlphaMode sampler_mode = AlphaMode::LowerBound;
  std::vector<std::size_t> resolutions{64, 128, 256, 512};
  std::vector<std::size_t> samplenet_resolutions{128, 256};
  std::size_t n_coarse = 64;
  std::size_t n_fine = 32;
  LossWeights loss;
  std::uint64_t seed = 0;

  std::size_t decoder_width = 64;
  std::size_t decoder_layers = 2;
  std::size_t samplenet_width = 32;
  std::size_t samplenet_layers = 1;
  bool static_only = false;
  bool samplenet_photometric = false;
  std::size_t checkpoint_every = 1000;

  void validate() const;
  Schedule schedule() const { return {iters, lr_warmup_iters, lr_init, 0.01}; }
  SamplerParams sampler() const { return {sampler_alpha, sampler_beta, sampler_window, sampler_mode}; }
};

enum class Preset { Iters9k, Iters32k };
TrainConfig preset_config(Preset preset);

/// Flat `key = value` text; `#` starts a comment; lists are comma separated.
using ConfigEntries = std::map<std::string, std::string>;

ConfigEntries parse_config_text(const std::string& text);
ConfigEntries read_config_file(const std::filesystem::path& path);
/// Applies entries on top of `config`; unknown keys or malformed values throw
/// ContractViolation.
void apply_config(TrainConfig& config, const ConfigEntries& entries);
ConfigEntries to_entries(const TrainConfig& config);
std::string format_config(const TrainConfig& config);

}  // namespace planefield
