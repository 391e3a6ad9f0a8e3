#pragma once

#include <filesystem>
#include <string>

#include "planefield/config.hpp"
#include "planefield/synth.hpp"

namespace planefield::testing {

/// Smallest configuration that exercises every training path.
inline TrainConfig tiny_config() {
  TrainConfig c;
  c.iters = 12;
  c.batch_rays = 16;
  c.lr_warmup_iters = 2;
  c.feat_dim = 2;
  c.oneblob_bins = 4;
  c.resolutions = {4, 8};
  c.samplenet_resolutions = {4};
  c.n_coarse = 8;
  c.n_fine = 6;
  c.decoder_width = 8;
  c.decoder_layers = 1;
  c.samplenet_width = 6;
  c.samplenet_layers = 1;
  c.checkpoint_every = 4;
  c.seed = 3;
  return c;
}

inline SynthScene tiny_scene(std::size_t frames = 3, bool tool = true) {
  SynthSpec spec = default_synth_spec(8, 8, frames, 1);
  spec.tool_bar = tool;
  spec.steps = 256;
  return synth_scene(spec);
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("planefield_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace planefield::testing
