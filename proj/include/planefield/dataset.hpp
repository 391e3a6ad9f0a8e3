#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "planefield/camera.hpp"
#include "planefield/pixsampler.hpp"

namespace planefield {

/// A single-viewpoint video with tool masks and optional metric depth.
struct Dataset {
  std::vector<MaskedFrame> frames;
  std::vector<std::vector<double>> depth;  // per frame H x W, scene units, 0 = invalid; empty if absent
  CameraModel camera;
  std::vector<double> times;  // normalized to [-1, 1]
  double depth_scale = 0.001;
  double fps = 30.0;
  std::vector<std::string> warnings;

  std::size_t frame_count() const { return frames.size(); }
  bool has_depth() const { return !depth.empty(); }
};

/// tau_i evenly spaced in [-1, 1]; a single frame gets 0.
std::vector<double> normalized_times(std::size_t count);
/// Affine map of strictly increasing timestamps onto [-1, 1].
std::vector<double> normalized_times(const std::vector<double>& timestamps);

/// Reads images/, masks/, depth/ and meta.json. Every problem found is
/// reported together in one ValidationError.
Dataset load_dataset(const std::filesystem::path& dir);

/// Writes the directory layout read by load_dataset.
void write_dataset(const std::filesystem::path& dir, const Dataset& data);

NdcMapping ndc_bounds(const Dataset& data);

std::string frame_file_name(std::size_t index);

}  // namespace planefield
