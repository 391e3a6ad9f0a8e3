#pragma once

#include <span>
#include <string>

#include "planefield/dataset.hpp"
#include "planefield/image_io.hpp"
#include "planefield/metrics.hpp"
#include "planefield/trainer.hpp"

namespace planefield {

/// Deterministic full-frame render at time tau.
Image render_frame(TrainState& state, double tau, std::vector<double>* depth_t = nullptr);

/// Per-frame PSNR/SSIM of renders against the dataset frames, over tissue
/// pixels unless `whole_image`.
EvalReport evaluate(TrainState& state, const Dataset& data, bool whole_image = false);

/// Keeps freed heap blocks mapped so each training step reuses the previous
/// step's tape buffers instead of faulting fresh pages in.
void tune_allocator();

/// Command-line entry point; returns the process exit code.
int run(int argc, const char* const* argv);

}  // namespace planefield
