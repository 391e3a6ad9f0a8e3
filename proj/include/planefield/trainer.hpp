#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "planefield/config.hpp"
#include "planefield/dataset.hpp"
#include "planefield/losses.hpp"
#include "planefield/model.hpp"
#include "planefield/optim.hpp"
#include "planefield/pixsampler.hpp"
#include "planefield/render.hpp"
#include "planefield/rng.hpp"

namespace planefield {

/// Everything a checkpoint restores.
struct TrainState {
  TrainConfig config;
  CameraModel camera;
  std::vector<double> frame_times;
  RadianceModel model;
  std::vector<RadianceModel> sample_nets;
  AdamState adam;
  std::size_t iter = 0;
  Rng rng;
};

/// Fresh models and optimizer for a dataset geometry.
TrainState make_train_state(const TrainConfig& config, const CameraModel& camera,
                            const std::vector<double>& frame_times);

/// Full model first, then each sample-net; the optimizer and checkpoint order.
std::vector<NamedTensor> trainable_tensors(TrainState& state);
std::vector<RadianceModel*> sample_net_ptrs(TrainState& state);

RenderSettings render_settings(const TrainState& state, bool stochastic);

/// Dataset-derived inputs that stay fixed during training.
struct TrainContext {
  const Dataset* data = nullptr;
  NdcMapping ndc;
  std::vector<WeightMap> maps;
  std::optional<BatchSampler> sampler;
  std::vector<std::vector<double>> depth_t;  // per frame, NDC t; NaN where invalid
};

TrainContext make_context(const Dataset& data, const TrainConfig& config,
                          const std::filesystem::path& cache_dir = {});

struct StepRecord {
  std::size_t iter = 0;
  double lr = 0;
  LossTerms terms;
  bool depth_enabled = false;
  double depth_grad_norm = 0;  // instrumented runs only
  double model_grad_norm = 0;
  double samplenet_grad_norm = 0;
  double seconds = 0;
};

struct StepOptions {
  bool instrument = false;
};

/// Depth supervision runs on the half-open interval [0, iters / 2).
bool depth_enabled_at(std::size_t iter, std::size_t iters);

StepRecord train_step(TrainState& state, const TrainContext& ctx, const StepOptions& options = {});

std::string metrics_csv_header();
std::string metrics_csv_row(const StepRecord& record);

struct TrainLoopOptions {
  std::filesystem::path out_dir;  // empty: no files
  std::size_t stop_at = 0;        // 0: config.iters
  bool instrument = false;
  std::function<void(const StepRecord&)> on_step;
};

/// Runs from state.iter to the stop iteration, appending metrics and writing
/// checkpoints every config.checkpoint_every iterations and at the end.
std::vector<StepRecord> train(TrainState& state, const TrainContext& ctx, const TrainLoopOptions& options);

std::string checkpoint_name(std::size_t iter);

}  // namespace planefield
