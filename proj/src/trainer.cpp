#include "planefield/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <utility>

#include "planefield/checkpoint.hpp"
#include "planefield/errors.hpp"

namespace planefield {

TrainState make_train_state(const TrainConfig& config, const CameraModel& camera,
                            const std::vector<double>& frame_times) {
  config.validate();
  camera.validate();
  if (frame_times.empty()) throw ContractViolation("make_train_state: no frames");
  TrainState s;
  s.config = config;
  s.camera = camera;
  s.frame_times = frame_times;

  ModelSpec spec;
  spec.resolutions = config.resolutions;
  spec.feat_dim = config.feat_dim;
  spec.frame_count = frame_times.size();
  spec.oneblob_bins = config.oneblob_bins;
  spec.hidden_width = config.decoder_width;
  spec.hidden_layers = config.decoder_layers;
  s.model = make_model(spec, derive_seed(config.seed, 10));
  for (std::size_t i = 0; i < config.samplenet_resolutions.size(); ++i) {
    ModelSpec ns = spec;
    ns.resolutions = {config.samplenet_resolutions[i]};
    ns.hidden_width = config.samplenet_width;
    ns.hidden_layers = config.samplenet_layers;
    s.sample_nets.push_back(make_model(ns, derive_seed(config.seed, 20 + i)));
  }
  if (config.static_only) {
    set_trainable(s.model.field, false);
    for (auto& net : s.sample_nets) set_trainable(net.field, false);
  }
  s.adam = make_adam(trainable_tensors(s));
  s.rng = Rng(derive_seed(config.seed, 30));
  return s;
}

std::vector<NamedTensor> trainable_tensors(TrainState& state) {
  auto out = named_tensors(state.model, "model.");
  for (std::size_t i = 0; i < state.sample_nets.size(); ++i) {
    auto more = named_tensors(state.sample_nets[i], "samplenet" + std::to_string(i) + ".");
    out.insert(out.end(), more.begin(), more.end());
  }
  return out;
}

std::vector<RadianceModel*> sample_net_ptrs(TrainState& state) {
  std::vector<RadianceModel*> out;
  for (auto& net : state.sample_nets) out.push_back(&net);
  return out;
}

RenderSettings render_settings(const TrainState& state, bool stochastic) {
  RenderSettings s;
  s.n_coarse = state.config.n_coarse;
  s.n_fine = state.config.n_fine;
  s.stochastic = stochastic;
  s.seed = state.config.seed;
  s.step = state.iter;
  return s;
}

TrainContext make_context(const Dataset& data, const TrainConfig& config, const std::filesystem::path& cache_dir) {
  if (data.frames.empty()) throw ContractViolation("make_context: empty dataset");
  TrainContext ctx;
  ctx.data = &data;
  ctx.ndc = ndc_bounds(data);
  ctx.maps = cache_dir.empty() ? weight_maps(data.frames, config.sampler())
                               : cached_weight_maps(data.frames, config.sampler(), cache_dir);
  ctx.sampler.emplace(ctx.maps);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t f = 0; f < data.frames.size(); ++f) {
    std::vector<double> t(data.camera.width * data.camera.height, nan);
    if (data.has_depth())
      for (std::size_t p = 0; p < t.size(); ++p)
        if (data.depth[f][p] > ctx.ndc.near) t[p] = ctx.ndc.depth_to_t(data.depth[f][p]);
    ctx.depth_t.push_back(std::move(t));
  }
  return ctx;
}

bool depth_enabled_at(std::size_t iter, std::size_t iters) { return iter < iters / 2; }

namespace {

struct Batch {
  std::vector<Ray> rays;
  BatchTargets targets;
};

Batch assemble_batch(TrainState& state, const TrainContext& ctx) {
  const Dataset& data = *ctx.data;
  const auto draws = ctx.sampler->draw(state.config.batch_rays, state.rng);
  Batch b;
  b.targets.rgb = Tensor({draws.size(), 3}, 0.0);
  auto rgb = b.targets.rgb.values();
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const auto& d = draws[i];
    const auto& frame = data.frames[d.frame];
    b.rays.push_back(make_ray(data.camera, ctx.ndc, d.row, d.col, frame.time, d.frame));
    for (std::size_t c = 0; c < 3; ++c) rgb[i * 3 + c] = frame.image.at(d.row, d.col, c);
    const double t = ctx.depth_t[d.frame][d.row * data.camera.width + d.col];
    const bool ok = std::isfinite(t);
    b.targets.depth_t.push_back(ok ? t : 0.0);
    b.targets.valid.push_back(ok ? 1 : 0);
  }
  return b;
}

void drop_grads(std::span<const NamedTensor> params) {
  for (const auto& p : params) p.tensor->drop_grad();
}

LossTerms backprop(TrainState& state, const Batch& batch, bool depth_on) {
  ad::Graph g;
  BoundModel model = bind_model(g, state.model);
  std::vector<BoundModel> nets;
  for (auto& n : state.sample_nets) nets.push_back(bind_model(g, n));
  const RenderBatch out = render_rays(g, model, nets, batch.rays, render_settings(state, true));
  LossTerms terms;
  ad::Var total = total_loss(g, out, batch.targets, model, nets, state.config.loss,
                             {state.config.huber_delta, depth_on},
                             {state.config.samplenet_photometric}, &terms);
  g.backward(total);
  return terms;
}

std::vector<std::vector<double>> snapshot_grads(std::span<const NamedTensor> params) {
  std::vector<std::vector<double>> out;
  for (const auto& p : params) {
    if (p.tensor->has_grad()) {
      auto g = p.tensor->grad();
      out.emplace_back(g.begin(), g.end());
    } else {
      out.emplace_back(p.tensor->size(), 0.0);
    }
  }
  return out;
}

}  // namespace

StepRecord train_step(TrainState& state, const TrainContext& ctx, const StepOptions& options) {
  if (!ctx.data || !ctx.sampler) throw ContractViolation("train_step: context not initialized");
  if (state.iter >= state.config.iters) throw ContractViolation("train_step: training already complete");
  const auto start = std::chrono::steady_clock::now();
  StepRecord rec;
  rec.iter = state.iter;
  rec.lr = lr_at(state.iter, state.config.schedule());
  rec.depth_enabled = depth_enabled_at(state.iter, state.config.iters);

  const Batch batch = assemble_batch(state, ctx);
  const auto params = trainable_tensors(state);

  std::vector<std::vector<double>> without_depth;
  if (options.instrument) {
    drop_grads(params);
    backprop(state, batch, false);
    without_depth = snapshot_grads(params);
  }
  drop_grads(params);
  rec.terms = backprop(state, batch, rec.depth_enabled);
  if (options.instrument) {
    const auto with_depth = snapshot_grads(params);
    double sq = 0;
    for (std::size_t i = 0; i < with_depth.size(); ++i)
      for (std::size_t k = 0; k < with_depth[i].size(); ++k) {
        const double d = with_depth[i][k] - without_depth[i][k];
        sq += d * d;
      }
    rec.depth_grad_norm = std::sqrt(sq);
  }

  const std::size_t model_count = named_tensors(state.model, "").size();
  double sq[2] = {0, 0};
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].tensor->has_grad())
      for (double g : std::as_const(*params[i].tensor).grad()) sq[i < model_count ? 0 : 1] += g * g;
  rec.model_grad_norm = std::sqrt(sq[0]);
  rec.samplenet_grad_norm = std::sqrt(sq[1]);

  adam_step(params, state.adam, rec.lr);
  drop_grads(params);
  ++state.iter;
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

std::string metrics_csv_header() { return "iter,lr,total,color,depth,tv_space,tv_st,smooth,tinv,hist,seconds"; }

std::string metrics_csv_row(const StepRecord& r) {
  char buf[512];
  const auto& t = r.terms;
  std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.6f", r.iter, r.lr, t.total,
                t.color, t.depth, t.tv_space, t.tv_st, t.smooth, t.tinv, t.hist, r.seconds);
  return buf;
}

std::string checkpoint_name(std::size_t iter) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_%06zu.bin", iter);
  return buf;
}

std::vector<StepRecord> train(TrainState& state, const TrainContext& ctx, const TrainLoopOptions& options) {
  const std::size_t stop = options.stop_at == 0 ? state.config.iters : std::min(options.stop_at, state.config.iters);
  std::ofstream csv;
  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    const auto path = options.out_dir / "metrics.csv";
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    csv.open(path, std::ios::app);
    if (fresh) csv << metrics_csv_header() << "\n";
  }
  std::vector<StepRecord> records;
  const std::size_t every = state.config.checkpoint_every;
  while (state.iter < stop) {
    records.push_back(train_step(state, ctx, {options.instrument}));
    const auto& rec = records.back();
    for (double v : {rec.terms.total, rec.terms.color, rec.terms.depth, rec.terms.hist})
      if (!std::isfinite(v)) throw NumericFault("train: non-finite loss at iteration " + std::to_string(rec.iter));
    if (csv.is_open()) csv << metrics_csv_row(rec) << "\n" << std::flush;
    if (options.on_step) options.on_step(rec);
    if (!options.out_dir.empty() && every > 0 && state.iter % every == 0 && state.iter < stop)
      save_checkpoint(state, options.out_dir / checkpoint_name(state.iter));
  }
  if (!options.out_dir.empty()) {
    save_checkpoint(state, options.out_dir / checkpoint_name(state.iter));
    save_checkpoint(state, options.out_dir / "final.bin");
  }
  return records;
}

}  // namespace planefield
