// Acceptance suite: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "planefield/checkpoint.hpp"
#include "planefield/cli.hpp"
#include "planefield/errors.hpp"
#include "planefield/grad_check.hpp"
#include "planefield/losses.hpp"
#include "planefield/metrics.hpp"
#include "planefield/pixsampler.hpp"
#include "planefield/render.hpp"
#include "planefield/synth.hpp"
#include "planefield/trainer.hpp"

using namespace planefield;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 1. Total-loss gradients against central differences on a micro-model.
Outcome gradient_integrity() {
  const auto t0 = Clock::now();
  RadianceModel model = make_model({{8}, 4, 3, 8, 16, 2}, 11);
  RadianceModel net = make_model({{8}, 4, 3, 8, 8, 1}, 12);
  Rng rng(13);
  for (auto* m : {&model, &net})
    for (auto& p : m->field.levels[0].planes)
      if (!p.is_space())
        for (double& v : p.data.values()) v = rng.uniform(0.85, 1.15);

  CameraModel cam;
  cam.width = cam.height = 8;
  cam.fx = cam.fy = 8;
  cam.cx = cam.cy = 4;
  const NdcMapping ndc = ndc_bounds(cam);
  const std::vector<Ray> rays{make_ray(cam, ndc, 2, 3, -0.5, 0), make_ray(cam, ndc, 5, 4, 0.5, 2)};
  BatchTargets targets;
  targets.rgb = Tensor({2, 3}, std::vector<double>{0.7, 0.2, 0.4, 0.1, 0.8, 0.5});
  targets.depth_t = {0.5, 0.7};
  targets.valid = {1, 1};
  RenderSettings rs;
  rs.n_coarse = 16;
  rs.n_fine = 8;
  rs.stochastic = false;
  LossWeights w;
  w.w_tv_space = 0.05;
  w.w_tv_spacetime = 0.05;
  w.w_smooth_time = 0.05;
  w.w_time_invariant = 0.05;
  const DepthLossConfig depth{0.2, true};

  // Production path: sample positions and histogram targets come from the live render.
  auto params = named_tensors(model, "model.");
  for (auto& t : named_tensors(net, "net.")) params.push_back(t);
  for (auto& t : params) t.tensor->drop_grad();
  RenderBatch base;
  std::vector<double> fine_weights;
  Shape fine_shape;
  {
    ad::Graph g;
    const BoundModel m = bind_model(g, model);
    const BoundModel n[] = {bind_model(g, net)};
    base = render_rays(g, m, n, rays, rs);
    const Tensor& fw = base.fine.result.weights.value();
    fine_weights.assign(fw.values().begin(), fw.values().end());
    fine_shape = fw.shape();
    g.backward(total_loss(g, base, targets, m, n, w, depth, {}, nullptr));
  }
  std::vector<std::vector<double>> production;
  for (auto& t : params) {
    const auto gr = t.tensor->has_grad() ? std::as_const(*t.tensor).grad() : std::span<const double>{};
    production.emplace_back(gr.begin(), gr.end());
    production.back().resize(t.tensor->size(), 0.0);
    t.tensor->drop_grad();
  }

  // The same loss with the stop-gradient inputs (sample positions, histogram
  // targets) held at the base point, so finite differences see the function
  // the analytic gradient describes.
  const ad::LossBuilder builder = [&](ad::Graph& g) {
    const BoundModel m = bind_model(g, model);
    const BoundModel n[] = {bind_model(g, net)};
    RenderBatch b;
    b.proposals.push_back(shade(g, n[0], base.proposals[0].samples));
    b.fine = shade(g, m, base.fine.samples);
    b.fine.result.weights = g.constant(Tensor(fine_shape, fine_weights));
    return total_loss(g, b, targets, m, n, w, depth, {}, nullptr);
  };

  // Builder gradient at the base point must equal the production gradient.
  {
    ad::Graph g;
    g.backward(builder(g));
  }
  double mismatch = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto gr = params[i].tensor->has_grad() ? std::as_const(*params[i].tensor).grad() : std::span<const double>{};
    for (std::size_t k = 0; k < production[i].size(); ++k) {
      const double b = k < gr.size() ? gr[k] : 0.0;
      mismatch = std::max(mismatch, std::fabs(b - production[i][k]) / std::max(1e-12, std::fabs(production[i][k])));
    }
    params[i].tensor->drop_grad();
  }

  // 50 probes drawn uniformly over plane entries and decoder weights of both models.
  std::vector<Tensor*> pool;
  std::vector<std::size_t> offsets{0};
  for (auto& t : params) {
    pool.push_back(t.tensor);
    offsets.push_back(offsets.back() + t.tensor->size());
  }
  std::vector<ad::Probe> probes;
  Rng pick(99);
  while (probes.size() < 50) {
    const std::size_t flat = pick.below(offsets.back());
    const auto it = std::upper_bound(offsets.begin(), offsets.end(), flat) - 1;
    const std::size_t ti = static_cast<std::size_t>(it - offsets.begin());
    probes.push_back({pool[ti], flat - *it});
  }
  std::size_t planes = 0;
  for (const auto& p : probes)
    for (auto* m : {&model, &net})
      for (auto& pl : m->field.levels[0].planes)
        if (p.tensor == &pl.data) ++planes;

  const auto report = ad::grad_check(builder, probes, 1e-4, 1e-3);
  const double secs = seconds_since(t0);
  const bool pass = report.passed && mismatch <= 1e-10 && secs < 10.0;
  return {pass, fmt("max rel err %.3g over %zu probes (%zu plane, %zu decoder; %zu kinks), production/frozen "
                    "gradient agreement %.2g, %.2f s (limit 1e-3, 10 s)",
                    report.max_rel_error, probes.size(), planes, probes.size() - planes, report.kinks, mismatch, secs)};
}

// 2. Homogeneous medium closed forms.
Outcome rendering_oracle() {
  const auto t0 = Clock::now();
  Ray ray;
  ray.origin = {0, 0, -1};
  ray.direction = {0, 0, 2};
  const auto pts = stratified_samples(ray, 1024, nullptr);
  std::vector<ShadedSample> s;
  for (const auto& p : pts) s.push_back({1.0, {1, 1, 1}, p.t, p.delta});
  const RenderOutput out = composite(s);
  const double want_c = 1 - std::exp(-1.0), want_d = 1 - 2 * std::exp(-1.0);
  const double ec = std::fabs(out.color[0] - want_c), ed = std::fabs(out.depth - want_d);
  const double secs = seconds_since(t0);
  return {ec <= 1e-3 && ed <= 1e-3 && secs < 1.0,
          fmt("|C - (1 - 1/e)| = %.2e, |D - (1 - 2/e)| = %.2e, %.3f s (limit 1e-3, 1 s)", ec, ed, secs)};
}

// 3. Bilinear interpolation and fusion against textbook evaluations.
Outcome interpolation_oracles() {
  FieldSet f = init_fieldset({{9, 17}, 4, 12}, 3);
  Rng rng(4);
  for (auto& l : f.levels)
    for (auto& p : l.planes)
      for (double& v : p.data.values()) v = rng.uniform(0.2, 1.5);
  double bil = 0;
  for (int q = 0; q < 1000; ++q) {
    const auto& plane = f.levels[q % 2].planes[(q / 2) % 6];
    const double u = rng.uniform(-1, 1), v = rng.uniform(-1, 1);
    const auto got = bilerp(plane, u, v);
    const auto want = oracle::textbook_bilerp(plane, u, v);
    for (std::size_t k = 0; k < got.size(); ++k) bil = std::max(bil, std::fabs(got[k] - want[k]));
  }
  double fus = 0;
  for (int q = 0; q < 1000; ++q) {
    const Point4 p{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const auto fused = fuse(f, p);
    for (std::size_t l = 0; l < f.levels.size(); ++l)
      for (std::size_t d = 0; d < f.feat_dim; ++d) {
        double prod = 1;
        for (const auto& plane : f.levels[l].planes) {
          const auto uv = project(plane.axes, p);
          prod *= oracle::textbook_bilerp(plane, uv[0], uv[1])[d];
        }
        fus = std::max(fus, std::fabs(fused[l * f.feat_dim + d] - prod));
      }
  }
  return {bil <= 1e-12 && fus <= 1e-12,
          fmt("bilerp max err %.2e on 1000 queries, fuse max err %.2e on 1000 queries (limit 1e-12)", bil, fus)};
}

// 4. Draw frequencies against normalized weights from a direct evaluation.
Outcome sampler_distribution() {
  // 3-frame toy: 3x2 pixels; pixel 0 visible only in frame 1, pixel 5 a tool
  // pixel in frame 2, moving content at pixels 2 and 3.
  const std::size_t w = 3, h = 2, n = w * h;
  std::vector<MaskedFrame> frames(3);
  const double colors[3][6] = {{0.2, 0.2, 0.1, 0.9, 0.5, 0.5}, {0.2, 0.2, 0.6, 0.7, 0.5, 0.5},
                               {0.2, 0.2, 0.9, 0.1, 0.5, 0.8}};
  for (std::size_t i = 0; i < 3; ++i) {
    frames[i].image = Image(w, h, 3);
    frames[i].mask.assign(n, 1);
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t c = 0; c < 3; ++c) frames[i].image.data[p * 3 + c] = colors[i][p] * (1.0 - 0.1 * double(c));
  }
  frames[0].mask[0] = frames[2].mask[0] = 0;
  frames[2].mask[5] = 0;
  const double alpha = 0.1, beta = 1.0;
  const std::size_t window = 2;

  // Direct evaluation: Omega_i * max(alpha, max_{|j-i|<n} L1(I_i M_i - I_j M_j) / 3).
  std::vector<double> oracle(3 * n);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t p = 0; p < n; ++p) {
      double visible = 0;
      for (std::size_t j = 0; j < 3; ++j) visible += frames[j].mask[p];
      const double omega = visible == 0 ? 0.0 : beta * frames[i].mask[p] * 3.0 / visible;
      double diff = 0;
      for (std::size_t j = 0; j < 3; ++j) {
        if (std::abs(int(j) - int(i)) >= int(window)) continue;
        double l1 = 0;
        for (std::size_t c = 0; c < 3; ++c)
          l1 += std::fabs(frames[i].image.data[p * 3 + c] * frames[i].mask[p] -
                          frames[j].image.data[p * 3 + c] * frames[j].mask[p]);
        diff = std::max(diff, l1 / 3.0);
      }
      oracle[i * n + p] = omega * std::max(alpha, diff);
    }
  double total = 0;
  for (double v : oracle) total += v;

  const auto maps = weight_maps(frames, {alpha, beta, window, AlphaMode::LowerBound});
  Rng rng(17);
  const std::size_t draws = 1000000;
  std::vector<double> counts(3 * n, 0);
  for (const auto& d : draw_batch(maps, draws, rng)) counts[d.frame * n + d.row * w + d.col] += 1;
  double l1 = 0;
  std::size_t tool_hits = 0;
  for (std::size_t k = 0; k < 3 * n; ++k) {
    l1 += std::fabs(counts[k] / double(draws) - oracle[k] / total);
    if (frames[k / n].mask[k % n] == 0) tool_hits += std::size_t(counts[k]);
  }
  return {l1 <= 0.02 && tool_hits == 0,
          fmt("L1 distance %.4f at 1e6 draws (limit 0.02), tool-pixel draws %zu", l1, tool_hits)};
}

// 5. Desk-scale training and the static-only ablation.
Outcome desk_training(const fs::path& work) {
  SynthSpec spec = default_synth_spec(32, 32, 20, 0);
  spec.tool_bar = true;
  const auto scene = synth_scene(spec);
  TrainConfig cfg;
  cfg.iters = 2000;
  cfg.resolutions = {32, 64};
  cfg.samplenet_resolutions = {32};
  cfg.batch_rays = 128;
  cfg.n_coarse = 32;
  cfg.n_fine = 24;
  cfg.lr_warmup_iters = 100;
  cfg.checkpoint_every = 0;

  auto run = [&](bool static_only, double& secs) {
    TrainConfig c = cfg;
    c.static_only = static_only;
    const auto t0 = Clock::now();
    TrainState state = make_train_state(c, scene.data.camera, scene.data.times);
    const TrainContext ctx = make_context(scene.data, c, work / "cache");
    train(state, ctx, {work / (static_only ? "static" : "full")});
    secs = seconds_since(t0);
    return evaluate(state, scene.data);
  };
  double full_secs = 0, static_secs = 0;
  const EvalReport full = run(false, full_secs);
  const EvalReport still = run(true, static_secs);

  // Frames with motion: the tissue image differs from a neighbouring frame.
  const auto& fr = scene.data.frames;
  double gap_sum = 0;
  std::size_t motion = 0;
  for (std::size_t k = 0; k < full.frames.size(); ++k) {
    const std::size_t f = full.frames[k].frame;
    bool moved = false;
    for (std::size_t j : {f == 0 ? f : f - 1, std::min(f + 1, fr.size() - 1)}) {
      if (j == f) continue;
      for (std::size_t p = 0; p < fr[f].mask.size() && !moved; ++p) {
        if (!fr[f].mask[p] || !fr[j].mask[p]) continue;
        for (std::size_t c = 0; c < 3; ++c)
          if (std::fabs(fr[f].image.data[p * 3 + c] - fr[j].image.data[p * 3 + c]) > 1.0 / 255) moved = true;
      }
    }
    if (!moved) continue;
    ++motion;
    gap_sum += full.frames[k].psnr - still.frames[k].psnr;
  }
  const double gap = motion ? gap_sum / double(motion) : 0.0;
  const bool pass = full_secs <= 300.0 && full.psnr_mean >= 28.0 && motion > 0 && gap >= 2.0;
  return {pass, fmt("masked PSNR %.2f dB (limit 28), training %.1f s (limit 300), static-only %.2f dB, gap on %zu "
                    "motion frames %.2f dB (limit 2)",
                    full.psnr_mean, full_secs, still.psnr_mean, motion, gap)};
}

// 6. Depth supervision contributes gradient only during the first half.
Outcome warmup_contract(const fs::path& work) {
  auto scene = testing::tiny_scene(4, true);
  TrainConfig cfg = testing::tiny_config();
  cfg.iters = 40;
  cfg.lr_warmup_iters = 4;
  TrainState state = make_train_state(cfg, scene.data.camera, scene.data.times);
  const TrainContext ctx = make_context(scene.data, cfg);
  TrainLoopOptions opt;
  opt.out_dir = work / "warmup";
  opt.instrument = true;
  const auto records = train(state, ctx, opt);
  std::size_t late_nonzero = 0, early_nonzero = 0;
  double early_max = 0;
  for (const auto& r : records) {
    if (r.iter >= cfg.iters / 2) {
      if (r.depth_grad_norm != 0.0) ++late_nonzero;
    } else if (r.depth_grad_norm > 0.0) {
      ++early_nonzero;
      early_max = std::max(early_max, r.depth_grad_norm);
    }
  }
  return {late_nonzero == 0 && early_nonzero > 0,
          fmt("%zu iterations: depth gradient norm non-zero at %zu of %zu early steps (max %.3g), exactly zero at "
              "%zu of %zu late steps",
              records.size(), early_nonzero, cfg.iters / 2, early_max, cfg.iters / 2 - late_nonzero,
              cfg.iters - cfg.iters / 2)};
}

/// Dense N^3 x D voxel grid: the cost the factorization avoids.
struct DenseGrid {
  std::size_t res = 0, feat_dim = 0;
  std::vector<double> data;
  DenseGrid(std::size_t n, std::size_t d) : res(n), feat_dim(d), data(n * n * n * d, 0.0) {}
  std::size_t parameter_count() const { return data.size(); }
};

// 7. Space-plane storage grows with N^2, a dense grid with N^3.
Outcome complexity_claim() {
  const std::size_t d = 4;
  std::vector<double> plane_counts, grid_counts;
  bool exact = true;
  for (std::size_t n : {32, 64, 128}) {
    const FieldSet f = init_fieldset({{n}, d, 20}, 1);
    const std::size_t got = space_parameter_count(f);
    std::size_t measured = 0;
    for (const auto& p : f.levels[0].planes)
      if (p.is_space()) measured += p.data.size();
    exact = exact && got == 3 * n * n * d && measured == got;
    plane_counts.push_back(double(measured));
    grid_counts.push_back(double(DenseGrid(n, d).parameter_count()));
  }
  const double p1 = plane_counts[1] / plane_counts[0], p2 = plane_counts[2] / plane_counts[1];
  const double g1 = grid_counts[1] / grid_counts[0], g2 = grid_counts[2] / grid_counts[1];
  return {exact && p1 == 4.0 && p2 == 4.0 && g1 == 8.0 && g2 == 8.0,
          fmt("space-plane counts %.0f/%.0f/%.0f (3N^2D %s), ratios %.1f %.1f; dense grid ratios %.1f %.1f",
              plane_counts[0], plane_counts[1], plane_counts[2], exact ? "exact" : "MISMATCH", p1, p2, g1, g2)};
}

// 8. Same-seed runs and resumed runs produce identical checkpoints.
Outcome determinism(const fs::path& work) {
  auto scene = testing::tiny_scene(4, true);
  TrainConfig cfg = testing::tiny_config();
  cfg.iters = 16;
  const TrainContext ctx = make_context(scene.data, cfg);
  auto fresh = [&] { return make_train_state(cfg, scene.data.camera, scene.data.times); };
  TrainState a = fresh(), b = fresh();
  train(a, ctx, {work / "det_a"});
  train(b, ctx, {work / "det_b"});
  std::size_t compared = 0, same = 0;
  for (std::size_t k = cfg.checkpoint_every; k <= cfg.iters; k += cfg.checkpoint_every) {
    ++compared;
    if (slurp(work / "det_a" / checkpoint_name(k)) == slurp(work / "det_b" / checkpoint_name(k))) ++same;
  }
  TrainState c = fresh();
  train(c, ctx, {work / "det_c", 6});
  TrainState resumed = load_checkpoint(work / "det_c" / checkpoint_name(6));
  train(resumed, ctx, {work / "det_c"});
  std::size_t resume_same = 0, resume_compared = 0;
  for (std::size_t k : {8, 12, 16}) {
    ++resume_compared;
    if (slurp(work / "det_a" / checkpoint_name(k)) == slurp(work / "det_c" / checkpoint_name(k))) ++resume_same;
  }
  const bool final_same = slurp(work / "det_a" / "final.bin") == slurp(work / "det_c" / "final.bin");
  return {same == compared && resume_same == resume_compared && final_same,
          fmt("same-seed checkpoints identical %zu/%zu; resumed-at-6 checkpoints identical %zu/%zu, final %s", same,
              compared, resume_same, resume_compared, final_same ? "identical" : "different")};
}

// 9. Metric fixtures.
Outcome metrics_oracles() {
  std::vector<std::string> failed;
  auto expect = [&](bool ok, const char* what) {
    if (!ok) failed.push_back(what);
  };
  Image a(8, 8, 3, 0.5), b(8, 8, 3, 0.6), black(8, 8, 3, 0.0);
  expect(std::fabs(psnr(a, b) - 20.0) <= 1e-9, "psnr 20 dB");
  expect(psnr(a, a) == kPsnrCap, "psnr cap");
  expect(std::fabs(psnr(a, black) - 6.0206) <= 1e-4, "psnr 6.0206 dB");
  bool threw = false;
  try {
    psnr(a, b, std::vector<std::uint8_t>(64, 0));
  } catch (const ContractViolation&) {
    threw = true;
  }
  expect(threw, "psnr empty mask");
  Rng rng(1);
  Image x(16, 16, 3), y(16, 16, 3);
  for (double& v : x.data) v = rng.uniform();
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] = std::clamp(x.data[i] + rng.uniform(-0.2, 0.2), 0.0, 1.0);
  Image neg = x;
  for (double& v : neg.data) v = 1.0 - v;
  expect(std::fabs(ssim(x, x) - 1.0) <= 1e-12, "ssim identical");
  expect(ssim(x, neg) < 0, "ssim negative");
  const double err = std::fabs(ssim(x, y) - oracle::ssim_reference(x, y));
  expect(err <= 1e-6, "ssim 16x16 fixture");
  std::string detail = fmt("7 fixtures, 16x16 SSIM deviation from direct evaluation %.2e (limit 1e-6)", err);
  for (const auto& f : failed) detail += "; failed: " + f;
  return {failed.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  const fs::path work = fs::temp_directory_path() / "planefield_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient integrity", gradient_integrity},
      {"rendering oracle", rendering_oracle},
      {"interpolation and fusion oracles", interpolation_oracles},
      {"sampler distribution", sampler_distribution},
      {"desk-scale training", [&] { return desk_training(work); }},
      {"depth warm-up contract", [&] { return warmup_contract(work); }},
      {"complexity claim", complexity_claim},
      {"determinism and persistence", [&] { return determinism(work); }},
      {"metrics oracles", metrics_oracles},
  };
  // Optional arguments select criteria by number; default runs all.
  std::vector<bool> selected(criteria.size(), argc <= 1);
  for (int a = 1; a < argc; ++a) {
    const int k = std::atoi(argv[a]);
    if (k >= 1 && k <= int(criteria.size())) selected[std::size_t(k - 1)] = true;
  }
  int failures = 0, ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    ++ran;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("criterion %zu %s: %s: %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria failed\n", failures, ran);
  return failures == 0 ? 0 : 1;
}
