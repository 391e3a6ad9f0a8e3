#include "planefield/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include "planefield/errors.hpp"

namespace planefield {

void LossWeights::validate() const {
  if (!(w_color > 0)) throw ContractViolation("loss weights: w_color must be positive");
  for (double w : {w_depth, w_tv_space, w_tv_spacetime, w_smooth_time, w_time_invariant, w_histogram})
    if (!(w >= 0)) throw ContractViolation("loss weights must be non-negative");
}

double color_loss(const std::array<double, 3>& pred, const std::array<double, 3>& target) {
  double s = 0;
  for (std::size_t c = 0; c < 3; ++c) s += (pred[c] - target[c]) * (pred[c] - target[c]);
  return s / 3.0;
}

ad::Var color_loss(ad::Graph& g, ad::Var pred, const Tensor& target) {
  return g.mean(g.square(g.sub(pred, g.constant(target))));
}

double depth_huber(double pred, double target, double delta) {
  const double d = std::fabs(pred - target);
  return d < delta ? 0.5 * d * d : delta * (d - 0.5 * delta);
}

std::optional<ad::Var> depth_huber(ad::Graph& g, ad::Var pred, std::span<const double> target,
                                   std::span<const std::uint8_t> valid, double delta) {
  if (!(delta > 0)) throw ContractViolation("depth_huber: delta must be positive");
  const std::size_t rays = pred.value().size();
  if (target.size() != rays || valid.size() != rays)
    throw ContractViolation("depth_huber: target/valid length does not match predictions");
  std::vector<std::size_t> rows;
  std::vector<double> tgt;
  for (std::size_t r = 0; r < rays; ++r)
    if (valid[r]) {
      rows.push_back(r);
      tgt.push_back(target[r]);
    }
  if (rows.empty()) return std::nullopt;
  const std::size_t n = rows.size();
  ad::Var p = g.gather(g.reshape(pred, {rays, 1}),
                       std::make_shared<ad::RowGather>(ad::RowGather::select(rays, rows)));
  ad::Var diff = g.abs(g.sub(p, g.constant(Tensor({n, 1}, std::move(tgt)))));
  // 0.5 min(d, delta)^2 + delta * max(d - delta, 0)
  ad::Var excess = g.relu(g.sub(diff, g.constant(Tensor({n, 1}, delta))));
  ad::Var inner = g.sub(diff, excess);
  return g.mean(g.add(g.scale(g.square(inner), 0.5), g.scale(excess, delta)));
}

namespace {

enum class Stencil { RowDiff, ColDiff, ColSecondDiff };

// Difference stencils depend only on the grid shape; share them across steps.
std::shared_ptr<const ad::RowGather> difference_stencil(Stencil kind, std::size_t rows, std::size_t cols) {
  static std::mutex mu;
  static std::map<std::tuple<int, std::size_t, std::size_t>, std::shared_ptr<const ad::RowGather>> cache;
  std::lock_guard lock(mu);
  auto key = std::make_tuple(static_cast<int>(kind), rows, cols);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  auto st = std::make_shared<ad::RowGather>();
  st->source_rows = rows * cols;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t at = i * cols + j;
      if (kind == Stencil::RowDiff && i + 1 < rows) {
        st->push(at + cols, 1.0);
        st->push(at, -1.0);
        st->end_row();
      } else if (kind == Stencil::ColDiff && j + 1 < cols) {
        st->push(at + 1, 1.0);
        st->push(at, -1.0);
        st->end_row();
      } else if (kind == Stencil::ColSecondDiff && j >= 1 && j + 1 < cols) {
        st->push(at + 1, 1.0);
        st->push(at, -2.0);
        st->push(at - 1, 1.0);
        st->end_row();
      }
    }
  if (st->out_rows() == 0) st = nullptr;
  cache[key] = st;
  return st;
}

std::optional<ad::Var> mean_squared(ad::Graph& g, ad::Var data, std::shared_ptr<const ad::RowGather> st) {
  if (!st) return std::nullopt;
  return g.mean(g.square(g.gather(data, std::move(st))));
}

ad::Var zero(ad::Graph& g) { return g.constant(Tensor::scalar(0.0)); }

}  // namespace

ad::Var tv2d(ad::Graph& g, ad::Var data, const FeaturePlane& plane) {
  if (!plane.is_space())
    throw ContractViolation(std::string("tv2d: plane ") + plane_name(plane.axes) + " is a space-time plane");
  auto down = mean_squared(g, data, difference_stencil(Stencil::RowDiff, plane.rows, plane.cols));
  auto right = mean_squared(g, data, difference_stencil(Stencil::ColDiff, plane.rows, plane.cols));
  if (down && right) return g.add(*down, *right);
  if (down) return *down;
  if (right) return *right;
  return zero(g);
}

double tv2d(FeaturePlane& plane) {
  ad::Graph g;
  return tv2d(g, g.parameter(plane.data), plane).item();
}

SpaceTimeSmoothness tv_spacetime(ad::Graph& g, ad::Var data, const FeaturePlane& plane) {
  if (plane.is_space())
    throw ContractViolation(std::string("tv_spacetime: plane ") + plane_name(plane.axes) + " is a space plane");
  auto space = mean_squared(g, data, difference_stencil(Stencil::RowDiff, plane.rows, plane.cols));
  auto time = mean_squared(g, data, difference_stencil(Stencil::ColSecondDiff, plane.rows, plane.cols));
  return {space ? *space : zero(g), time ? *time : zero(g)};
}

std::array<double, 2> tv_spacetime(FeaturePlane& plane) {
  ad::Graph g;
  auto r = tv_spacetime(g, g.parameter(plane.data), plane);
  return {r.space_tv.item(), r.time_smooth.item()};
}

ad::Var time_invariant_loss(ad::Graph& g, const FieldSet& field, const FieldVars& vars) {
  std::optional<ad::Var> acc;
  std::size_t count = 0;
  for (std::size_t l = 0; l < field.levels.size(); ++l)
    for (std::size_t k = 0; k < 6; ++k) {
      const FeaturePlane& plane = field.levels[l].planes[k];
      if (plane.is_space()) continue;
      ad::Var dev = g.sum(g.abs(g.sub(vars.planes[l][k], g.constant(Tensor(plane.data.shape(), 1.0)))));
      acc = acc ? g.add(*acc, dev) : dev;
      count += plane.data.size();
    }
  if (!acc) return zero(g);
  return g.scale(*acc, 1.0 / static_cast<double>(count));
}

double time_invariant_loss(FieldSet& field) {
  ad::Graph g;
  auto vars = bind(g, field);
  return time_invariant_loss(g, field, vars).item();
}

namespace {

constexpr double kHistEps = 1e-7;

void require_sorted(std::span<const double> edges, const char* which) {
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (edges[i] < edges[i - 1])
      throw ContractViolation(std::string("histogram_loss: ") + which + " edges are not sorted");
}

// For each fine interval, the coarse intervals that overlap it (open overlap).
void overlaps(std::span<const double> ce, std::span<const double> fe, std::size_t coarse_offset,
              ad::RowGather& out) {
  const std::size_t nc = ce.size() - 1;
  std::size_t first = 0;
  for (std::size_t j = 0; j + 1 < fe.size(); ++j) {
    const double lo = fe[j], hi = fe[j + 1];
    while (first < nc && ce[first + 1] <= lo) ++first;
    for (std::size_t i = first; i < nc && ce[i] < hi; ++i)
      if (ce[i + 1] > lo) out.push(coarse_offset + i, 1.0);
    out.end_row();
  }
}

}  // namespace

double histogram_loss(std::span<const double> cw, std::span<const double> ce,
                      std::span<const double> fw, std::span<const double> fe) {
  if (ce.size() != cw.size() + 1 || fe.size() != fw.size() + 1)
    throw ContractViolation("histogram_loss: need one more edge than weights");
  require_sorted(ce, "coarse");
  require_sorted(fe, "fine");
  ad::RowGather st;
  st.source_rows = cw.size();
  overlaps(ce, fe, 0, st);
  double loss = 0;
  for (std::size_t j = 0; j < fw.size(); ++j) {
    double bound = 0;
    for (std::size_t k = st.offsets[j]; k < st.offsets[j + 1]; ++k) bound += cw[st.index[k]];
    const double gap = std::max(0.0, fw[j] - bound);
    loss += gap * gap / (bound + kHistEps);
  }
  return loss;
}

ad::Var histogram_loss(ad::Graph& g, ad::Var coarse_weights, const RaySamples& coarse,
                       std::span<const double> fine_weights, const RaySamples& fine) {
  const std::size_t rays = coarse.rays;
  if (fine.rays != rays || fine_weights.size() != rays * fine.per_ray)
    throw ContractViolation("histogram_loss: coarse and fine batches differ");
  auto st = std::make_shared<ad::RowGather>();
  st->source_rows = rays * coarse.per_ray;
  for (std::size_t r = 0; r < rays; ++r) {
    const auto ce = interval_edges(coarse.ray(r));
    const auto fe = interval_edges(fine.ray(r));
    require_sorted(ce, "coarse");
    require_sorted(fe, "fine");
    overlaps(ce, fe, r * coarse.per_ray, *st);
  }
  const std::size_t nf = rays * fine.per_ray;
  ad::Var bound = g.gather(g.reshape(coarse_weights, {rays * coarse.per_ray, 1}), std::move(st));
  ad::Var fw = g.constant(Tensor({nf, 1}, std::vector<double>(fine_weights.begin(), fine_weights.end())));
  ad::Var gap = g.relu(g.sub(fw, bound));
  ad::Var per = g.div(g.square(gap), g.add(bound, g.constant(Tensor({nf, 1}, kHistEps))));
  return g.scale(g.sum(per), 1.0 / static_cast<double>(rays));
}

ad::Var total_loss(ad::Graph& g, const RenderBatch& batch, const BatchTargets& targets,
                   const BoundModel& model, std::span<const BoundModel> sample_nets,
                   const LossWeights& w, const DepthLossConfig& depth,
                   const TotalLossOptions& options, LossTerms* terms) {
  w.validate();
  LossTerms t;
  ad::Var color = color_loss(g, batch.fine.result.color, targets.rgb);
  t.color = color.item();
  ad::Var total = g.scale(color, w.w_color);
  auto add_term = [&](ad::Var term, double weight, double& slot) {
    slot += term.item();
    if (weight != 0) total = g.add(total, g.scale(term, weight));
  };

  if (options.samplenet_photometric)
    for (const auto& p : batch.proposals) {
      double unused = 0;
      add_term(color_loss(g, p.result.color, targets.rgb), w.w_color, unused);
    }

  if (depth.enabled && w.w_depth > 0) {
    if (auto d = depth_huber(g, batch.fine.result.depth, targets.depth_t, targets.valid, depth.delta))
      add_term(*d, w.w_depth, t.depth);
    for (const auto& p : batch.proposals)
      if (auto d = depth_huber(g, p.result.depth, targets.depth_t, targets.valid, depth.delta))
        add_term(*d, w.w_depth, t.depth);
  }

  const auto fine_w = batch.fine.result.weights.value().values();
  for (const auto& p : batch.proposals)
    add_term(histogram_loss(g, p.result.weights, p.samples, fine_w, batch.fine.samples), w.w_histogram, t.hist);

  auto regularize = [&](const BoundModel& m) {
    const FieldSet& field = m.model->field;
    for (std::size_t l = 0; l < field.levels.size(); ++l)
      for (std::size_t k = 0; k < 6; ++k) {
        const FeaturePlane& plane = field.levels[l].planes[k];
        ad::Var data = m.vars.field.planes[l][k];
        if (plane.is_space()) {
          if (w.w_tv_space > 0) add_term(tv2d(g, data, plane), w.w_tv_space, t.tv_space);
        } else if (plane.data.requires_grad()) {
          auto st = tv_spacetime(g, data, plane);
          if (w.w_tv_spacetime > 0) add_term(st.space_tv, w.w_tv_spacetime, t.tv_st);
          if (w.w_smooth_time > 0) add_term(st.time_smooth, w.w_smooth_time, t.smooth);
        }
      }
    if (w.w_time_invariant > 0) add_term(time_invariant_loss(g, field, m.vars.field), w.w_time_invariant, t.tinv);
  };
  regularize(model);
  for (const auto& s : sample_nets) regularize(s);

  t.total = total.item();
  if (terms) *terms = t;
  return total;
}

}  // namespace planefield
