#include "planefield/field.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "planefield/errors.hpp"
#include "planefield/rng.hpp"

namespace planefield {

const char* plane_name(PlaneAxes axes) {
  switch (axes) {
    case PlaneAxes::XY: return "XY";
    case PlaneAxes::YZ: return "YZ";
    case PlaneAxes::XZ: return "XZ";
    case PlaneAxes::XT: return "XT";
    case PlaneAxes::YT: return "YT";
    case PlaneAxes::ZT: return "ZT";
  }
  return "?";
}

std::array<double, 2> project(PlaneAxes axes, const Point4& p) {
  switch (axes) {
    case PlaneAxes::XY: return {p.x, p.y};
    case PlaneAxes::YZ: return {p.y, p.z};
    case PlaneAxes::XZ: return {p.x, p.z};
    case PlaneAxes::XT: return {p.x, p.tau};
    case PlaneAxes::YT: return {p.y, p.tau};
    case PlaneAxes::ZT: return {p.z, p.tau};
  }
  return {0, 0};
}

std::size_t temporal_resolution(std::size_t spatial_res, std::size_t frame_count) {
  return std::max<std::size_t>(1, std::min(spatial_res / 2, frame_count));
}

FieldSet init_fieldset(const FieldConfig& config, std::uint64_t seed) {
  if (config.feat_dim == 0) throw ContractViolation("init_fieldset: feature dimension must be positive");
  if (config.frame_count == 0) throw ContractViolation("init_fieldset: frame count must be positive");
  if (config.spatial_resolutions.empty())
    throw ContractViolation("init_fieldset: at least one resolution level is required");
  FieldSet field;
  field.feat_dim = config.feat_dim;
  std::size_t prev = 0;
  for (std::size_t l = 0; l < config.spatial_resolutions.size(); ++l) {
    const std::size_t n = config.spatial_resolutions[l];
    if (n < 2) throw ContractViolation("init_fieldset: spatial resolution must be at least 2");
    if (n <= prev) throw ContractViolation("init_fieldset: resolutions must be strictly increasing");
    prev = n;
    FieldLevel level;
    level.spatial_res = n;
    level.temporal_res = temporal_resolution(n, config.frame_count);
    for (std::size_t k = 0; k < kAllPlanes.size(); ++k) {
      FeaturePlane& plane = level.planes[k];
      plane.axes = kAllPlanes[k];
      plane.rows = n;
      plane.cols = plane.is_space() ? n : level.temporal_res;
      plane.feat_dim = config.feat_dim;
      plane.data = Tensor({plane.rows, plane.cols, plane.feat_dim}, 1.0);
      if (plane.is_space()) {
        Rng rng(derive_seed(seed, l, k));
        for (auto& v : plane.data.values()) v = rng.uniform(0.1, 0.5);
      }
      plane.data.set_requires_grad(true);
    }
    field.levels.push_back(std::move(level));
  }
  return field;
}

std::size_t parameter_count(const FieldSet& field) {
  std::size_t n = 0;
  for (const auto& level : field.levels)
    for (const auto& p : level.planes) n += p.data.size();
  return n;
}

std::size_t space_parameter_count(const FieldSet& field) {
  std::size_t n = 0;
  for (const auto& level : field.levels)
    for (const auto& p : level.planes)
      if (p.is_space()) n += p.data.size();
  return n;
}

void set_trainable(FieldSet& field, bool train_dynamic) {
  for (auto& level : field.levels)
    for (auto& p : level.planes) p.data.set_requires_grad(p.is_space() || train_dynamic);
}

namespace {

// Maps a [-1, 1] coordinate onto a grid axis; returns (lower index, fraction).
std::pair<std::size_t, double> grid_coord(double c, std::size_t res, bool& clamped) {
  if (!(c >= -1.0 && c <= 1.0)) {
    clamped = true;
    c = std::isnan(c) ? 0.0 : std::clamp(c, -1.0, 1.0);
  }
  if (res == 1) return {0, 0.0};
  const double g = (c + 1.0) * 0.5 * static_cast<double>(res - 1);
  auto i = static_cast<std::size_t>(std::floor(g));
  i = std::min(i, res - 2);
  return {i, g - static_cast<double>(i)};
}

}  // namespace

BilerpStencil bilerp_stencil(std::size_t rows, std::size_t cols, double u, double v,
                             QueryDiagnostics* diag) {
  bool clamped = false;
  auto [i, fu] = grid_coord(u, rows, clamped);
  auto [j, fv] = grid_coord(v, cols, clamped);
  if (clamped && diag) ++diag->clamped;
  const std::size_t i1 = rows == 1 ? i : i + 1;
  const std::size_t j1 = cols == 1 ? j : j + 1;
  BilerpStencil s;
  s.index = {i * cols + j, i * cols + j1, i1 * cols + j, i1 * cols + j1};
  s.weight = {(1 - fu) * (1 - fv), (1 - fu) * fv, fu * (1 - fv), 0.0};
  // Last weight closes the sum so constant planes interpolate exactly.
  s.weight[3] = 1.0 - ((s.weight[0] + s.weight[1]) + s.weight[2]);
  return s;
}

std::vector<double> bilerp(const FeaturePlane& plane, double u, double v, QueryDiagnostics* diag) {
  const auto s = bilerp_stencil(plane.rows, plane.cols, u, v, diag);
  std::vector<double> out(plane.feat_dim, 0.0);
  auto data = plane.data.values();
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t d = 0; d < plane.feat_dim; ++d)
      out[d] += s.weight[k] * data[s.index[k] * plane.feat_dim + d];
  return out;
}

std::vector<double> fuse(const FieldSet& field, const Point4& p, QueryDiagnostics* diag) {
  std::vector<double> out;
  out.reserve(field.fused_dim());
  for (const auto& level : field.levels) {
    std::vector<double> acc(field.feat_dim, 1.0);
    for (const auto& plane : level.planes) {
      const auto uv = project(plane.axes, p);
      const auto f = bilerp(plane, uv[0], uv[1], diag);
      for (std::size_t d = 0; d < acc.size(); ++d) acc[d] *= f[d];
    }
    out.insert(out.end(), acc.begin(), acc.end());
  }
  return out;
}

FieldVars bind(ad::Graph& g, FieldSet& field) {
  FieldVars vars;
  for (auto& level : field.levels) {
    std::array<ad::Var, 6> row;
    for (std::size_t k = 0; k < 6; ++k) row[k] = g.parameter(level.planes[k].data);
    vars.planes.push_back(row);
  }
  return vars;
}

ad::Var fuse(ad::Graph& g, const FieldSet& field, const FieldVars& vars,
             std::span<const Point4> points, QueryDiagnostics* diag) {
  if (vars.planes.size() != field.levels.size())
    throw ContractViolation("fuse: field binding does not match field levels");
  std::vector<ad::Var> per_level;
  for (std::size_t l = 0; l < field.levels.size(); ++l) {
    const FieldLevel& level = field.levels[l];
    ad::Var acc{};
    for (std::size_t k = 0; k < 6; ++k) {
      const FeaturePlane& plane = level.planes[k];
      auto st = std::make_shared<ad::RowGather>();
      st->source_rows = plane.rows * plane.cols;
      st->index.reserve(points.size() * 4);
      st->weights.reserve(points.size() * 4);
      st->offsets.reserve(points.size() + 1);
      for (const auto& p : points) {
        const auto uv = project(plane.axes, p);
        const auto s = bilerp_stencil(plane.rows, plane.cols, uv[0], uv[1], diag);
        for (std::size_t c = 0; c < 4; ++c) st->push(s.index[c], s.weight[c]);
        st->end_row();
      }
      ad::Var q = g.gather(vars.planes[l][k], std::move(st));
      acc = k == 0 ? q : g.mul(acc, q);
    }
    per_level.push_back(acc);
  }
  return per_level.size() == 1 ? per_level[0] : g.concat(per_level);
}

}  // namespace planefield
