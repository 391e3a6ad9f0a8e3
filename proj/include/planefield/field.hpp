#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "planefield/graph.hpp"
#include "planefield/tensor.hpp"

namespace planefield {

/// A point in normalized space-time; every coordinate lives in [-1, 1].
struct Point4 {
  double x = 0, y = 0, z = 0, tau = 0;
};

enum class PlaneAxes { XY, YZ, XZ, XT, YT, ZT };

inline constexpr std::array<PlaneAxes, 6> kAllPlanes = {PlaneAxes::XY, PlaneAxes::YZ,
                                                        PlaneAxes::XZ, PlaneAxes::XT,
                                                        PlaneAxes::YT, PlaneAxes::ZT};

const char* plane_name(PlaneAxes axes);
inline bool is_space_plane(PlaneAxes axes) {
  return axes == PlaneAxes::XY || axes == PlaneAxes::YZ || axes == PlaneAxes::XZ;
}
/// The (row, col) coordinates a point projects to on the given plane.
std::array<double, 2> project(PlaneAxes axes, const Point4& p);

struct FeaturePlane {
  PlaneAxes axes = PlaneAxes::XY;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t feat_dim = 0;
  Tensor data;  // rows x cols x feat_dim

  bool is_space() const { return is_space_plane(axes); }
};

struct FieldLevel {
  std::size_t spatial_res = 0;
  std::size_t temporal_res = 0;
  std::array<FeaturePlane, 6> planes;  // ordered as kAllPlanes
};

/// Static (XY, YZ, XZ) plus dynamic (XT, YT, ZT) planes at each resolution level.
struct FieldSet {
  std::size_t feat_dim = 0;
  std::vector<FieldLevel> levels;

  std::size_t fused_dim() const { return feat_dim * levels.size(); }
};

struct FieldConfig {
  std::vector<std::size_t> spatial_resolutions;
  std::size_t feat_dim = 32;
  std::size_t frame_count = 1;
};

/// Temporal resolution used for a level: half the spatial resolution, capped
/// at the number of frames.
std::size_t temporal_resolution(std::size_t spatial_res, std::size_t frame_count);

/// Space planes ~ Uniform(0.1, 0.5); space-time planes exactly 1.
FieldSet init_fieldset(const FieldConfig& config, std::uint64_t seed);

std::size_t parameter_count(const FieldSet& field);
std::size_t space_parameter_count(const FieldSet& field);

/// Counts queries that fell outside [-1, 1] and were clamped to the border.
struct QueryDiagnostics {
  std::size_t clamped = 0;
};

/// Four-corner stencil on a rows x cols grid, align-corners convention.
struct BilerpStencil {
  std::array<std::size_t, 4> index{};
  std::array<double, 4> weight{};
};

BilerpStencil bilerp_stencil(std::size_t rows, std::size_t cols, double u, double v,
                             QueryDiagnostics* diag = nullptr);

std::vector<double> bilerp(const FeaturePlane& plane, double u, double v,
                           QueryDiagnostics* diag = nullptr);

/// Per-level Hadamard product of the six plane queries, levels concatenated.
std::vector<double> fuse(const FieldSet& field, const Point4& p, QueryDiagnostics* diag = nullptr);

/// Graph nodes for every plane of a FieldSet.
struct FieldVars {
  std::vector<std::array<ad::Var, 6>> planes;
};

FieldVars bind(ad::Graph& g, FieldSet& field);

/// Batched, differentiable fuse(): returns an (n x levels*D) node.
ad::Var fuse(ad::Graph& g, const FieldSet& field, const FieldVars& vars,
             std::span<const Point4> points, QueryDiagnostics* diag = nullptr);

/// Sets requires_grad on every plane; dynamic planes follow `train_dynamic`.
void set_trainable(FieldSet& field, bool train_dynamic);

}  // namespace planefield
