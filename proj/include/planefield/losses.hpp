#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "planefield/field.hpp"
#include "planefield/graph.hpp"
#include "planefield/render.hpp"

namespace planefield {

struct LossWeights {
  double w_color = 1.0;
  double w_depth = 1.0;
  double w_tv_space = 2e-3;
  double w_tv_spacetime = 2e-3;
  double w_smooth_time = 1e-3;
  double w_time_invariant = 1e-4;
  double w_histogram = 1.0;

  void validate() const;
};

struct DepthLossConfig {
  double delta = 0.2;
  bool enabled = true;
};

// Color: per-channel squared error, averaged.
double color_loss(const std::array<double, 3>& pred, const std::array<double, 3>& target);
/// Mean over rays and channels; target is rays x 3.
ad::Var color_loss(ad::Graph& g, ad::Var pred, const Tensor& target);

// Huber depth penalty on |pred - target|.
double depth_huber(double pred, double target, double delta);
/// Mean over rays whose depth is valid; nullopt when no ray is valid.
std::optional<ad::Var> depth_huber(ad::Graph& g, ad::Var pred, std::span<const double> target,
                                   std::span<const std::uint8_t> valid, double delta);

// Squared-difference total variation over both axes of a space plane.
ad::Var tv2d(ad::Graph& g, ad::Var plane_data, const FeaturePlane& plane);
double tv2d(FeaturePlane& plane);

struct SpaceTimeSmoothness {
  ad::Var space_tv;     // first differences along the space axis
  ad::Var time_smooth;  // second differences along the time axis
};
SpaceTimeSmoothness tv_spacetime(ad::Graph& g, ad::Var plane_data, const FeaturePlane& plane);
std::array<double, 2> tv_spacetime(FeaturePlane& plane);

/// Mean |f - 1| over every space-time plane entry.
ad::Var time_invariant_loss(ad::Graph& g, const FieldSet& field, const FieldVars& vars);
double time_invariant_loss(FieldSet& field);

/// Proposal supervision: the coarse histogram must upper-bound the fine one
/// on every overlapping interval. Gradients reach the coarse weights only.
double histogram_loss(std::span<const double> coarse_weights, std::span<const double> coarse_edges,
                      std::span<const double> fine_weights, std::span<const double> fine_edges);
/// Batched form, averaged over rays: coarse weights (rays x nc) are a graph
/// node; fine weights are taken as constants.
ad::Var histogram_loss(ad::Graph& g, ad::Var coarse_weights, const RaySamples& coarse,
                       std::span<const double> fine_weights, const RaySamples& fine);

/// Supervision for a ray batch.
struct BatchTargets {
  Tensor rgb;                        // rays x 3
  std::vector<double> depth_t;       // NDC t per ray
  std::vector<std::uint8_t> valid;   // 1 where depth_t is usable
};

struct LossTerms {
  double total = 0;
  double color = 0;
  double depth = 0;
  double tv_space = 0;
  double tv_st = 0;
  double smooth = 0;
  double tinv = 0;
  double hist = 0;
};

struct TotalLossOptions {
  bool samplenet_photometric = false;
};

/// Weighted joint objective. The depth term exists in the graph only when
/// depth supervision is enabled; it is applied to the fine pass and to every
/// proposal pass. Regularizers cover the full model and every sample-net.
ad::Var total_loss(ad::Graph& g, const RenderBatch& batch, const BatchTargets& targets,
                   const BoundModel& model, std::span<const BoundModel> sample_nets,
                   const LossWeights& weights, const DepthLossConfig& depth,
                   const TotalLossOptions& options = {}, LossTerms* terms = nullptr);

}  // namespace planefield
