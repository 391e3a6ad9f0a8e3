#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "planefield/camera.hpp"
#include "planefield/field.hpp"
#include "planefield/graph.hpp"
#include "planefield/model.hpp"
#include "planefield/rng.hpp"

namespace planefield {

/// A ray in NDC space, parameterized over [t_near, t_far].
struct Ray {
  Vec3 origin{};
  Vec3 direction{0, 0, 2};
  double t_near = 0.0;
  double t_far = 1.0;
  std::size_t frame = 0;
  std::size_t row = 0;
  std::size_t col = 0;
  double time = 0.0;

  /// Key for the ray's private random stream.
  std::uint64_t stream_key() const;
};

Ray make_ray(const CameraModel& camera, const NdcMapping& ndc, std::size_t row, std::size_t col,
             double time, std::size_t frame = 0);

/// A sample on a ray. The sample's weight covers [start, start + delta]; `t`
/// is where the field is queried and what depth is averaged over.
struct SamplePoint {
  double x = 0, y = 0, z = 0, tau = 0;
  double t = 0;
  double delta = 0;
  double start = 0;

  Point4 point() const { return {x, y, z, tau}; }
};

/// Sample at parameter t, with its position clamped into the NDC box.
SamplePoint sample_at(const Ray& ray, double t, double start, double delta);

/// One uniform draw per equal sub-interval of [t_near, t_far]; midpoints when
/// rng is null.
std::vector<SamplePoint> stratified_samples(const Ray& ray, std::size_t n, Rng* rng);

/// Contiguous interval boundaries covered by a sample list (n + 1 values).
std::vector<double> interval_edges(std::span<const SamplePoint> samples);

/// Inverse-CDF draws from the piecewise-constant pdf given by (weights,
/// edges). Draws n + 1 sorted boundaries (stratified, jittered when rng is
/// non-null) and returns the n intervals between them, queried at midpoints.
/// All-zero weights fall back to a uniform pdf.
std::vector<SamplePoint> resample_pdf(const Ray& ray, std::span<const double> weights,
                                      std::span<const double> edges, std::size_t n, Rng* rng);

struct ShadedSample {
  double density = 0;
  std::array<double, 3> color{};
  double t = 0;
  double delta = 0;
};

struct RenderOutput {
  std::array<double, 3> color{};
  double depth = 0;
  std::vector<double> weights;
  std::vector<double> transmittance;
};

/// Exponential-transmittance quadrature of the volume rendering integral.
RenderOutput composite(std::span<const ShadedSample> samples);

/// Samples for a batch of rays, ray-major (rays x per_ray).
struct RaySamples {
  std::size_t rays = 0;
  std::size_t per_ray = 0;
  std::vector<SamplePoint> points;

  std::span<const SamplePoint> ray(std::size_t r) const {
    return std::span<const SamplePoint>(points).subspan(r * per_ray, per_ray);
  }
};

/// Differentiable batched composite; density is (rays*per_ray x 1), color
/// (rays*per_ray x 3).
struct CompositeVars {
  ad::Var color;    // rays x 3
  ad::Var depth;    // rays x 1
  ad::Var weights;  // rays x per_ray
};

CompositeVars composite(ad::Graph& g, ad::Var density, ad::Var color, const RaySamples& samples);

struct StageOutput {
  RaySamples samples;
  CompositeVars result;
};

struct RenderSettings {
  std::size_t n_coarse = 64;
  std::size_t n_fine = 32;
  bool stochastic = true;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
};

/// Proposal passes (one per sample-net, in order) followed by the fine pass
/// through the full model.
struct RenderBatch {
  std::vector<StageOutput> proposals;
  StageOutput fine;
};

struct BoundModel {
  RadianceModel* model = nullptr;
  ModelVars vars;
};

BoundModel bind_model(ad::Graph& g, RadianceModel& model);

/// Queries the model at fixed samples and composites them.
StageOutput shade(ad::Graph& g, const BoundModel& m, RaySamples samples, QueryDiagnostics* diag = nullptr);

RenderBatch render_rays(ad::Graph& g, const BoundModel& model,
                        std::span<const BoundModel> sample_nets, std::span<const Ray> rays,
                        const RenderSettings& settings, QueryDiagnostics* diag = nullptr);

struct ProposalResult {
  RenderOutput output;
  std::vector<double> weights;
  std::vector<double> edges;
};

/// Coarse composite of one sample-net over n_coarse stratified samples.
ProposalResult proposal_render(RadianceModel& sample_net, const Ray& ray, std::size_t n_coarse,
                               Rng* rng);

/// Fine and (last) coarse outputs for a single ray.
std::pair<RenderOutput, RenderOutput> render_pixel(RadianceModel& model,
                                                   std::span<RadianceModel* const> sample_nets,
                                                   const Ray& ray, const RenderSettings& settings);

/// Rendered color (H x W x 3) and NDC-t depth (H x W) of a full frame.
struct RenderedImage {
  std::size_t width = 0, height = 0;
  std::vector<double> rgb;
  std::vector<double> depth;
};

RenderedImage render_image(RadianceModel& model, std::span<RadianceModel* const> sample_nets,
                           const CameraModel& camera, double time, const RenderSettings& settings,
                           std::size_t chunk = 1024);

}  // namespace planefield
