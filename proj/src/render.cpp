#include "planefield/render.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "planefield/errors.hpp"

namespace planefield {

std::uint64_t Ray::stream_key() const { return derive_seed(frame, row, col); }

Ray make_ray(const CameraModel& camera, const NdcMapping& ndc, std::size_t row, std::size_t col,
             double time, std::size_t frame) {
  if (row >= camera.height || col >= camera.width)
    throw ContractViolation("make_ray: pixel (" + std::to_string(row) + ", " + std::to_string(col) +
                            ") outside " + std::to_string(camera.height) + "x" +
                            std::to_string(camera.width) + " image");
  const Vec3 d = camera.pixel_direction(static_cast<double>(row), static_cast<double>(col));
  // Start the ray on the near plane (d.z == -1).
  const Vec3 o = {d[0] * ndc.near, d[1] * ndc.near, -ndc.near};
  Ray ray;
  ray.origin = ndc.to_ndc(o);
  ray.direction = {ndc.ax * (d[0] / -d[2] - o[0] / -o[2]), ndc.ay * (d[1] / -d[2] - o[1] / -o[2]),
                   -2.0 * ndc.near / o[2]};
  ray.frame = frame;
  ray.row = row;
  ray.col = col;
  ray.time = time;
  return ray;
}

SamplePoint sample_at(const Ray& ray, double t, double start, double delta) {
  SamplePoint s;
  s.x = std::clamp(ray.origin[0] + t * ray.direction[0], -1.0, 1.0);
  s.y = std::clamp(ray.origin[1] + t * ray.direction[1], -1.0, 1.0);
  s.z = std::clamp(ray.origin[2] + t * ray.direction[2], -1.0, 1.0);
  s.tau = ray.time;
  s.t = t;
  s.start = start;
  s.delta = delta;
  return s;
}

std::vector<SamplePoint> stratified_samples(const Ray& ray, std::size_t n, Rng* rng) {
  if (n < 2) throw ContractViolation("stratified_samples: need at least 2 samples");
  if (!(ray.t_near < ray.t_far)) throw ContractViolation("stratified_samples: empty ray interval");
  const double width = (ray.t_far - ray.t_near) / static_cast<double>(n);
  std::vector<double> ts(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng ? rng->uniform() : 0.5;
    ts[i] = ray.t_near + (static_cast<double>(i) + u) * width;
  }
  std::vector<SamplePoint> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double next = i + 1 < n ? ts[i + 1] : ray.t_far;
    out.push_back(sample_at(ray, ts[i], ts[i], next - ts[i]));
  }
  return out;
}

std::vector<double> interval_edges(std::span<const SamplePoint> samples) {
  std::vector<double> edges;
  edges.reserve(samples.size() + 1);
  for (const auto& s : samples) edges.push_back(s.start);
  if (!samples.empty()) edges.push_back(samples.back().start + samples.back().delta);
  return edges;
}

std::vector<SamplePoint> resample_pdf(const Ray& ray, std::span<const double> weights,
                                      std::span<const double> edges, std::size_t n, Rng* rng) {
  if (n == 0) throw ContractViolation("resample_pdf: need at least one sample");
  if (edges.size() != weights.size() + 1 || weights.empty())
    throw ContractViolation("resample_pdf: need one more edge than weights");
  constexpr double kEps = 1e-5;
  const std::size_t bins = weights.size();
  std::vector<double> pdf(bins);
  double total = 0;
  for (std::size_t k = 0; k < bins; ++k) {
    pdf[k] = std::max(weights[k], 0.0);
    total += pdf[k];
  }
  if (total < kEps) {
    std::fill(pdf.begin(), pdf.end(), 1.0 / static_cast<double>(bins));
  } else {
    for (auto& p : pdf) p /= total;
  }
  std::vector<double> cdf(bins + 1, 0.0);
  for (std::size_t k = 0; k < bins; ++k) cdf[k + 1] = cdf[k] + pdf[k];
  std::size_t last_positive = bins - 1;
  while (last_positive > 0 && pdf[last_positive] == 0) --last_positive;

  std::vector<double> cuts(n + 1);
  for (std::size_t j = 0; j <= n; ++j) {
    const double u = (static_cast<double>(j) + (rng ? rng->uniform() : 0.5)) / static_cast<double>(n + 1);
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t k = it == cdf.begin() ? 0 : static_cast<std::size_t>(it - cdf.begin()) - 1;
    if (k >= bins || pdf[k] == 0) {
      k = last_positive;
    }
    const double frac = std::clamp((u - cdf[k]) / pdf[k], 0.0, 1.0);
    cuts[j] = edges[k] + frac * (edges[k + 1] - edges[k]);
  }
  const double min_gap = 1e-12 * std::max(1.0, std::fabs(edges.back() - edges.front()));
  for (std::size_t j = 1; j <= n; ++j) cuts[j] = std::max(cuts[j], cuts[j - 1] + min_gap);

  std::vector<SamplePoint> out;
  out.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double mid = 0.5 * (cuts[j] + cuts[j + 1]);
    out.push_back(sample_at(ray, mid, cuts[j], cuts[j + 1] - cuts[j]));
  }
  return out;
}

RenderOutput composite(std::span<const ShadedSample> samples) {
  RenderOutput out;
  out.weights.reserve(samples.size());
  out.transmittance.reserve(samples.size());
  double optical_depth = 0;
  for (const auto& s : samples) {
    if (s.density < 0) throw ContractViolation("composite: negative density");
    if (s.delta < 0) throw ContractViolation("composite: negative interval");
    const double trans = std::exp(-optical_depth);
    optical_depth += s.density * s.delta;
    const double w = trans - std::exp(-optical_depth);
    out.transmittance.push_back(trans);
    out.weights.push_back(w);
    for (std::size_t c = 0; c < 3; ++c) out.color[c] += w * s.color[c];
    out.depth += w * s.t;
  }
  return out;
}

CompositeVars composite(ad::Graph& g, ad::Var density, ad::Var color, const RaySamples& samples) {
  const std::size_t rays = samples.rays;
  const std::size_t n = samples.per_ray;
  if (density.shape() != Shape{rays * n, 1} || color.shape() != Shape{rays * n, 3})
    throw ContractViolation("composite: density " + shape_string(density.shape()) + " / color " +
                            shape_string(color.shape()) + " do not match " + std::to_string(rays) +
                            " rays x " + std::to_string(n) + " samples");
  Tensor delta({rays, n});
  Tensor ts({rays, n});
  for (std::size_t i = 0; i < rays * n; ++i) {
    if (samples.points[i].delta < 0) throw ContractViolation("composite: negative interval");
    delta[i] = samples.points[i].delta;
    ts[i] = samples.points[i].t;
  }
  // Exclusive and inclusive prefix sums along each ray as triangular matmuls.
  Tensor excl({n, n}, 0.0), incl({n, n}, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = j; i < n; ++i) {
      incl[j * n + i] = 1.0;
      if (j < i) excl[j * n + i] = 1.0;
    }
  ad::Var tau = g.mul(g.reshape(density, {rays, n}), g.constant(std::move(delta)));
  ad::Var before = g.exp(g.neg(g.matmul(tau, g.constant(std::move(excl)))));
  ad::Var after = g.exp(g.neg(g.matmul(tau, g.constant(std::move(incl)))));
  ad::Var weights = g.sub(before, after);

  ad::Var w_col = g.reshape(weights, {rays * n, 1});
  ad::Var weighted = g.mul(g.concat({w_col, w_col, w_col}), color);
  Tensor sum3({3 * n, 3}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < 3; ++c) sum3[(i * 3 + c) * 3 + c] = 1.0;
  ad::Var rgb = g.matmul(g.reshape(weighted, {rays, 3 * n}), g.constant(std::move(sum3)));
  ad::Var depth = g.matmul(g.mul(weights, g.constant(std::move(ts))), g.constant(Tensor({n, 1}, 1.0)));
  return {rgb, depth, weights};
}

BoundModel bind_model(ad::Graph& g, RadianceModel& model) { return {&model, bind(g, model)}; }

StageOutput shade(ad::Graph& g, const BoundModel& m, RaySamples samples, QueryDiagnostics* diag) {
  std::vector<Point4> pts;
  pts.reserve(samples.points.size());
  for (const auto& s : samples.points) pts.push_back(s.point());
  auto out = query(g, *m.model, m.vars, pts, diag);
  StageOutput st;
  st.result = composite(g, out.density, out.color, samples);
  st.samples = std::move(samples);
  return st;
}

RenderBatch render_rays(ad::Graph& g, const BoundModel& model,
                        std::span<const BoundModel> sample_nets, std::span<const Ray> rays,
                        const RenderSettings& settings, QueryDiagnostics* diag) {
  if (rays.empty()) throw ContractViolation("render_rays: empty ray batch");
  std::vector<Rng> streams;
  if (settings.stochastic)
    for (const auto& r : rays) streams.emplace_back(derive_seed(settings.seed, settings.step, r.stream_key()));
  auto stream = [&](std::size_t r) -> Rng* { return settings.stochastic ? &streams[r] : nullptr; };

  RaySamples current;
  current.rays = rays.size();
  current.per_ray = sample_nets.empty() ? settings.n_fine : settings.n_coarse;
  for (std::size_t r = 0; r < rays.size(); ++r) {
    auto s = stratified_samples(rays[r], current.per_ray, stream(r));
    current.points.insert(current.points.end(), s.begin(), s.end());
  }

  RenderBatch batch;
  for (std::size_t k = 0; k < sample_nets.size(); ++k) {
    StageOutput stage = shade(g, sample_nets[k], std::move(current), diag);
    const std::size_t next_n = k + 1 == sample_nets.size() ? settings.n_fine : settings.n_coarse;
    const auto w = stage.result.weights.value().values();
    const std::size_t n = stage.samples.per_ray;
    RaySamples next;
    next.rays = rays.size();
    next.per_ray = next_n;
    next.points.reserve(rays.size() * next_n);
    for (std::size_t r = 0; r < rays.size(); ++r) {
      const auto edges = interval_edges(stage.samples.ray(r));
      auto s = resample_pdf(rays[r], w.subspan(r * n, n), edges, next_n, stream(r));
      next.points.insert(next.points.end(), s.begin(), s.end());
    }
    batch.proposals.push_back(std::move(stage));
    current = std::move(next);
  }
  batch.fine = shade(g, model, std::move(current), diag);
  return batch;
}

namespace {

RenderOutput to_output(const CompositeVars& v, std::size_t ray, std::size_t n) {
  RenderOutput out;
  const auto rgb = v.color.value().values();
  for (std::size_t c = 0; c < 3; ++c) out.color[c] = rgb[ray * 3 + c];
  out.depth = v.depth.value()[ray];
  const auto w = v.weights.value().values().subspan(ray * n, n);
  out.weights.assign(w.begin(), w.end());
  double acc = 0;
  for (double wi : out.weights) {
    out.transmittance.push_back(1.0 - acc);
    acc += wi;
  }
  return out;
}

}  // namespace

ProposalResult proposal_render(RadianceModel& sample_net, const Ray& ray, std::size_t n_coarse,
                               Rng* rng) {
  ad::Graph g;
  const BoundModel m = bind_model(g, sample_net);
  RaySamples samples;
  samples.rays = 1;
  samples.per_ray = n_coarse;
  samples.points = stratified_samples(ray, n_coarse, rng);
  StageOutput st = shade(g, m, std::move(samples), nullptr);
  ProposalResult res;
  res.output = to_output(st.result, 0, n_coarse);
  res.weights = res.output.weights;
  res.edges = interval_edges(st.samples.ray(0));
  return res;
}

std::pair<RenderOutput, RenderOutput> render_pixel(RadianceModel& model,
                                                   std::span<RadianceModel* const> sample_nets,
                                                   const Ray& ray, const RenderSettings& settings) {
  ad::Graph g;
  const BoundModel full = bind_model(g, model);
  std::vector<BoundModel> nets;
  for (auto* s : sample_nets) nets.push_back(bind_model(g, *s));
  const Ray rays[1] = {ray};
  RenderBatch b = render_rays(g, full, nets, rays, settings);
  RenderOutput fine = to_output(b.fine.result, 0, b.fine.samples.per_ray);
  RenderOutput coarse;
  if (!b.proposals.empty())
    coarse = to_output(b.proposals.back().result, 0, b.proposals.back().samples.per_ray);
  return {std::move(fine), std::move(coarse)};
}

RenderedImage render_image(RadianceModel& model, std::span<RadianceModel* const> sample_nets,
                           const CameraModel& camera, double time, const RenderSettings& settings,
                           std::size_t chunk) {
  const NdcMapping ndc = ndc_bounds(camera);
  RenderedImage img;
  img.width = camera.width;
  img.height = camera.height;
  img.rgb.assign(camera.width * camera.height * 3, 0.0);
  img.depth.assign(camera.width * camera.height, 0.0);
  std::vector<Ray> all;
  for (std::size_t r = 0; r < camera.height; ++r)
    for (std::size_t c = 0; c < camera.width; ++c) all.push_back(make_ray(camera, ndc, r, c, time));
  for (std::size_t begin = 0; begin < all.size(); begin += chunk) {
    const std::size_t end = std::min(all.size(), begin + chunk);
    ad::Graph g;
    const BoundModel full = bind_model(g, model);
    std::vector<BoundModel> nets;
    for (auto* s : sample_nets) nets.push_back(bind_model(g, *s));
    auto b = render_rays(g, full, nets, std::span<const Ray>(all).subspan(begin, end - begin), settings);
    const auto rgb = b.fine.result.color.value().values();
    const auto depth = b.fine.result.depth.value().values();
    std::copy(rgb.begin(), rgb.end(), img.rgb.begin() + static_cast<std::ptrdiff_t>(begin * 3));
    std::copy(depth.begin(), depth.end(), img.depth.begin() + static_cast<std::ptrdiff_t>(begin));
  }
  return img;
}

}  // namespace planefield
