#include "planefield/synth.hpp"

#include <algorithm>
#include <cmath>

#include "planefield/errors.hpp"
#include "planefield/rng.hpp"

namespace planefield {

Vec3 SynthBlob::center_at(double tau) const {
  return {center[0] + velocity[0] * tau, center[1] + velocity[1] * tau, center[2] + velocity[2] * tau};
}

SynthSpec default_synth_spec(std::size_t width, std::size_t height, std::size_t frames, std::uint64_t seed) {
  SynthSpec spec;
  spec.width = width;
  spec.height = height;
  spec.frames = frames;
  Rng rng(derive_seed(seed, 0x5e7));
  auto jitter = [&](double v, double amount) { return v + rng.uniform(-amount, amount); };

  SynthBlob backdrop;
  backdrop.center = {0, 0, -5};
  backdrop.radius = 2.0;
  backdrop.density = 6.0;
  backdrop.color = {jitter(0.85, 0.05), jitter(0.45, 0.05), jitter(0.40, 0.05)};

  SynthBlob still;
  still.center = {jitter(-0.7, 0.05), jitter(0.5, 0.05), -3.0};
  still.radius = 0.35;
  still.density = 25.0;
  still.color = {jitter(0.95, 0.03), jitter(0.85, 0.05), jitter(0.3, 0.05)};

  SynthBlob moving;
  moving.center = {0.0, jitter(-0.3, 0.05), -2.6};
  moving.velocity = {0.8, 0.2, 0.0};
  moving.radius = 0.35;
  moving.density = 25.0;
  moving.color = {jitter(0.3, 0.05), jitter(0.5, 0.05), jitter(0.9, 0.05)};

  spec.blobs = {backdrop, still, moving};
  return spec;
}

CameraModel synth_camera(const SynthSpec& spec) {
  CameraModel cam;
  cam.width = spec.width;
  cam.height = spec.height;
  cam.fx = cam.fy = static_cast<double>(spec.width);
  cam.cx = spec.width / 2.0;
  cam.cy = spec.height / 2.0;
  cam.near = spec.near;
  cam.validate();
  return cam;
}

SynthOracle::SynthOracle(SynthSpec spec, CameraModel camera)
    : spec_(std::move(spec)), camera_(camera), ndc_(ndc_bounds(camera)) {}

double SynthOracle::world_density(const Vec3& p, double tau) const {
  double sigma = 0;
  for (const auto& b : spec_.blobs) {
    const Vec3 c = b.center_at(tau);
    const double d2 = (p[0] - c[0]) * (p[0] - c[0]) + (p[1] - c[1]) * (p[1] - c[1]) + (p[2] - c[2]) * (p[2] - c[2]);
    sigma += b.density * std::exp(-d2 / (2 * b.radius * b.radius));
  }
  return sigma;
}

std::pair<double, std::array<double, 3>> SynthOracle::query(const Point4& q) const {
  const Vec3 p = ndc_.from_ndc({q.x, q.y, q.z});
  const double t = (q.z + 1.0) / 2.0;
  double sigma = 0;
  std::array<double, 3> color{0, 0, 0};
  for (const auto& b : spec_.blobs) {
    const Vec3 c = b.center_at(q.tau);
    const double d2 = (p[0] - c[0]) * (p[0] - c[0]) + (p[1] - c[1]) * (p[1] - c[1]) + (p[2] - c[2]) * (p[2] - c[2]);
    const double s = b.density * std::exp(-d2 / (2 * b.radius * b.radius));
    sigma += s;
    for (int k = 0; k < 3; ++k) color[k] += s * b.color[k];
  }
  if (sigma > 0)
    for (auto& v : color) v /= sigma;
  const double q2 = (p[0] * p[0] + p[1] * p[1]) / (p[2] * p[2]);
  const double dz_dt = spec_.near / ((1 - t) * (1 - t));
  return {sigma * std::sqrt(1 + q2) * dz_dt, color};
}

SynthOracle::PixelTruth SynthOracle::pixel(std::size_t row, std::size_t col, double tau) const {
  PixelTruth out;
  if (spec_.blobs.empty()) return out;
  const Vec3 dir = camera_.pixel_direction(static_cast<double>(row), static_cast<double>(col));
  const double len = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
  const Vec3 u{dir[0] / len, dir[1] / len, dir[2] / len};
  const double s0 = spec_.near * len;  // path length to the near plane

  struct Term {
    double scale, m, r;
  };
  std::vector<Term> terms;
  double s_end = s0;
  for (const auto& b : spec_.blobs) {
    const Vec3 c = b.center_at(tau);
    const double m = u[0] * c[0] + u[1] * c[1] + u[2] * c[2];
    const double d2 = std::max(0.0, c[0] * c[0] + c[1] * c[1] + c[2] * c[2] - m * m);
    terms.push_back({b.density * std::exp(-d2 / (2 * b.radius * b.radius)), m, b.radius});
    s_end = std::max(s_end, m + 8 * b.radius);
  }
  // Optical depth accumulated from s0 to s.
  auto optical = [&](double s) {
    double acc = 0;
    for (const auto& t : terms) {
      const double k = t.r * std::sqrt(2.0);
      acc += t.scale * t.r * std::sqrt(M_PI / 2) * (std::erf((s - t.m) / k) - std::erf((s0 - t.m) / k));
    }
    return acc;
  };

  const std::size_t n = spec_.steps;
  const double ds = (s_end - s0) / static_cast<double>(n);
  double t_sum = 0;
  double tau_prev = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = s0 + ds * static_cast<double>(i);
    const double tau_next = optical(a + ds);
    const double w = std::exp(-tau_prev) - std::exp(-tau_next);
    tau_prev = tau_next;
    if (w <= 0) continue;
    const double mid = a + ds / 2;
    const Vec3 p{u[0] * mid, u[1] * mid, u[2] * mid};
    double sigma = 0;
    std::array<double, 3> c{0, 0, 0};
    for (const auto& b : spec_.blobs) {
      const Vec3 bc = b.center_at(tau);
      const double d2 = (p[0] - bc[0]) * (p[0] - bc[0]) + (p[1] - bc[1]) * (p[1] - bc[1]) + (p[2] - bc[2]) * (p[2] - bc[2]);
      const double s = b.density * std::exp(-d2 / (2 * b.radius * b.radius));
      sigma += s;
      for (int k = 0; k < 3; ++k) c[k] += s * b.color[k];
    }
    if (sigma > 0)
      for (int k = 0; k < 3; ++k) out.color[k] += w * c[k] / sigma;
    out.opacity += w;
    t_sum += w * ndc_.depth_to_t(-p[2]);
  }
  if (out.opacity > 0.5) out.depth = ndc_.t_to_depth(t_sum / out.opacity);
  return out;
}

SynthScene synth_scene(const SynthSpec& spec) {
  if (spec.frames == 0) throw ContractViolation("synth_scene: frames must be at least 1");
  if (spec.steps < 2) throw ContractViolation("synth_scene: steps must be at least 2");
  const CameraModel cam = synth_camera(spec);
  SynthOracle oracle(spec, cam);
  Dataset data;
  data.camera = cam;
  data.depth_scale = spec.depth_scale;
  data.times = normalized_times(spec.frames);
  const std::size_t w = spec.width, h = spec.height;
  const std::size_t bar = std::max<std::size_t>(2, w / 8);
  for (std::size_t f = 0; f < spec.frames; ++f) {
    MaskedFrame frame;
    frame.image = Image(w, h, 3);
    frame.mask.assign(w * h, 1);
    frame.time = data.times[f];
    std::vector<double> depth(w * h, 0.0);
    const double bar_centre = (static_cast<double>(f) + 0.5) / static_cast<double>(spec.frames) * static_cast<double>(w);
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c) {
        const std::size_t p = r * w + c;
        if (spec.tool_bar && std::fabs(static_cast<double>(c) + 0.5 - bar_centre) < bar / 2.0) {
          for (int k = 0; k < 3; ++k) frame.image.at(r, c, k) = 0.5;
          frame.mask[p] = 0;
          continue;
        }
        const auto truth = oracle.pixel(r, c, frame.time);
        for (int k = 0; k < 3; ++k) frame.image.at(r, c, k) = std::clamp(truth.color[k], 0.0, 1.0);
        depth[p] = truth.depth;
      }
    data.frames.push_back(std::move(frame));
    data.depth.push_back(std::move(depth));
  }
  return {std::move(data), std::move(oracle)};
}

}  // namespace planefield
