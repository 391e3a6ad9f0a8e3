#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "planefield/errors.hpp"
#include "planefield/grad_check.hpp"
#include "planefield/render.hpp"

using namespace planefield;

namespace {

CameraModel test_camera() {
  CameraModel c;
  c.width = 12;
  c.height = 8;
  c.fx = 11;
  c.fy = 10;
  c.cx = 6.5;
  c.cy = 3.5;
  c.near = 0.8;
  return c;
}

Ray unit_ray() {
  Ray r;
  r.origin = {0, 0, -1};
  r.direction = {0, 0, 2};
  return r;
}

// Kolmogorov-Smirnov distance of a sample to Uniform(0, 1).
double ks_uniform(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double d = 0;
  const double n = double(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    d = std::max({d, std::fabs(double(i + 1) / n - v[i]), std::fabs(v[i] - double(i) / n)});
  return d;
}

std::vector<ShadedSample> homogeneous(std::size_t n, double sigma) {
  std::vector<ShadedSample> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = {sigma, {1, 1, 1}, (double(i) + 0.5) / double(n), 1.0 / double(n)};
  return s;
}

RadianceModel tiny_model(std::vector<std::size_t> res, std::size_t width, std::uint64_t seed) {
  return make_model({res, 2, 3, 4, width, 1}, seed);
}

}  // namespace

TEST_CASE("principal-point ray runs straight down the NDC z axis") {
  CameraModel cam = test_camera();
  cam.cx = 6.5;
  cam.cy = 3.5;
  const NdcMapping ndc = ndc_bounds(cam);
  const Ray r = make_ray(cam, ndc, 3, 6, 0.0);
  CHECK(std::fabs(r.direction[0]) < 1e-15);
  CHECK(std::fabs(r.direction[1]) < 1e-15);
  CHECK(r.direction[2] == doctest::Approx(2.0));
  CHECK(r.t_near == 0.0);
  CHECK(r.t_far == 1.0);
  CHECK_THROWS_AS(make_ray(cam, ndc, 8, 0, 0.0), ContractViolation);
  CHECK_THROWS_AS(make_ray(cam, ndc, 0, 12, 0.0), ContractViolation);
}

TEST_CASE("ray origins invert onto the near plane and follow the pixel's line of sight") {
  const CameraModel cam = test_camera();
  const NdcMapping ndc = ndc_bounds(cam);
  for (std::size_t row = 0; row < cam.height; ++row)
    for (std::size_t col = 0; col < cam.width; ++col) {
      const Ray r = make_ray(cam, ndc, row, col, 0.3);
      const Vec3 o = ndc.from_ndc(r.origin);
      CHECK(o[2] == doctest::Approx(-cam.near).epsilon(1e-12));
      const Vec3 dir = cam.pixel_direction(double(row), double(col));
      CHECK(o[0] == doctest::Approx(dir[0] * cam.near).epsilon(1e-12));
      CHECK(o[1] == doctest::Approx(dir[1] * cam.near).epsilon(1e-12));
      // A point further along the NDC ray is still on the pixel's camera ray.
      const double t = 0.6;
      const Vec3 q = ndc.from_ndc({r.origin[0] + t * r.direction[0], r.origin[1] + t * r.direction[1],
                                   r.origin[2] + t * r.direction[2]});
      CHECK(q[0] / -q[2] == doctest::Approx(dir[0]).epsilon(1e-12));
      CHECK(q[1] / -q[2] == doctest::Approx(dir[1]).epsilon(1e-12));
      CHECK(-q[2] == doctest::Approx(ndc.t_to_depth(t)).epsilon(1e-12));
      for (double v : r.direction) CHECK(std::isfinite(v));
    }
}

TEST_CASE("NDC depth mapping endpoints and round trip") {
  const NdcMapping ndc = ndc_bounds(test_camera());
  CHECK(ndc.to_ndc({0, 0, -0.8})[2] == doctest::Approx(-1.0));
  CHECK(ndc.to_ndc({0, 0, -1e12})[2] == doctest::Approx(1.0));
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const double d = rng.uniform(0.8, 500.0);
    CHECK(std::fabs(ndc.t_to_depth(ndc.depth_to_t(d)) - d) <= 1e-9 * d);
  }
  CameraModel bad = test_camera();
  bad.near = 0;
  CHECK_THROWS_AS(ndc_bounds(bad), ContractViolation);
}

TEST_CASE("stratified samples: one per bin, midpoints without rng, uniform marginals") {
  const Ray r = unit_ray();
  const auto mid = stratified_samples(r, 4, nullptr);
  REQUIRE(mid.size() == 4);
  const double want[] = {0.125, 0.375, 0.625, 0.875};
  for (int i = 0; i < 4; ++i) CHECK(mid[i].t == doctest::Approx(want[i]).epsilon(1e-15));
  CHECK(mid[3].delta == doctest::Approx(0.125));
  CHECK(mid[3].z == doctest::Approx(-1 + 2 * 0.875));
  CHECK_THROWS_AS(stratified_samples(r, 1, nullptr), ContractViolation);

  Rng rng(7);
  std::vector<double> pooled;
  for (int k = 0; k < 25000; ++k) {
    const auto s = stratified_samples(r, 4, &rng);
    for (int i = 0; i < 4; ++i) {
      CHECK(s[i].t >= i / 4.0);
      CHECK(s[i].t < (i + 1) / 4.0);
      CHECK(s[i].delta > 0);
      if (i > 0) CHECK(s[i].t > s[i - 1].t);
      pooled.push_back(s[i].t);
    }
  }
  CHECK(ks_uniform(pooled) <= 0.01);
}

TEST_CASE("composite: vacuum and homogeneous-medium closed forms") {
  const auto vac = composite(homogeneous(16, 0.0));
  for (double w : vac.weights) CHECK(w == 0.0);
  for (double t : vac.transmittance) CHECK(t == 1.0);
  CHECK(vac.depth == 0.0);
  CHECK(vac.color == std::array<double, 3>{0, 0, 0});

  const auto out = composite(homogeneous(1024, 1.0));
  for (double c : out.color) CHECK(std::fabs(c - (1 - std::exp(-1.0))) <= 1e-3);
  CHECK(std::fabs(out.depth - (1 - 2 * std::exp(-1.0))) <= 1e-3);
  double sum = 0;
  for (double w : out.weights) sum += w;
  CHECK(sum == doctest::Approx(1 - std::exp(-1.0)).epsilon(1e-12));
  for (std::size_t i = 1; i < out.transmittance.size(); ++i) CHECK(out.transmittance[i] <= out.transmittance[i - 1]);

  auto bad = homogeneous(4, 1.0);
  bad[2].density = -0.1;
  CHECK_THROWS_AS(composite(bad), ContractViolation);
}

TEST_CASE("depth quadrature converges at first order") {
  const double exact = 1 - 2 * std::exp(-1.0);
  double prev = std::fabs(composite(homogeneous(256, 1.0)).depth - exact);
  for (std::size_t n : {512, 1024, 2048}) {
    const double err = std::fabs(composite(homogeneous(n, 1.0)).depth - exact);
    CHECK(prev / err >= 1.8);
    prev = err;
  }
}

TEST_CASE("moving density toward the camera strictly decreases depth") {
  auto far = homogeneous(32, 0.0), near = homogeneous(32, 0.0);
  far[25].density = 30;
  near[5].density = 30;
  CHECK(composite(near).depth < composite(far).depth);
}

TEST_CASE("batched composite matches the scalar composite") {
  Rng rng(3);
  RaySamples s;
  s.rays = 3;
  s.per_ray = 5;
  Tensor dens({15, 1}), col({15, 3});
  std::vector<std::vector<ShadedSample>> per(3);
  for (std::size_t r = 0; r < 3; ++r) {
    Ray ray = unit_ray();
    auto pts = stratified_samples(ray, 5, &rng);
    for (std::size_t i = 0; i < 5; ++i) {
      const std::size_t k = r * 5 + i;
      dens[k] = rng.uniform(0, 6);
      ShadedSample sh{dens[k], {}, pts[i].t, pts[i].delta};
      for (std::size_t c = 0; c < 3; ++c) sh.color[c] = col[k * 3 + c] = rng.uniform(0, 1);
      per[r].push_back(sh);
      s.points.push_back(pts[i]);
    }
  }
  ad::Graph g;
  const auto v = composite(g, g.constant(dens), g.constant(col), s);
  for (std::size_t r = 0; r < 3; ++r) {
    const auto ref = composite(per[r]);
    for (std::size_t c = 0; c < 3; ++c) CHECK(v.color.value()[r * 3 + c] == doctest::Approx(ref.color[c]).epsilon(1e-12));
    CHECK(v.depth.value()[r] == doctest::Approx(ref.depth).epsilon(1e-12));
    for (std::size_t i = 0; i < 5; ++i) CHECK(v.weights.value()[r * 5 + i] == doctest::Approx(ref.weights[i]).epsilon(1e-12));
  }
}

TEST_CASE("resampling: uniform weights give uniform draws") {
  const Ray r = unit_ray();
  std::vector<double> w(8, 0.1), edges(9);
  for (int k = 0; k <= 8; ++k) edges[k] = k / 8.0;
  Rng rng(11);
  std::vector<double> cuts;
  for (int k = 0; k < 10000; ++k) {
    const auto s = resample_pdf(r, w, edges, 9, &rng);
    const auto e = interval_edges(s);
    cuts.insert(cuts.end(), e.begin(), e.end());
    for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i].t > s[i - 1].t);
  }
  REQUIRE(cuts.size() == 100000);
  CHECK(ks_uniform(cuts) <= 0.01);
}

TEST_CASE("resampling: a single nonzero bin captures every draw; zero weights fall back to uniform") {
  const Ray r = unit_ray();
  std::vector<double> w(8, 0.0), edges(9);
  for (int k = 0; k <= 8; ++k) edges[k] = k / 8.0;
  w[5] = 0.7;
  Rng rng(2);
  for (int k = 0; k < 200; ++k)
    for (const auto& s : resample_pdf(r, w, edges, 16, &rng)) {
      CHECK(s.start >= 5 / 8.0);
      CHECK(s.start + s.delta <= 6 / 8.0 + 1e-9);
    }
  std::vector<double> zero(8, 0.0);
  const auto u = resample_pdf(r, zero, edges, 7, nullptr);
  for (std::size_t i = 0; i < u.size(); ++i) CHECK(u[i].t == doctest::Approx((i + 1.0) / 8.0));
}

TEST_CASE("resampling concentrates on a delta-like proposal") {
  const Ray r = unit_ray();
  auto med = homogeneous(32, 0.0);
  med[20].density = 400;
  const auto out = composite(med);
  std::vector<double> edges(33);
  for (int k = 0; k <= 32; ++k) edges[k] = k / 32.0;
  Rng rng(5);
  std::size_t inside = 0, total = 0;
  for (int k = 0; k < 100; ++k)
    for (const auto& s : resample_pdf(r, out.weights, edges, 32, &rng)) {
      inside += s.t >= 20 / 32.0 && s.t < 21 / 32.0;
      ++total;
    }
  CHECK(double(inside) / double(total) >= 0.9);
}

TEST_CASE("proposal histogram overlaps the fine histogram when densities agree") {
  // Fine weights from a 1D medium evaluated on resampled intervals.
  auto density = [](double t) { return 40 * std::exp(-std::pow((t - 0.55) / 0.05, 2)); };
  const Ray r = unit_ray();
  std::vector<ShadedSample> coarse;
  for (const auto& s : stratified_samples(r, 64, nullptr)) coarse.push_back({density(s.t), {1, 1, 1}, s.t, s.delta});
  const auto cw = composite(coarse).weights;
  const auto cedges = interval_edges(stratified_samples(r, 64, nullptr));
  const auto fine_pts = resample_pdf(r, cw, cedges, 64, nullptr);
  std::vector<ShadedSample> fine;
  for (const auto& s : fine_pts) fine.push_back({density(s.t), {1, 1, 1}, s.t, s.delta});
  const auto fw = composite(fine).weights;
  // Overlap of the two histograms after binning fine weights on the coarse grid.
  std::vector<double> binned(64, 0.0);
  for (std::size_t i = 0; i < fine_pts.size(); ++i)
    binned[std::min<std::size_t>(63, std::size_t(fine_pts[i].t * 64))] += fw[i];
  double overlap = 0, cs = 0, fs = 0;
  for (std::size_t k = 0; k < 64; ++k) {
    overlap += std::min(cw[k], binned[k]);
    cs += cw[k];
    fs += binned[k];
  }
  CHECK(overlap / std::max(cs, fs) >= 0.9);
}

TEST_CASE("proposal pass: weights are non-negative and sum to at most one") {
  RadianceModel net = tiny_model({4}, 6, 3);
  Rng rng(1);
  const auto res = proposal_render(net, unit_ray(), 16, &rng);
  REQUIRE(res.weights.size() == 16);
  REQUIRE(res.edges.size() == 17);
  double sum = 0;
  for (double w : res.weights) {
    CHECK(w >= 0);
    sum += w;
  }
  CHECK(sum <= 1.0 + 1e-12);
}

// Zeroes the first-layer rows that read the time block of the encoding.
void mute_time_encoding(RadianceModel& m) {
  const std::size_t bins = m.spec.oneblob_bins, out = m.decoder.hidden_width;
  const std::size_t first = m.field.fused_dim() + 3 * bins;
  for (std::size_t r = first; r < first + bins; ++r)
    for (std::size_t c = 0; c < out; ++c) m.decoder.weights[0][r * out + c] = 0.0;
}

TEST_CASE("render_pixel: field adds no time dependence when untrained; deterministic under a seed") {
  RadianceModel model = tiny_model({4, 8}, 8, 1);
  RadianceModel net = tiny_model({6}, 6, 2);
  mute_time_encoding(model);
  mute_time_encoding(net);
  RadianceModel* nets[] = {&net};
  const CameraModel cam = test_camera();
  const NdcMapping ndc = ndc_bounds(cam);
  RenderSettings rs;
  rs.n_coarse = 16;
  rs.n_fine = 8;
  rs.seed = 9;
  const auto a = render_pixel(model, nets, make_ray(cam, ndc, 2, 3, -0.7, 4), rs);
  const auto b = render_pixel(model, nets, make_ray(cam, ndc, 2, 3, 0.4, 4), rs);
  CHECK(a.first.color == b.first.color);
  CHECK(a.first.depth == b.first.depth);
  const auto c = render_pixel(model, nets, make_ray(cam, ndc, 2, 3, -0.7, 4), rs);
  CHECK(a.first.weights == c.first.weights);
  CHECK(a.second.weights == c.second.weights);
  double sum = 0;
  for (double w : a.first.weights) sum += w;
  CHECK(sum == doctest::Approx(1.0 - a.first.transmittance.back() + a.first.weights.back()).epsilon(1e-12));
}

TEST_CASE("rendered color gradient w.r.t. space-plane entries matches finite differences") {
  RadianceModel model = tiny_model({4}, 8, 5);
  RadianceModel net = tiny_model({4}, 6, 6);
  const CameraModel cam = test_camera();
  const NdcMapping ndc = ndc_bounds(cam);
  const Ray rays[] = {make_ray(cam, ndc, 1, 2, 0.2), make_ray(cam, ndc, 6, 9, -0.5)};
  RenderSettings rs;
  rs.n_coarse = 12;
  rs.n_fine = 10;
  rs.seed = 4;
  std::vector<ad::Probe> probes;
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < model.field.levels[0].planes[k].data.size(); i += 5)
      probes.push_back({&model.field.levels[0].planes[k].data, i});
  const auto report = ad::grad_check(
      [&](ad::Graph& g) {
        const BoundModel m = bind_model(g, model);
        const BoundModel n[] = {bind_model(g, net)};
        return g.sum(render_rays(g, m, n, rays, rs).fine.result.color);
      },
      probes, 1e-5, 1e-3);
  CHECK(report.passed);
  CHECK(report.entries.size() == probes.size());
}
