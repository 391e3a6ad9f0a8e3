#include <cmath>

#include "doctest.h"
#include "planefield/decoder.hpp"
#include "planefield/encoding.hpp"
#include "planefield/errors.hpp"
#include "planefield/grad_check.hpp"
#include "planefield/model.hpp"
#include "planefield/rng.hpp"

using namespace planefield;

namespace {

double phi(double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); }

// Gaussian mass per bin, evaluated directly from the normal CDF.
std::vector<double> blob_reference(double coord, std::size_t bins) {
  const double mu = (coord + 1) / 2, s = 1.0 / double(bins);
  std::vector<double> out(bins);
  for (std::size_t k = 0; k < bins; ++k) out[k] = phi((double(k + 1) / bins - mu) / s) - phi((double(k) / bins - mu) / s);
  return out;
}

}  // namespace

TEST_CASE("one-blob bins hold the Gaussian mass of their interval") {
  Rng rng(1);
  for (int q = 0; q < 100; ++q) {
    const double c = rng.uniform(-1, 1);
    std::vector<double> got(16);
    oneblob_coordinate(c, 16, got);
    const auto want = blob_reference(c, 16);
    double sum = 0, ref_sum = 0;
    for (std::size_t k = 0; k < 16; ++k) {
      CHECK(got[k] == doctest::Approx(want[k]).epsilon(1e-12));
      CHECK(got[k] >= 0);
      sum += got[k];
      ref_sum += want[k];
    }
    CHECK(sum == doctest::Approx(ref_sum).epsilon(1e-12));
    // Interior coordinates keep essentially all of their mass on [0, 1].
    if (std::fabs(c) <= 1.0 - 4.0 / 16) {
      CHECK(sum >= 0.95);
      CHECK(sum <= 1.0 + 1e-12);
    }
  }
  std::vector<double> edge(16);
  oneblob_coordinate(1.0, 16, edge);
  double edge_sum = 0;
  for (double v : edge) edge_sum += v;
  CHECK(edge_sum == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("one-blob peak bin follows the coordinate") {
  std::vector<double> out(16);
  oneblob_coordinate(-1.0 + 2.0 * (5.5 / 16), 16, out);
  CHECK(std::max_element(out.begin(), out.end()) - out.begin() == 5);
  CHECK_THROWS_AS(oneblob_coordinate(0.0, 1, std::span<double>(out).first(1)), ContractViolation);
  const auto full = oneblob_encode(Point4{0.1, -0.4, 0.9, -1.0}, 8);
  CHECK(full.size() == 32);
  const Tensor batch = oneblob_encode(std::vector<Point4>{{0.1, -0.4, 0.9, -1.0}}, 8);
  for (std::size_t k = 0; k < 32; ++k) CHECK(batch[k] == full[k]);
}

TEST_CASE("decoder at zero weights gives softplus(0) and mid gray") {
  DecoderNet net = init_decoder(6, 5, 2, 0);
  for (auto& w : net.weights) for (double& v : w.values()) v = 0;
  for (auto& b : net.biases) for (double& v : b.values()) v = 0;
  const std::vector<double> fused{0.3, 0.1}, enc{1, 2, 3, 4};
  const auto d = decode(net, fused, enc);
  CHECK(d.density == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  for (double c : d.color) CHECK(c == doctest::Approx(0.5));
  CHECK_THROWS_AS(decode(net, fused, std::vector<double>{1, 2}), ContractViolation);
}

TEST_CASE("decoder initialization is bounded by 1/sqrt(fan_in) and outputs are in range") {
  DecoderNet net = init_decoder(40, 16, 2, 5);
  REQUIRE(net.weights.size() == 3);
  CHECK(net.weights[0].shape() == Shape{40, 16});
  CHECK(net.weights[2].shape() == Shape{16, 4});
  for (double v : net.weights[0].values()) CHECK(std::fabs(v) <= 1 / std::sqrt(40.0));
  Rng rng(2);
  for (int q = 0; q < 50; ++q) {
    std::vector<double> x(40);
    for (double& v : x) v = rng.uniform(-3, 3);
    const auto d = decode(net, std::span<const double>(x).first(20), std::span<const double>(x).subspan(20));
    CHECK(d.density >= 0);
    for (double c : d.color) {
      CHECK(c > 0);
      CHECK(c < 1);
    }
  }
}

TEST_CASE("batched decode equals per-point decode; density gradient matches finite differences") {
  DecoderNet net = init_decoder(5, 6, 2, 9);
  Tensor input({3, 5});
  Rng rng(4);
  for (double& v : input.values()) v = rng.uniform(-1, 1);
  {
    ad::Graph g;
    const auto vars = bind(g, net);
    const auto out = decode(g, net, vars, g.constant(input));
    for (std::size_t i = 0; i < 3; ++i) {
      const auto row = input.values().subspan(i * 5, 5);
      const auto d = decode(net, row.first(2), row.subspan(2));
      CHECK(out.density.value()[i] == doctest::Approx(d.density).epsilon(1e-13));
      for (std::size_t c = 0; c < 3; ++c) CHECK(out.color.value()[i * 3 + c] == doctest::Approx(d.color[c]).epsilon(1e-13));
    }
  }
  std::vector<ad::Probe> probes;
  for (std::size_t i = 0; i < net.weights[0].size(); i += 2) probes.push_back({&net.weights[0], i});
  const auto report = ad::grad_check(
      [&](ad::Graph& g) {
        const auto vars = bind(g, net);
        return g.sum(decode(g, net, vars, g.constant(input)).density);
      },
      probes, 1e-6, 1e-5);
  CHECK(report.passed);
}

TEST_CASE("model tensors are named in a fixed order") {
  RadianceModel m = make_model({{4, 8}, 2, 3, 4, 8, 1}, 0);
  const auto named = named_tensors(m, "model.");
  REQUIRE(named.size() == 12 + 4);
  CHECK(named[0].name == "model.field.l0.XY");
  CHECK(named[11].name == "model.field.l1.ZT");
  CHECK(named[12].name == "model.decoder.fc0.weight");
  CHECK(m.decoder.input_dim == 2 * 2 + 4 * 4);
}
