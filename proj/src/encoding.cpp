#include "planefield/encoding.hpp"

#include <algorithm>
#include <cmath>

#include "planefield/errors.hpp"

namespace planefield {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

void check_bins(std::size_t bins) {
  if (bins < 2) throw ContractViolation("oneblob: need at least 2 bins, got " + std::to_string(bins));
}

}  // namespace

void oneblob_coordinate(double coord, std::size_t bins, std::span<double> out) {
  check_bins(bins);
  if (out.size() != bins) throw ContractViolation("oneblob: output span has wrong length");
  const double u = (std::clamp(coord, -1.0, 1.0) + 1.0) * 0.5;
  const double sigma = 1.0 / static_cast<double>(bins);
  double lower = normal_cdf((0.0 - u) / sigma);
  for (std::size_t k = 0; k < bins; ++k) {
    const double hi = static_cast<double>(k + 1) / static_cast<double>(bins);
    const double upper = normal_cdf((hi - u) / sigma);
    out[k] = upper - lower;
    lower = upper;
  }
}

std::vector<double> oneblob_encode(const Point4& p, std::size_t bins) {
  check_bins(bins);
  std::vector<double> out(4 * bins);
  const double coords[4] = {p.x, p.y, p.z, p.tau};
  for (std::size_t c = 0; c < 4; ++c)
    oneblob_coordinate(coords[c], bins, std::span<double>(out).subspan(c * bins, bins));
  return out;
}

Tensor oneblob_encode(std::span<const Point4> points, std::size_t bins) {
  check_bins(bins);
  Tensor out({points.size(), 4 * bins});
  auto v = out.values();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double coords[4] = {points[i].x, points[i].y, points[i].z, points[i].tau};
    for (std::size_t c = 0; c < 4; ++c)
      oneblob_coordinate(coords[c], bins, v.subspan(i * 4 * bins + c * bins, bins));
  }
  return out;
}

}  // namespace planefield
