#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "planefield/field.hpp"
#include "planefield/image_io.hpp"

namespace planefield::oracle {

// Align-corners bilinear interpolation written from the textbook formula.
inline std::vector<double> textbook_bilerp(const FeaturePlane& p, double u, double v) {
  const double r = (std::clamp(u, -1.0, 1.0) + 1) / 2 * double(p.rows - 1);
  const double c = (std::clamp(v, -1.0, 1.0) + 1) / 2 * double(p.cols - 1);
  const std::size_t r0 = std::min<std::size_t>(std::size_t(std::floor(r)), p.rows - 1);
  const std::size_t c0 = std::min<std::size_t>(std::size_t(std::floor(c)), p.cols - 1);
  const std::size_t r1 = std::min(r0 + 1, p.rows - 1), c1 = std::min(c0 + 1, p.cols - 1);
  const double a = r - double(r0), b = c - double(c0);
  std::vector<double> out(p.feat_dim);
  auto at = [&](std::size_t i, std::size_t j, std::size_t f) { return p.data[(i * p.cols + j) * p.feat_dim + f]; };
  for (std::size_t f = 0; f < p.feat_dim; ++f)
    out[f] = (1 - a) * (1 - b) * at(r0, c0, f) + a * (1 - b) * at(r1, c0, f) + (1 - a) * b * at(r0, c1, f) +
             a * b * at(r1, c1, f);
  return out;
}

/// Direct per-window evaluation of SSIM on channel-mean grayscale.
inline double ssim_reference(const Image& a, const Image& b) {
  const int r = 5;
  double k[11][11], ksum = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) ksum += k[i][j] = std::exp(-((i - r) * (i - r) + (j - r) * (j - r)) / (2 * 1.5 * 1.5));
  auto gray = [](const Image& img, int y, int x) {
    return (img.at(y, x, 0) + img.at(y, x, 1) + img.at(y, x, 2)) / 3.0;
  };
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0;
  int count = 0;
  for (int y = r; y + r < int(a.height); ++y)
    for (int x = r; x + r < int(a.width); ++x) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = -r; i <= r; ++i)
        for (int j = -r; j <= r; ++j) {
          const double w = k[i + r][j + r] / ksum;
          const double pa = gray(a, y + i, x + j), pb = gray(b, y + i, x + j);
          ma += w * pa;
          mb += w * pb;
          saa += w * pa * pa;
          sbb += w * pb * pb;
          sab += w * pa * pb;
        }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return total / count;
}

}  // namespace planefield::oracle
