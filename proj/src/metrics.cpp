#include "planefield/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "planefield/errors.hpp"

namespace planefield {

namespace {

void check_pair(const Image& a, const Image& b, std::span<const std::uint8_t> mask, const char* who) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels)
    throw ContractViolation(std::string(who) + ": image shapes differ");
  if (!mask.empty() && mask.size() != a.width * a.height)
    throw ContractViolation(std::string(who) + ": mask size does not match the image");
}

std::vector<double> gray(const Image& img) {
  std::vector<double> out(img.width * img.height, 0.0);
  for (std::size_t p = 0; p < out.size(); ++p) {
    double s = 0;
    for (std::size_t c = 0; c < img.channels; ++c) s += img.data[p * img.channels + c];
    out[p] = s / static_cast<double>(img.channels);
  }
  return out;
}

}  // namespace

double psnr(const Image& pred, const Image& target, std::span<const std::uint8_t> mask) {
  check_pair(pred, target, mask, "psnr");
  double se = 0;
  std::size_t n = 0;
  const std::size_t ch = pred.channels;
  for (std::size_t p = 0; p < pred.width * pred.height; ++p) {
    if (!mask.empty() && !mask[p]) continue;
    for (std::size_t c = 0; c < ch; ++c) {
      const double d = pred.data[p * ch + c] - target.data[p * ch + c];
      se += d * d;
    }
    n += ch;
  }
  if (n == 0) throw ContractViolation("psnr: empty mask");
  const double mse = se / static_cast<double>(n);
  if (mse == 0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

double ssim(const Image& pred, const Image& target, std::span<const std::uint8_t> mask) {
  check_pair(pred, target, mask, "ssim");
  constexpr int kSize = 11, kHalf = 5;
  constexpr double kSigma = 1.5, C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  double kernel[kSize];
  double ksum = 0;
  for (int i = 0; i < kSize; ++i) {
    kernel[i] = std::exp(-double((i - kHalf) * (i - kHalf)) / (2 * kSigma * kSigma));
    ksum += kernel[i];
  }
  for (double& k : kernel) k /= ksum;

  const std::size_t w = pred.width, h = pred.height;
  const auto x = gray(pred);
  const auto y = gray(target);
  // Masked-out pixel counts over prefix rectangles, to test windows quickly.
  std::vector<std::size_t> holes((w + 1) * (h + 1), 0);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c)
      holes[(r + 1) * (w + 1) + c + 1] = holes[r * (w + 1) + c + 1] + holes[(r + 1) * (w + 1) + c] -
                                         holes[r * (w + 1) + c] + (!mask.empty() && !mask[r * w + c] ? 1 : 0);

  double total = 0;
  std::size_t windows = 0;
  for (std::size_t r = kHalf; r + kHalf < h; ++r)
    for (std::size_t c = kHalf; c + kHalf < w; ++c) {
      const std::size_t r0 = r - kHalf, c0 = c - kHalf, r1 = r + kHalf + 1, c1 = c + kHalf + 1;
      const std::size_t missing = holes[r1 * (w + 1) + c1] - holes[r0 * (w + 1) + c1] - holes[r1 * (w + 1) + c0] +
                                  holes[r0 * (w + 1) + c0];
      if (missing) continue;
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = 0; i < kSize; ++i)
        for (int j = 0; j < kSize; ++j) {
          const double k = kernel[i] * kernel[j];
          const std::size_t p = (r0 + i) * w + c0 + j;
          mx += k * x[p];
          my += k * y[p];
          sxx += k * x[p] * x[p];
          syy += k * y[p] * y[p];
          sxy += k * x[p] * y[p];
        }
      const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
      total += ((2 * mx * my + C1) * (2 * cxy + C2)) / ((mx * mx + my * my + C1) * (vx + vy + C2));
      ++windows;
    }
  if (windows == 0) throw ContractViolation("ssim: mask admits no complete 11x11 window");
  return total / static_cast<double>(windows);
}

void EvalReport::summarize() {
  auto stats = [&](auto get, double& mean, double& sd) {
    double n = 0;
    mean = sd = 0;
    for (const auto& f : frames)
      if (std::isfinite(get(f))) {
        mean += get(f);
        n += 1;
      }
    if (n == 0) return;
    mean /= n;
    for (const auto& f : frames)
      if (std::isfinite(get(f))) sd += (get(f) - mean) * (get(f) - mean);
    sd = std::sqrt(sd / n);
  };
  stats([](const FrameMetrics& f) { return f.psnr; }, psnr_mean, psnr_std);
  stats([](const FrameMetrics& f) { return f.ssim; }, ssim_mean, ssim_std);
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["mask"] = mask_mode;
  j["psnr"] = {{"mean", psnr_mean}, {"std", psnr_std}};
  j["ssim"] = {{"mean", ssim_mean}, {"std", ssim_std}};
  auto arr = nlohmann::json::array();
  for (const auto& f : frames) arr.push_back({{"frame", f.frame}, {"psnr", f.psnr}, {"ssim", f.ssim}});
  j["frames"] = arr;
  return j.dump(2) + "\n";
}

std::string EvalReport::to_csv() const {
  std::string s = "frame,psnr,ssim\n";
  char buf[128];
  for (const auto& f : frames) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f\n", f.frame, f.psnr, f.ssim);
    s += buf;
  }
  return s;
}

}  // namespace planefield
