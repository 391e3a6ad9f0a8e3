#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "planefield/image_io.hpp"

namespace planefield {

constexpr double kPsnrCap = 99.0;

/// PSNR in dB (MAX = 1) over pixels where mask != 0; an empty mask means
/// every pixel. Zero error reports kPsnrCap.
double psnr(const Image& pred, const Image& target, std::span<const std::uint8_t> mask = {});

/// Mean SSIM of the channel-mean grayscale images over 11x11 Gaussian
/// (sigma 1.5) windows that lie entirely inside the mask.
double ssim(const Image& pred, const Image& target, std::span<const std::uint8_t> mask = {});

struct FrameMetrics {
  std::size_t frame = 0;
  double psnr = 0;
  double ssim = 0;
};

struct EvalReport {
  std::vector<FrameMetrics> frames;
  double psnr_mean = 0, psnr_std = 0;
  double ssim_mean = 0, ssim_std = 0;
  std::string mask_mode = "tissue";

  void summarize();
  std::string to_json() const;
  std::string to_csv() const;
};

}  // namespace planefield
