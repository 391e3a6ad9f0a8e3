#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace planefield {

/// Row-major interleaved image with channel values in [0, 1].
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(std::size_t w, std::size_t h, std::size_t c, double fill = 0.0)
      : width(w), height(h), channels(c), data(w * h * c, fill) {}

  double& at(std::size_t row, std::size_t col, std::size_t ch = 0) {
    return data[(row * width + col) * channels + ch];
  }
  double at(std::size_t row, std::size_t col, std::size_t ch = 0) const {
    return data[(row * width + col) * channels + ch];
  }
};

/// Raw PNG samples as stored in the file (8- or 16-bit).
struct PngPixels {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;
};

PngPixels read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const PngPixels& pixels);

/// 8-bit quantization with rounding and clamping to [0, 1].
void write_png8(const std::filesystem::path& path, const Image& image);
Image read_png8(const std::filesystem::path& path);

}  // namespace planefield
