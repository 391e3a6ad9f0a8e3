#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "planefield/camera.hpp"
#include "planefield/dataset.hpp"
#include "planefield/field.hpp"

namespace planefield {

/// Isotropic Gaussian density blob in camera space; its centre moves as
/// center + velocity * tau.
struct SynthBlob {
  Vec3 center{0, 0, -3};
  Vec3 velocity{0, 0, 0};
  double radius = 0.3;
  double density = 20.0;  // peak, per scene unit
  std::array<double, 3> color{1, 1, 1};

  Vec3 center_at(double tau) const;
};

struct SynthSpec {
  std::size_t width = 32;
  std::size_t height = 32;
  std::size_t frames = 20;
  double near = 1.0;
  double depth_scale = 0.001;
  std::vector<SynthBlob> blobs;
  bool tool_bar = false;
  std::size_t steps = 1024;  // quadrature intervals per ray
};

/// Backdrop, one static blob and one translating blob, jittered by `seed`.
SynthSpec default_synth_spec(std::size_t width, std::size_t height, std::size_t frames, std::uint64_t seed);

CameraModel synth_camera(const SynthSpec& spec);

/// Exact scene density and color at a point in NDC space-time.
class SynthOracle {
 public:
  SynthOracle(SynthSpec spec, CameraModel camera);

  /// Density per unit of metric path length at a camera-space point.
  double world_density(const Vec3& p, double tau) const;
  /// Density per unit NDC ray parameter, and the density-weighted color.
  std::pair<double, std::array<double, 3>> query(const Point4& ndc_point) const;

  struct PixelTruth {
    std::array<double, 3> color{0, 0, 0};
    double opacity = 0;
    double depth = 0;  // metric z-depth, 0 when opacity <= 0.5
  };
  /// Closed-form transmittance along the camera ray, color by interval quadrature.
  PixelTruth pixel(std::size_t row, std::size_t col, double tau) const;

  const SynthSpec& spec() const { return spec_; }
  const CameraModel& camera() const { return camera_; }

 private:
  SynthSpec spec_;
  CameraModel camera_;
  NdcMapping ndc_;
};

struct SynthScene {
  Dataset data;
  SynthOracle oracle;
};

SynthScene synth_scene(const SynthSpec& spec);

}  // namespace planefield
