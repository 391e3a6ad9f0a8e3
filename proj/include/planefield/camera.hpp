#pragma once

#include <array>
#include <cstddef>

namespace planefield {

using Vec3 = std::array<double, 3>;

/// Pinhole intrinsics of the single fixed viewpoint. The camera frame is the
/// scene frame: +x right, +y up, looking down -z.
struct CameraModel {
  double fx = 1, fy = 1, cx = 0, cy = 0;
  std::size_t width = 1, height = 1;
  double near = 1;  // scene units

  void validate() const;
  /// Unnormalized camera-frame direction through the centre of pixel (row, col).
  Vec3 pixel_direction(double row, double col) const;
};

/// Forward-facing NDC warp: the visible frustum maps into [-1, 1]^3, the
/// near plane to z = -1 and infinity to z = +1. Along every ray through the
/// camera centre, ndc z = -1 + 2t for t in [0, 1].
struct NdcMapping {
  double ax = 1, bx = 0, ay = 1, by = 0;
  double near = 1;

  Vec3 to_ndc(const Vec3& camera_point) const;
  Vec3 from_ndc(const Vec3& ndc_point) const;
  /// Metric z-depth (distance along -z) to the NDC ray parameter and back.
  double depth_to_t(double depth) const { return 1.0 - near / depth; }
  double t_to_depth(double t) const { return near / (1.0 - t); }
};

NdcMapping ndc_bounds(const CameraModel& camera);

}  // namespace planefield
