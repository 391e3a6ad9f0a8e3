#include "planefield/camera.hpp"

#include <cmath>

#include "planefield/errors.hpp"

namespace planefield {

void CameraModel::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw ContractViolation("camera: focal lengths must be positive");
  if (!(near > 0)) throw ContractViolation("camera: near bound must be positive");
  if (width == 0 || height == 0) throw ContractViolation("camera: image size must be positive");
}

Vec3 CameraModel::pixel_direction(double row, double col) const {
  return {(col + 0.5 - cx) / fx, -(row + 0.5 - cy) / fy, -1.0};
}

Vec3 NdcMapping::to_ndc(const Vec3& p) const {
  const double depth = -p[2];
  return {ax * p[0] / depth + bx, ay * p[1] / depth + by, 1.0 + 2.0 * near / p[2]};
}

Vec3 NdcMapping::from_ndc(const Vec3& q) const {
  const double z = 2.0 * near / (q[2] - 1.0);
  return {(q[0] - bx) / ax * -z, (q[1] - by) / ay * -z, z};
}

NdcMapping ndc_bounds(const CameraModel& camera) {
  camera.validate();
  NdcMapping m;
  const double w = static_cast<double>(camera.width);
  const double h = static_cast<double>(camera.height);
  m.ax = 2.0 * camera.fx / w;
  m.bx = 2.0 * camera.cx / w - 1.0;
  m.ay = 2.0 * camera.fy / h;
  m.by = 1.0 - 2.0 * camera.cy / h;
  m.near = camera.near;
  return m;
}

}  // namespace planefield
