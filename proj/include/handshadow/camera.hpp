// Fixed camera at the origin looking down -z. Projection is templated on the
// scalar type so it can run on plain values or on the tape.
#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>

#include "handshadow/math.hpp"

namespace handshadow {

struct Camera {
  double fov_y_deg = 60.0;  // vertical field of view
  double near_plane = 0.05;
  double far_plane = 2.0;
  int height = 256, width = 256;

  void validate() const {
    if (!(near_plane > 0.0 && near_plane < far_plane))
      throw std::invalid_argument("camera: require 0 < near < far");
    if (!(fov_y_deg > 10.0 && fov_y_deg < 120.0))
      throw std::invalid_argument("camera: fov must be in (10, 120) degrees");
    if (height <= 0 || width <= 0)
      throw std::invalid_argument("camera: resolution must be positive");
  }

  double aspect() const { return double(width) / double(height); }
  double tan_half_fov() const { return std::tan(deg_to_rad(fov_y_deg) * 0.5); }
};

struct DirectionalLight {
  Vec3 direction{0.0, 0.0, -1.0};
};

// Camera plus nominal light; the light only affects figure-style exports.
struct ViewingConfig {
  Camera camera;
  std::optional<DirectionalLight> light;
};

template <class T>
struct Projected {
  T x{}, y{};   // NDC in [-1,1] inside the frustum
  T depth{};    // distance in front of the camera (positive)
};

// Perspective divide onto NDC; x is scaled by the aspect so NDC +-1 spans the
// image in both axes. Points at or behind the near plane are the caller's
// problem (triangles using them get culled before rasterization).
template <class T>
Projected<T> project(const Camera& cam, const TVec3<T>& p) {
  T depth = -p.z;
  T inv = 1.0 / depth;
  double sy = 1.0 / cam.tan_half_fov();
  double sx = sy / cam.aspect();
  return {p.x * inv * sx, p.y * inv * sy, depth};
}

// Pixel-center NDC coordinates; row 0 is the top of the image, NDC y up.
inline double pixel_center_x(const Camera& cam, int col) {
  return -1.0 + 2.0 * (double(col) + 0.5) / double(cam.width);
}
inline double pixel_center_y(const Camera& cam, int row) {
  return 1.0 - 2.0 * (double(row) + 0.5) / double(cam.height);
}

// Inverse of the pixel mapping, for bounding-box rasterization loops.
inline int ndc_to_col(const Camera& cam, double x) {
  return int(std::floor((x + 1.0) * 0.5 * double(cam.width) - 0.5));
}
inline int ndc_to_row(const Camera& cam, double y) {
  return int(std::floor((1.0 - y) * 0.5 * double(cam.height) - 0.5));
}

}  // namespace handshadow
