// Bundled test silhouettes: analytic disc/ellipse masks plus two authored
// two-hand poses ("rabbit": one hand raising a pair of ear fingers behind a
// curled fist, "bird": two spread hands crossed at the wrists). The rabbit
// and bird targets are hard renders of those poses, so a reachable exact
// solution always exists for them.
#pragma once

#include "handshadow/rasterize.hpp"
#include "handshadow/rig_io.hpp"

namespace handshadow {

inline GrayImage bundled_disc(int height, int width, double cx = 0.0,
                              double cy = 0.0, double radius = 0.5) {
  GrayImage img(height, width);
  for (int r = 0; r < height; ++r) {
    double y = 1.0 - 2.0 * (r + 0.5) / height;
    for (int c = 0; c < width; ++c) {
      double x = -1.0 + 2.0 * (c + 0.5) / width;
      img.at(r, c) = ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= radius * radius)
                         ? 1.0 : 0.0;
    }
  }
  return img;
}

inline GrayImage bundled_ellipse(int height, int width, double cx = 0.0,
                                 double cy = 0.0, double rx = 0.6,
                                 double ry = 0.35, double angle_rad = 0.0) {
  GrayImage img(height, width);
  double ca = std::cos(angle_rad), sa = std::sin(angle_rad);
  for (int r = 0; r < height; ++r) {
    double y = 1.0 - 2.0 * (r + 0.5) / height;
    for (int c = 0; c < width; ++c) {
      double x = -1.0 + 2.0 * (c + 0.5) / width;
      double u = ca * (x - cx) + sa * (y - cy);
      double v = -sa * (x - cx) + ca * (y - cy);
      img.at(r, c) = (u * u / (rx * rx) + v * v / (ry * ry) <= 1.0) ? 1.0 : 0.0;
    }
  }
  return img;
}

namespace targetdetail {

inline void set_theta_deg(HandParams& p, int finger, int joint, double x,
                          double y, double z) {
  int j = finger * 3 + joint;
  p.theta[size_t(j * 3)] = deg_to_rad(x);
  p.theta[size_t(j * 3 + 1)] = deg_to_rad(y);
  p.theta[size_t(j * 3 + 2)] = deg_to_rad(z);
}

}  // namespace targetdetail

// Fingers: 0 thumb, 1 index, 2 middle, 3 ring, 4 little.
inline std::vector<std::pair<Handedness, HandParams>> rabbit_pose() {
  using targetdetail::set_theta_deg;
  HandParams left;   // ears: index+middle straight up, ring+little curled
  set_theta_deg(left, 1, 0, 0, 2, 4);
  set_theta_deg(left, 1, 1, 0, 0, 3);
  set_theta_deg(left, 1, 2, 0, 0, 4);
  set_theta_deg(left, 2, 0, 0, 8, 6);
  set_theta_deg(left, 2, 1, 0, 0, 4);
  set_theta_deg(left, 2, 2, 0, 0, 5);
  set_theta_deg(left, 3, 0, 0, 2, 70);
  set_theta_deg(left, 3, 1, 0, 0, 52);
  set_theta_deg(left, 3, 2, 0, 0, 70);
  set_theta_deg(left, 4, 0, 0, 5, 70);
  set_theta_deg(left, 4, 1, 0, 0, 52);
  set_theta_deg(left, 4, 2, 0, 0, 60);
  set_theta_deg(left, 0, 0, 15, 25, 35);
  set_theta_deg(left, 0, 1, 8, 15, 18);
  set_theta_deg(left, 0, 2, 4, 20, 0);
  left.q = (Quat::axis_angle({0, 0, 1}, deg_to_rad(8.0)) *
            base_orientation(Handedness::Left))
               .normalized();
  left.t = {0.010, -0.065, -0.46};

  HandParams right;  // curled fist forming the head
  set_theta_deg(right, 1, 0, 0, -6, -32);
  set_theta_deg(right, 1, 1, 0, 0, -42);
  set_theta_deg(right, 1, 2, 0, 0, -14);
  set_theta_deg(right, 2, 0, 0, -10, -14);
  set_theta_deg(right, 2, 1, 0, 0, -14);
  set_theta_deg(right, 2, 2, 0, 0, -42);
  set_theta_deg(right, 3, 0, 0, -6, -32);
  set_theta_deg(right, 3, 1, 0, 0, -42);
  set_theta_deg(right, 3, 2, 0, 0, -14);
  set_theta_deg(right, 4, 0, 0, -15, -32);
  set_theta_deg(right, 4, 1, 0, 0, -42);
  set_theta_deg(right, 4, 2, 0, 0, -4);
  set_theta_deg(right, 0, 0, -35, -8, -25);
  set_theta_deg(right, 0, 1, -8, -15, -8);
  set_theta_deg(right, 0, 2, -4, -35, 0);
  right.q = (Quat::axis_angle({0, 0, 1}, deg_to_rad(-15.0)) *
             base_orientation(Handedness::Right))
                .normalized();
  right.t = {-0.015, -0.115, -0.45};

  return {{Handedness::Left, left}, {Handedness::Right, right}};
}

inline std::vector<std::pair<Handedness, HandParams>> bird_pose() {
  using targetdetail::set_theta_deg;
  HandParams left;  // right wing: spread fingers, tilted outward
  set_theta_deg(left, 1, 0, 0, 20, 8);
  set_theta_deg(left, 1, 1, 0, 0, 6);
  set_theta_deg(left, 1, 2, 0, 0, 8);
  set_theta_deg(left, 2, 0, 0, 7, 10);
  set_theta_deg(left, 2, 1, 0, 0, 8);
  set_theta_deg(left, 2, 2, 0, 0, 10);
  set_theta_deg(left, 3, 0, 0, 12, 12);
  set_theta_deg(left, 3, 1, 0, 0, 10);
  set_theta_deg(left, 3, 2, 0, 0, 12);
  set_theta_deg(left, 4, 0, 0, 22, 15);
  set_theta_deg(left, 4, 1, 0, 0, 12);
  set_theta_deg(left, 4, 2, 0, 0, 15);
  set_theta_deg(left, 0, 0, 10, 18, 28);
  set_theta_deg(left, 0, 1, 5, 10, 12);
  set_theta_deg(left, 0, 2, 2, 12, 0);
  left.q = (Quat::axis_angle({0, 0, 1}, deg_to_rad(-38.0)) *
            base_orientation(Handedness::Left))
               .normalized();
  left.t = {0.035, -0.03, -0.46};

  HandParams right;  // left wing, mirrored
  set_theta_deg(right, 1, 0, 0, -12, -8);
  set_theta_deg(right, 1, 1, 0, 0, -6);
  set_theta_deg(right, 1, 2, 0, 0, -8);
  set_theta_deg(right, 2, 0, 0, -16, -6);
  set_theta_deg(right, 2, 1, 0, 0, -8);
  set_theta_deg(right, 2, 2, 0, 0, -10);
  set_theta_deg(right, 3, 0, 0, -10, -12);
  set_theta_deg(right, 3, 1, 0, 0, -10);
  set_theta_deg(right, 3, 2, 0, 0, -12);
  set_theta_deg(right, 4, 0, 0, -30, -15);
  set_theta_deg(right, 4, 1, 0, 0, -12);
  set_theta_deg(right, 4, 2, 0, 0, -4);
  set_theta_deg(right, 0, 0, -30, -8, -22);
  set_theta_deg(right, 0, 1, -5, -12, -8);
  set_theta_deg(right, 0, 2, -2, -20, 0);
  right.q = (Quat::axis_angle({0, 0, 1}, deg_to_rad(38.0)) *
             base_orientation(Handedness::Right))
                .normalized();
  right.t = {-0.035, -0.03, -0.46};

  return {{Handedness::Left, left}, {Handedness::Right, right}};
}

// Hard silhouette of a bundled named pose, rendered with the given rigs.
inline GrayImage bundled_hand_target(const std::string& name,
                                     const HandRig& left, const HandRig& right,
                                     const Camera& cam) {
  auto pose = name == "rabbit" ? rabbit_pose()
            : name == "bird"   ? bird_pose()
                               : throw std::invalid_argument(
                                     "unknown bundled target: " + name);
  auto xl = forward_kinematics(left, pose_values(pose[0].second));
  auto xr = forward_kinematics(right, pose_values(pose[1].second));
  TriMesh ml = skin(left, xl, pose[0].second.beta);
  TriMesh mr = skin(right, xr, pose[1].second.beta);
  const TriMesh* ms[2] = {&ml, &mr};
  return render_silhouette_hard(std::span<const TriMesh* const>(ms, 2), cam);
}

}  // namespace handshadow
