// Parametric hand: kinematic tree (wrist root + 5 fingers x 3 joints), rest
// mesh, skin weights, per-joint angular limits and the pose parameters
// (theta, Q, t, fixed beta). Includes the procedural low-poly hand used in
// place of an external rig asset, forward kinematics and linear blend
// skinning, both templated on the scalar type.
//
// Rest frame convention (left hand): fingers along +x, palm normal +y, thumb
// on the +z side. The right hand mirrors x. Finger flexion is rotation about
// z, spread about y, twist about x.
#pragma once

#include <array>
#include <span>
#include <string>

#include "handshadow/autodiff.hpp"
#include "handshadow/collision.hpp"
#include "handshadow/math.hpp"
#include "handshadow/mesh.hpp"

namespace handshadow {

enum class Handedness { Left, Right };

inline const char* to_string(Handedness h) {
  return h == Handedness::Left ? "left" : "right";
}

constexpr int kNumJoints = 16;        // wrist root + 15 articulated
constexpr int kNumArticulated = 15;   // 5 fingers x 3
constexpr int kNumFingers = 5;        // thumb, index, middle, ring, little

class RigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Per articulated joint: signed far bounds (degrees) about (x, y, z). The
// feasible interval of each channel is [min(0,b), max(0,b)].
struct JointLimits {
  std::array<Vec3, kNumArticulated> bounds_deg{};

  std::pair<double, double> channel_interval_rad(int joint, int axis) const {
    const Vec3& b = bounds_deg[size_t(joint)];
    double v = deg_to_rad(axis == 0 ? b.x : (axis == 1 ? b.y : b.z));
    return {std::min(0.0, v), std::max(0.0, v)};
  }
};

struct HandParams {
  std::array<double, 6> beta{1.0, 1.0, 1.0, 1.0, 1.0, 1.0};  // global + per-finger length
  std::array<double, 45> theta{};  // radians, [articulated_joint*3 + axis]
  Quat q = Quat::identity();
  Vec3 t{0.0, 0.0, 0.0};
};

// Base global orientation: palm normal (+y in the rig frame) turned toward
// the camera, fingers up.
inline Quat base_orientation(Handedness h) {
  Quat tilt = Quat::axis_angle({1, 0, 0}, deg_to_rad(90.0));
  Quat roll = Quat::axis_angle({0, 0, 1},
                               deg_to_rad(h == Handedness::Left ? 90.0 : -90.0));
  return (roll * tilt).normalized();
}

inline HandParams clamp_pose(const HandParams& p, const JointLimits& limits) {
  HandParams out = p;
  for (int j = 0; j < kNumArticulated; ++j) {
    for (int a = 0; a < 3; ++a) {
      auto [lo, hi] = limits.channel_interval_rad(j, a);
      double& v = out.theta[size_t(j * 3 + a)];
      v = std::min(hi, std::max(lo, v));
    }
  }
  out.q = p.q.normalized();
  return out;
}

struct HandRig {
  struct Joint {
    int parent = -1;
    Vec3 offset;        // rest offset from parent, meters
    int finger = -1;    // -1 for root, else 0..4 (thumb..little)
    Vec3 axis{1, 0, 0}; // bone direction in the joint's local frame
  };
  struct Influence {
    int joint = 0;
    double weight = 0.0;
  };

  Handedness handedness = Handedness::Left;
  std::array<Joint, kNumJoints> joints{};
  TriMesh rest_mesh;
  std::vector<std::array<Influence, 4>> skin_weights;  // per vertex
  JointLimits limits;

  // Derived at build/load time.
  std::array<Vec3, kNumJoints> joint_rest_pos{};
  std::vector<std::array<Vec3, 4>> local_pos;  // rest vertex in each influence frame
  std::vector<int> tri_bone;                   // dominant bone per triangle
  std::vector<int> vert_bone;                  // dominant bone per vertex

  int finger_of(int joint) const { return joints[size_t(joint)].finger; }

  bool bones_adjacent(int a, int b) const {
    if (a == b) return true;
    if (std::abs(a - b) <= 1) return true;
    return joints[size_t(a)].parent == b || joints[size_t(b)].parent == a;
  }

  void finalize() {
    validate();
    for (int j = 0; j < kNumJoints; ++j) {
      const Joint& jt = joints[size_t(j)];
      joint_rest_pos[size_t(j)] =
          jt.parent < 0 ? jt.offset
                        : joint_rest_pos[size_t(jt.parent)] + jt.offset;
    }
    local_pos.resize(rest_mesh.vertices.size());
    vert_bone.resize(rest_mesh.vertices.size());
    for (size_t v = 0; v < rest_mesh.vertices.size(); ++v) {
      double best = -1.0;
      for (int k = 0; k < 4; ++k) {
        const Influence& inf = skin_weights[v][size_t(k)];
        local_pos[v][size_t(k)] =
            rest_mesh.vertices[v] - joint_rest_pos[size_t(inf.joint)];
        if (inf.weight > best) {
          best = inf.weight;
          vert_bone[v] = inf.joint;
        }
      }
    }
    tri_bone.resize(rest_mesh.triangles.size());
    for (size_t t = 0; t < rest_mesh.triangles.size(); ++t) {
      const Tri& tri = rest_mesh.triangles[t];
      // Dominant bone by summed corner weights.
      std::array<double, kNumJoints> acc{};
      for (int corner : {tri.a, tri.b, tri.c})
        for (const Influence& inf : skin_weights[size_t(corner)])
          acc[size_t(inf.joint)] += inf.weight;
      int best = 0;
      for (int j = 1; j < kNumJoints; ++j)
        if (acc[size_t(j)] > acc[size_t(best)]) best = j;
      tri_bone[t] = best;
    }
  }

  void validate() const {
    if (joints[0].parent != -1) throw RigError("joint 0 must be the wrist root");
    for (int j = 1; j < kNumJoints; ++j)
      if (joints[size_t(j)].parent < 0 || joints[size_t(j)].parent >= j)
        throw RigError("bad parent ordering at joint " + std::to_string(j));
    if (skin_weights.size() != rest_mesh.vertices.size())
      throw RigError("skin weight count does not match vertex count");
    for (size_t v = 0; v < skin_weights.size(); ++v) {
      double s = 0.0;
      for (const Influence& inf : skin_weights[v]) {
        if (inf.weight < 0.0)
          throw RigError("vertex " + std::to_string(v) + ": negative skin weight");
        if (inf.joint < 0 || inf.joint >= kNumJoints)
          throw RigError("vertex " + std::to_string(v) + ": influence joint out of range");
        s += inf.weight;
      }
      if (std::abs(s - 1.0) > 1e-6)
        throw RigError("vertex " + std::to_string(v) + ": skin weights sum to " +
                       std::to_string(s) + ", expected 1");
    }
    validate_mesh(rest_mesh);
    if (!is_watertight(rest_mesh))
      throw RigError("rest mesh is not watertight");
  }
};

// --- Table of per-joint angular bounds --------------------------------------

// Finger order: thumb, index, middle, ring, little; per finger J.1..J.3, each
// (x, y, z) in degrees.
inline JointLimits default_limits(Handedness h) {
  JointLimits lim;
  if (h == Handedness::Left) {
    lim.bounds_deg = {
        Vec3{20, 30, 40},  Vec3{10, 20, 20}, Vec3{5, 25, 0},    // thumb
        Vec3{0, 25, 75},   Vec3{0, 0, 45},   Vec3{0, 0, 75},    // index
        Vec3{0, 10, 75},   Vec3{0, 0, 55},   Vec3{0, 0, 75},    // middle
        Vec3{0, 15, 75},   Vec3{0, 0, 55},   Vec3{0, 0, 75},    // ring
        Vec3{0, 25, 75},   Vec3{0, 0, 55},   Vec3{0, 0, 65},    // little
    };
  } else {
    lim.bounds_deg = {
        Vec3{-50, -10, -30}, Vec3{-10, -20, -10}, Vec3{-5, -50, 0},   // thumb
        Vec3{0, -15, -35},   Vec3{0, 0, -45},     Vec3{0, 0, -15},    // index
        Vec3{0, -25, -15},   Vec3{0, 0, -15},     Vec3{0, 0, -45},    // middle
        Vec3{0, -15, -35},   Vec3{0, 0, -45},     Vec3{0, 0, -15},    // ring
        Vec3{0, -40, -35},   Vec3{0, 0, -45},     Vec3{0, 0, -5},     // little
    };
  }
  return lim;
}

// --- Procedural hand ---------------------------------------------------------

namespace rigdetail {

// Closed capsule-like prism: n-gon rings along dir with domed pole caps.
// Appends into mesh; returns the vertex range added.
inline std::pair<int, int> append_capsule(TriMesh& mesh, const Vec3& base,
                                          const Vec3& dir, double length,
                                          double radius, double back,
                                          double front) {
  const int n = 10;
  Vec3 d = normalized(dir);
  Vec3 up = std::abs(d.y) < 0.9 ? Vec3{0, 1, 0} : Vec3{0, 0, 1};
  Vec3 n1 = normalized(cross(up, d));
  Vec3 n2 = cross(d, n1);

  int v0 = int(mesh.vertices.size());
  const double s[3] = {-back, length * 0.5, length + front};
  const double r[3] = {radius, radius, radius * 0.9};
  for (int ring = 0; ring < 3; ++ring) {
    for (int k = 0; k < n; ++k) {
      double a = 2.0 * kPi * double(k) / double(n);
      mesh.vertices.push_back(base + d * s[ring] +
                              (n1 * std::cos(a) + n2 * std::sin(a)) * r[ring]);
    }
  }
  int pole_base = int(mesh.vertices.size());
  mesh.vertices.push_back(base + d * (s[0] - radius * 0.6));
  int pole_tip = int(mesh.vertices.size());
  mesh.vertices.push_back(base + d * (s[2] + radius * 0.6));

  auto ring_v = [&](int ring, int k) { return v0 + ring * n + (k % n); };
  for (int k = 0; k < n; ++k) {
    mesh.triangles.push_back({pole_base, ring_v(0, k), ring_v(0, k + 1)});
    mesh.triangles.push_back({pole_tip, ring_v(2, k + 1), ring_v(2, k)});
    for (int ring = 0; ring < 2; ++ring) {
      mesh.triangles.push_back({ring_v(ring, k), ring_v(ring + 1, k), ring_v(ring + 1, k + 1)});
      mesh.triangles.push_back({ring_v(ring, k), ring_v(ring + 1, k + 1), ring_v(ring, k + 1)});
    }
  }
  return {v0, int(mesh.vertices.size())};
}

inline std::pair<int, int> append_box(TriMesh& mesh, const Vec3& lo,
                                      const Vec3& hi) {
  int v0 = int(mesh.vertices.size());
  for (int i = 0; i < 8; ++i)
    mesh.vertices.push_back({i & 1 ? hi.x : lo.x, i & 2 ? hi.y : lo.y,
                             i & 4 ? hi.z : lo.z});
  // 12 triangles, outward orientation.
  const int f[12][3] = {{0, 2, 3}, {0, 3, 1}, {4, 5, 7}, {4, 7, 6},
                        {0, 1, 5}, {0, 5, 4}, {2, 6, 7}, {2, 7, 3},
                        {0, 4, 6}, {0, 6, 2}, {1, 3, 7}, {1, 7, 5}};
  for (auto& t : f)
    mesh.triangles.push_back({v0 + t[0], v0 + t[1], v0 + t[2]});
  return {v0, v0 + 8};
}

}  // namespace rigdetail

// Deterministic low-poly hand: palm box plus five capsule-chain fingers with
// three joints each; the thumb is offset to the palm's side and angled. The
// right hand is the x-mirror of the left. The whole rest mesh is uniformly
// rescaled so the bounding-box width (z extent, across the palm and thumb)
// equals 0.09 * scale meters.
inline HandRig make_procedural_hand(Handedness handedness, double scale = 1.0) {
  HandRig rig;
  rig.handedness = handedness;
  rig.limits = default_limits(handedness);

  // All dimensions in meters, left hand; mirrored later if needed.
  const double palm_len = 0.085, palm_hw = 0.034, palm_ht = 0.012;
  const double knuckle_z[4] = {0.0255, 0.0085, -0.0085, -0.0255};  // index..little
  const double seg_len[5][3] = {{0.034, 0.028, 0.022},    // thumb
                                {0.038, 0.024, 0.019},    // index
                                {0.042, 0.027, 0.021},    // middle
                                {0.039, 0.025, 0.019},    // ring
                                {0.030, 0.019, 0.016}};   // little
  const double seg_rad[5] = {0.0082, 0.0072, 0.0074, 0.0070, 0.0062};
  const Vec3 thumb_base{0.018, -0.002, 0.030};
  const Vec3 thumb_axis = normalized(Vec3{0.78, -0.10, 0.61});

  // Kinematic tree: 0 = wrist root at origin; fingers thumb..little, each
  // J.1 parented to the root.
  rig.joints[0] = {-1, Vec3{0, 0, 0}, -1, Vec3{1, 0, 0}};
  for (int f = 0; f < kNumFingers; ++f) {
    Vec3 axis = f == 0 ? thumb_axis : Vec3{1, 0, 0};
    Vec3 base = f == 0 ? thumb_base : Vec3{palm_len, 0.0, knuckle_z[f - 1]};
    int j1 = 1 + f * 3;
    rig.joints[size_t(j1)] = {0, base, f, axis};
    rig.joints[size_t(j1 + 1)] = {j1, axis * seg_len[f][0], f, axis};
    rig.joints[size_t(j1 + 2)] = {j1 + 1, axis * seg_len[f][1], f, axis};
  }

  // Rest geometry: one closed component per bone, so the union stays
  // watertight under the edge-pairing definition.
  TriMesh& mesh = rig.rest_mesh;
  std::vector<int> comp_bone;  // per component
  std::vector<std::pair<int, int>> comp_range;      // vertex ranges
  std::vector<std::pair<int, int>> comp_tri_range;  // triangle ranges

  auto add_component = [&](auto&& append, int bone) {
    int t0 = int(mesh.triangles.size());
    comp_range.push_back(append());
    comp_tri_range.push_back({t0, int(mesh.triangles.size())});
    comp_bone.push_back(bone);
  };

  add_component(
      [&] {
        return rigdetail::append_box(mesh, Vec3{-0.012, -palm_ht, -palm_hw},
                                     Vec3{palm_len + 0.002, palm_ht, palm_hw});
      },
      0);

  std::array<Vec3, kNumJoints> rest_pos{};
  for (int j = 0; j < kNumJoints; ++j) {
    const auto& jt = rig.joints[size_t(j)];
    rest_pos[size_t(j)] = jt.parent < 0 ? jt.offset : rest_pos[size_t(jt.parent)] + jt.offset;
  }

  for (int f = 0; f < kNumFingers; ++f) {
    Vec3 axis = f == 0 ? thumb_axis : Vec3{1, 0, 0};
    for (int s = 0; s < 3; ++s) {
      int joint = 1 + f * 3 + s;
      double r = seg_rad[f] * (s == 2 ? 0.9 : 1.0);
      double back = r * 0.8;
      double front = s == 2 ? r * 0.2 : r * 0.8;
      add_component(
          [&, joint, r, back, front, axis] {
            return rigdetail::append_capsule(mesh, rest_pos[size_t(joint)],
                                             axis, seg_len[f][size_t(s)], r,
                                             back, front);
          },
          joint);
    }
  }

  // Rigid weights, with a blended collar on each segment's base ring so bent
  // joints deform smoothly.
  rig.skin_weights.assign(mesh.vertices.size(),
                          {HandRig::Influence{0, 1.0}, HandRig::Influence{0, 0.0},
                           HandRig::Influence{0, 0.0}, HandRig::Influence{0, 0.0}});
  for (size_t c = 0; c < comp_range.size(); ++c) {
    int bone = comp_bone[c];
    auto [v0, v1] = comp_range[c];
    int parent = rig.joints[size_t(bone)].parent;
    for (int v = v0; v < v1; ++v) {
      bool collar = bone != 0 && (v - v0 < 10 || v == v1 - 2);  // base ring + base pole
      if (collar && parent >= 0) {
        rig.skin_weights[size_t(v)] = {HandRig::Influence{bone, 0.6},
                                       HandRig::Influence{parent, 0.4},
                                       HandRig::Influence{0, 0.0},
                                       HandRig::Influence{0, 0.0}};
      } else {
        rig.skin_weights[size_t(v)] = {HandRig::Influence{bone, 1.0},
                                       HandRig::Influence{0, 0.0},
                                       HandRig::Influence{0, 0.0},
                                       HandRig::Influence{0, 0.0}};
      }
    }
  }

  if (handedness == Handedness::Right) {
    for (Vec3& v : mesh.vertices) v.x = -v.x;
    for (Tri& t : mesh.triangles) std::swap(t.b, t.c);
    for (auto& j : rig.joints) {
      j.offset.x = -j.offset.x;
      j.axis.x = -j.axis.x;
    }
  }

  // Uniform rescale so the rest bounding-box width (z extent) is 0.09*scale.
  Aabb bb = mesh_bounds(mesh);
  double k = 0.09 * scale / (bb.hi.z - bb.lo.z);
  for (Vec3& v : mesh.vertices) v = v * k;
  for (auto& j : rig.joints) j.offset = j.offset * k;

  // Orient every closed component outward (positive enclosed volume).
  for (size_t c = 0; c < comp_tri_range.size(); ++c) {
    double vol = 0.0;
    for (int t = comp_tri_range[c].first; t < comp_tri_range[c].second; ++t) {
      const Tri& tr = mesh.triangles[size_t(t)];
      vol += dot(mesh.vertices[size_t(tr.a)],
                 cross(mesh.vertices[size_t(tr.b)], mesh.vertices[size_t(tr.c)]));
    }
    if (vol < 0.0)
      for (int t = comp_tri_range[c].first; t < comp_tri_range[c].second; ++t)
        std::swap(mesh.triangles[size_t(t)].b, mesh.triangles[size_t(t)].c);
  }

  rig.finalize();
  return rig;
}

// --- Forward kinematics -------------------------------------------------------

// Pose lifted to a scalar type (double for plain evaluation, Var on a tape).
template <class T>
struct TPose {
  std::array<T, 45> theta{};
  std::array<T, 4> quat{};  // w, x, y, z
  TVec3<T> t{};
  std::array<double, 6> beta{1, 1, 1, 1, 1, 1};
};

inline TPose<double> pose_values(const HandParams& p) {
  TPose<double> out;
  out.theta = p.theta;
  out.quat = {p.q.w, p.q.x, p.q.y, p.q.z};
  out.t = p.t;
  out.beta = p.beta;
  return out;
}

inline TPose<Var> pose_leaves(Tape& tape, const HandParams& p) {
  TPose<Var> out;
  for (int i = 0; i < 45; ++i) out.theta[size_t(i)] = tape.leaf(p.theta[size_t(i)]);
  out.quat = {tape.leaf(p.q.w), tape.leaf(p.q.x), tape.leaf(p.q.y), tape.leaf(p.q.z)};
  out.t = {tape.leaf(p.t.x), tape.leaf(p.t.y), tape.leaf(p.t.z)};
  out.beta = p.beta;
  return out;
}

template <class T>
struct JointTransform {
  TMat3<T> rot;   // linear part (rotation times global scale)
  TVec3<T> pos;
};

// Intrinsic X-then-Y-then-Z rotation, Rx(tx)*Ry(ty)*Rz(tz) expanded.
template <class T>
TMat3<T> rot_xyz(const T& tx, const T& ty, const T& tz) {
  T cx = cos(tx), sx = sin(tx);
  T cy = cos(ty), sy = sin(ty);
  T cz = cos(tz), sz = sin(tz);
  TMat3<T> r;
  r.m = {cy * cz,                -(cy * sz),              sy,
         cx * sz + sx * (sy * cz), cx * cz - sx * (sy * sz), -(sx * cy),
         sx * sz - cx * (sy * cz), sx * cz + cx * (sy * sz), cx * cy};
  return r;
}

// Rotation matrix of an (unnormalized) quaternion, scaled by s.
template <class T>
TMat3<T> quat_to_mat3_scaled(const std::array<T, 4>& q, double s) {
  const T &w = q[0], &x = q[1], &y = q[2], &z = q[3];
  T n2 = w * w + x * x + y * y + z * z;
  T k = 2.0 / n2;
  TMat3<T> r;
  r.m = {(0.0 - (y * y + z * z)) * k + 1.0, (x * y - w * z) * k, (x * z + w * y) * k,
         (x * y + w * z) * k, (0.0 - (x * x + z * z)) * k + 1.0, (y * z - w * x) * k,
         (x * z - w * y) * k, (y * z + w * x) * k, (0.0 - (x * x + y * y)) * k + 1.0};
  for (auto& e : r.m) e = e * s;
  return r;
}

template <class T>
TVec3<T> mat_mul_vec(const TMat3<T>& m, const Vec3& v) {
  return {m.m[0] * v.x + m.m[1] * v.y + m.m[2] * v.z,
          m.m[3] * v.x + m.m[4] * v.y + m.m[5] * v.z,
          m.m[6] * v.x + m.m[7] * v.y + m.m[8] * v.z};
}

// Per-finger length scale applied to a joint's rest offset.
inline double offset_beta(const HandRig& rig, int joint,
                          const std::array<double, 6>& beta) {
  const auto& jt = rig.joints[size_t(joint)];
  // J.2 and J.3 offsets lie along the finger and stretch with it; knuckle
  // positions (J.1) belong to the palm.
  if (jt.finger >= 0 && rig.joints[size_t(jt.parent)].finger == jt.finger)
    return beta[size_t(1 + jt.finger)];
  return 1.0;
}

template <class T>
std::array<JointTransform<T>, kNumJoints> forward_kinematics(
    const HandRig& rig, const TPose<T>& pose) {
  std::array<JointTransform<T>, kNumJoints> out;
  out[0].rot = quat_to_mat3_scaled(pose.quat, pose.beta[0]);
  out[0].pos = pose.t;
  for (int j = 1; j < kNumJoints; ++j) {
    const auto& jt = rig.joints[size_t(j)];
    const auto& par = out[size_t(jt.parent)];
    int a = (j - 1) * 3;
    TMat3<T> local = rot_xyz(pose.theta[size_t(a)], pose.theta[size_t(a + 1)],
                             pose.theta[size_t(a + 2)]);
    Vec3 off = jt.offset * offset_beta(rig, j, pose.beta);
    out[size_t(j)].pos = par.pos + mat_mul_vec(par.rot, off);
    out[size_t(j)].rot = par.rot * local;
  }
  return out;
}

// --- Linear blend skinning ------------------------------------------------------

// Rest position of vertex v in the frame of its k-th influence, with the
// per-finger length scale applied along the bone axis.
inline Vec3 scaled_local_pos(const HandRig& rig, size_t v, int k,
                             const std::array<double, 6>& beta) {
  const auto& inf = rig.skin_weights[v][size_t(k)];
  Vec3 p = rig.local_pos[v][size_t(k)];
  int f = rig.joints[size_t(inf.joint)].finger;
  if (f >= 0) {
    const Vec3& ax = rig.joints[size_t(inf.joint)].axis;
    double along = dot(p, ax);
    p = p + ax * (along * (beta[size_t(1 + f)] - 1.0));
  }
  return p;
}

inline TriMesh skin(const HandRig& rig,
                    const std::array<JointTransform<double>, kNumJoints>& xf,
                    const std::array<double, 6>& beta) {
  TriMesh out;
  out.triangles = rig.rest_mesh.triangles;
  out.vertices.resize(rig.rest_mesh.vertices.size());
  for (size_t v = 0; v < out.vertices.size(); ++v) {
    Vec3 acc{0, 0, 0};
    for (int k = 0; k < 4; ++k) {
      const auto& inf = rig.skin_weights[v][size_t(k)];
      if (inf.weight == 0.0) continue;
      const auto& t = xf[size_t(inf.joint)];
      acc += (t.rot * scaled_local_pos(rig, v, k, beta) + t.pos) * inf.weight;
    }
    out.vertices[v] = acc;
  }
  return out;
}

// Skinned mesh with tape-recorded vertex positions.
struct DiffMesh {
  TriMesh mesh;                 // plain values (for BVH / collision queries)
  std::vector<TVec3<Var>> verts;
  const HandRig* rig = nullptr;
};

// Differentiable skinning. Each world coordinate is an affine combination of
// joint-transform entries with constant coefficients, recorded as one fused
// tape node per coordinate.
inline DiffMesh skin(const HandRig& rig,
                     const std::array<JointTransform<Var>, kNumJoints>& xf,
                     const std::array<double, 6>& beta, Tape& tape) {
  DiffMesh out;
  out.rig = &rig;
  out.mesh.triangles = rig.rest_mesh.triangles;
  size_t nv = rig.rest_mesh.vertices.size();
  out.mesh.vertices.resize(nv);
  out.verts.resize(nv);

  std::vector<Var> ins;
  std::vector<double> cos_;
  for (size_t v = 0; v < nv; ++v) {
    for (int row = 0; row < 3; ++row) {
      ins.clear();
      cos_.clear();
      for (int k = 0; k < 4; ++k) {
        const auto& inf = rig.skin_weights[v][size_t(k)];
        if (inf.weight == 0.0) continue;
        Vec3 lp = scaled_local_pos(rig, v, k, beta);
        const auto& t = xf[size_t(inf.joint)];
        ins.push_back(t.rot.m[size_t(row * 3 + 0)]);
        cos_.push_back(inf.weight * lp.x);
        ins.push_back(t.rot.m[size_t(row * 3 + 1)]);
        cos_.push_back(inf.weight * lp.y);
        ins.push_back(t.rot.m[size_t(row * 3 + 2)]);
        cos_.push_back(inf.weight * lp.z);
        ins.push_back(row == 0 ? t.pos.x : (row == 1 ? t.pos.y : t.pos.z));
        cos_.push_back(inf.weight);
      }
      Var c = tape.affine(ins, cos_, 0.0);
      if (row == 0) out.verts[v].x = c;
      else if (row == 1) out.verts[v].y = c;
      else out.verts[v].z = c;
    }
    out.mesh.vertices[v] = {out.verts[v].x.value(), out.verts[v].y.value(),
                            out.verts[v].z.value()};
  }
  return out;
}

}  // namespace handshadow
