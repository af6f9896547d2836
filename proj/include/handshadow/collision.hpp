// Inside/outside and nearest-point queries plus vertex-in-mesh penetration
// detection. Hosts must be watertight (closed, consistently oriented).
#pragma once

#include <vector>

#include "handshadow/bvh.hpp"

namespace handshadow {

// Fixed query ray direction, chosen to dodge axis- and edge-aligned geometry.
inline Vec3 inside_test_ray() {
  return normalized(Vec3{1.0, 0.125, 0.0000152587890625});
}

// Winding-number sign via signed ray crossings along a fixed direction.
inline bool point_inside(const TriMesh& mesh, const Bvh& bvh, const Vec3& p) {
  (void)mesh;
  return bvh.signed_crossings(p, inside_test_ray()) != 0;
}

inline std::pair<Vec3, double> nearest_surface_point(const TriMesh& mesh,
                                                     const Bvh& bvh,
                                                     const Vec3& p) {
  (void)mesh;
  Bvh::Nearest n = bvh.nearest(p);
  return {n.point, std::sqrt(n.dist_sq)};
}

struct Penetration {
  int vertex_index = -1;    // index into the intruding mesh
  double depth = 0.0;       // meters, > 0
  Vec3 nearest_point;       // on the host surface
};

// One entry per intruder vertex strictly inside the host; depth is the
// distance to the host surface.
inline std::vector<Penetration> detect_penetrations(const TriMesh& intruder,
                                                    const TriMesh& host,
                                                    const Bvh& host_bvh) {
  std::vector<Penetration> out;
  const Aabb hb = host_bvh.bounds();
  for (size_t i = 0; i < intruder.vertices.size(); ++i) {
    const Vec3& v = intruder.vertices[i];
    if (v.x < hb.lo.x || v.x > hb.hi.x || v.y < hb.lo.y || v.y > hb.hi.y ||
        v.z < hb.lo.z || v.z > hb.hi.z)
      continue;
    if (!point_inside(host, host_bvh, v)) continue;
    auto [q, d] = nearest_surface_point(host, host_bvh, v);
    if (d > 0.0) out.push_back({int(i), d, q});
  }
  return out;
}

}  // namespace handshadow
