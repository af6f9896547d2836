// Median-split BVH over triangles with ray and nearest-point queries. Results
// are required to match brute-force scans exactly; the tree only prunes.
#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "handshadow/mesh.hpp"

namespace handshadow {

struct BvhNode {
  Aabb box;
  int left = -1, right = -1;  // internal children, or -1 for leaves
  int first = 0, count = 0;   // leaf triangle range into tri_order
};

class Bvh {
 public:
  Bvh() = default;

  explicit Bvh(const TriMesh& mesh, int leaf_size = 4) { build(mesh, leaf_size); }

  void build(const TriMesh& mesh, int leaf_size = 4) {
    if (mesh.triangles.empty()) throw MeshError("bvh: empty mesh");
    mesh_ = &mesh;
    nodes_.clear();
    tri_order_.resize(mesh.triangles.size());
    std::iota(tri_order_.begin(), tri_order_.end(), 0);
    centroids_.resize(mesh.triangles.size());
    for (size_t i = 0; i < mesh.triangles.size(); ++i) {
      const Tri& t = mesh.triangles[i];
      centroids_[i] = (mesh.vertices[size_t(t.a)] + mesh.vertices[size_t(t.b)] +
                       mesh.vertices[size_t(t.c)]) * (1.0 / 3.0);
    }
    build_node(0, int(tri_order_.size()), leaf_size);
  }

  const std::vector<BvhNode>& nodes() const { return nodes_; }
  const Aabb& bounds() const { return nodes_.front().box; }

  // Count of ray/surface crossings weighted by orientation: +1 where the ray
  // exits through a front face, -1 where it enters. For a watertight mesh the
  // total is the winding number of the origin, so nonzero means inside even
  // when closed components overlap.
  int signed_crossings(const Vec3& origin, const Vec3& dir) const {
    int total = 0;
    walk(0, [&](int tri) {
      const Tri& t = mesh_->triangles[size_t(tri)];
      total += ray_crossing(origin, dir, mesh_->vertices[size_t(t.a)],
                            mesh_->vertices[size_t(t.b)],
                            mesh_->vertices[size_t(t.c)]);
      return true;
    }, [&](const BvhNode& n) { return ray_hits_box(origin, dir, n.box); });
    return total;
  }

  // All triangle indices whose ray intersection parameter is > 0.
  std::vector<int> ray_hits(const Vec3& origin, const Vec3& dir) const {
    std::vector<int> hits;
    walk(0, [&](int tri) {
      const Tri& t = mesh_->triangles[size_t(tri)];
      double u, v, s;
      if (ray_triangle(origin, dir, mesh_->vertices[size_t(t.a)],
                       mesh_->vertices[size_t(t.b)],
                       mesh_->vertices[size_t(t.c)], u, v, s) && s > 0.0)
        hits.push_back(tri);
      return true;
    }, [&](const BvhNode& n) { return ray_hits_box(origin, dir, n.box); });
    std::sort(hits.begin(), hits.end());
    return hits;
  }

  struct Nearest {
    Vec3 point;
    double dist_sq = std::numeric_limits<double>::infinity();
    int tri = -1;
  };

  Nearest nearest(const Vec3& p) const {
    Nearest best;
    nearest_rec(0, p, best);
    return best;
  }

  // --- primitive helpers (also used by the brute-force test oracles) --------

  static bool ray_triangle(const Vec3& o, const Vec3& d, const Vec3& v0,
                           const Vec3& v1, const Vec3& v2, double& u, double& v,
                           double& t) {
    const Vec3 e1 = v1 - v0, e2 = v2 - v0;
    const Vec3 pv = cross(d, e2);
    double det = dot(e1, pv);
    if (det == 0.0) return false;
    double inv = 1.0 / det;
    const Vec3 tv = o - v0;
    u = dot(tv, pv) * inv;
    if (u < 0.0 || u > 1.0) return false;
    const Vec3 qv = cross(tv, e1);
    v = dot(d, qv) * inv;
    if (v < 0.0 || u + v > 1.0) return false;
    t = dot(e2, qv) * inv;
    return true;
  }

  static int ray_crossing(const Vec3& o, const Vec3& d, const Vec3& v0,
                          const Vec3& v1, const Vec3& v2) {
    double u, v, t;
    if (!ray_triangle(o, d, v0, v1, v2, u, v, t) || t <= 0.0) return 0;
    return dot(d, triangle_normal(v0, v1, v2)) > 0.0 ? 1 : -1;
  }

  // Ericson-style closest point on a triangle.
  static Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a,
                                        const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    double d1 = dot(ab, ap), d2 = dot(ac, ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;
    const Vec3 bp = p - b;
    double d3 = dot(ab, bp), d4 = dot(ac, bp);
    if (d3 >= 0.0 && d4 <= d3) return b;
    double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
      double v = d1 / (d1 - d3);
      return a + ab * v;
    }
    const Vec3 cp = p - c;
    double d5 = dot(ab, cp), d6 = dot(ac, cp);
    if (d6 >= 0.0 && d5 <= d6) return c;
    double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
      double w = d2 / (d2 - d6);
      return a + ac * w;
    }
    double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
      double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
      return b + (c - b) * w;
    }
    double denom = 1.0 / (va + vb + vc);
    double v = vb * denom, w = vc * denom;
    return a + ab * v + ac * w;
  }

  static double point_box_dist_sq(const Vec3& p, const Aabb& b) {
    auto ax = [](double v, double lo, double hi) {
      double d = v < lo ? lo - v : (v > hi ? v - hi : 0.0);
      return d * d;
    };
    return ax(p.x, b.lo.x, b.hi.x) + ax(p.y, b.lo.y, b.hi.y) +
           ax(p.z, b.lo.z, b.hi.z);
  }

 private:
  int build_node(int first, int count, int leaf_size) {
    int idx = int(nodes_.size());
    nodes_.emplace_back();
    Aabb box;
    for (int i = first; i < first + count; ++i) {
      const Tri& t = mesh_->triangles[size_t(tri_order_[size_t(i)])];
      box.expand(mesh_->vertices[size_t(t.a)]);
      box.expand(mesh_->vertices[size_t(t.b)]);
      box.expand(mesh_->vertices[size_t(t.c)]);
    }
    nodes_[size_t(idx)].box = box;
    if (count <= leaf_size) {
      nodes_[size_t(idx)].first = first;
      nodes_[size_t(idx)].count = count;
      return idx;
    }
    Vec3 ext = box.hi - box.lo;
    int axis = ext.x >= ext.y && ext.x >= ext.z ? 0 : (ext.y >= ext.z ? 1 : 2);
    auto cmid = [&](int tri) {
      const Vec3& c = centroids_[size_t(tri)];
      return axis == 0 ? c.x : (axis == 1 ? c.y : c.z);
    };
    int mid = first + count / 2;
    std::nth_element(tri_order_.begin() + first, tri_order_.begin() + mid,
                     tri_order_.begin() + first + count,
                     [&](int a, int b) {
                       double ca = cmid(a), cb = cmid(b);
                       return ca < cb || (ca == cb && a < b);
                     });
    int l = build_node(first, mid - first, leaf_size);
    int r = build_node(mid, first + count - mid, leaf_size);
    nodes_[size_t(idx)].left = l;
    nodes_[size_t(idx)].right = r;
    return idx;
  }

  template <class TriFn, class BoxFn>
  void walk(int node, TriFn&& on_tri, BoxFn&& box_ok) const {
    const BvhNode& n = nodes_[size_t(node)];
    if (!box_ok(n)) return;
    if (n.left < 0) {
      for (int i = n.first; i < n.first + n.count; ++i)
        on_tri(tri_order_[size_t(i)]);
      return;
    }
    walk(n.left, on_tri, box_ok);
    walk(n.right, on_tri, box_ok);
  }

  void nearest_rec(int node, const Vec3& p, Nearest& best) const {
    const BvhNode& n = nodes_[size_t(node)];
    if (point_box_dist_sq(p, n.box) >= best.dist_sq) return;
    if (n.left < 0) {
      for (int i = n.first; i < n.first + n.count; ++i) {
        int tri = tri_order_[size_t(i)];
        const Tri& t = mesh_->triangles[size_t(tri)];
        Vec3 q = closest_point_on_triangle(p, mesh_->vertices[size_t(t.a)],
                                           mesh_->vertices[size_t(t.b)],
                                           mesh_->vertices[size_t(t.c)]);
        double d2 = dot(p - q, p - q);
        if (d2 < best.dist_sq) {
          best.dist_sq = d2;
          best.point = q;
          best.tri = tri;
        }
      }
      return;
    }
    // Visit the nearer child first for tighter pruning.
    double dl = point_box_dist_sq(p, nodes_[size_t(n.left)].box);
    double dr = point_box_dist_sq(p, nodes_[size_t(n.right)].box);
    if (dl <= dr) {
      nearest_rec(n.left, p, best);
      nearest_rec(n.right, p, best);
    } else {
      nearest_rec(n.right, p, best);
      nearest_rec(n.left, p, best);
    }
  }

  static bool ray_hits_box(const Vec3& o, const Vec3& d, const Aabb& b) {
    double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
    const double ov[3] = {o.x, o.y, o.z}, dv[3] = {d.x, d.y, d.z};
    const double lo[3] = {b.lo.x, b.lo.y, b.lo.z}, hi[3] = {b.hi.x, b.hi.y, b.hi.z};
    for (int i = 0; i < 3; ++i) {
      if (dv[i] == 0.0) {
        if (ov[i] < lo[i] || ov[i] > hi[i]) return false;
        continue;
      }
      double inv = 1.0 / dv[i];
      double ta = (lo[i] - ov[i]) * inv, tb = (hi[i] - ov[i]) * inv;
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) return false;
    }
    return true;
  }

  const TriMesh* mesh_ = nullptr;
  std::vector<BvhNode> nodes_;
  std::vector<int> tri_order_;
  std::vector<Vec3> centroids_;
};

}  // namespace handshadow
