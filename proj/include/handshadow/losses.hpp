// The scalar objective: image term ||I - R||_2 (or its mean-squared variant),
// penetration penalty sum(depth^2) over intruding vertices (both cross-hand
// directions plus intra-hand non-adjacent bone pairs), and the weighted sum.
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "handshadow/collision.hpp"
#include "handshadow/rasterize.hpp"

namespace handshadow {

enum class ImageTerm { L2, MSE };

inline const char* to_string(ImageTerm t) { return t == ImageTerm::L2 ? "l2" : "mse"; }

struct LossWeights {
  double w_image = 1.0;
  double w_pen = 10.0;
  double w_limit = 0.0;  // limits are enforced by clamping; penalty for ablation

  void validate() const {
    if (!(w_image >= 0.0) || !(w_pen >= 0.0) || !(w_limit >= 0.0))
      throw std::invalid_argument("loss weights must be finite and non-negative");
  }
};

struct LossReport {
  double total = 0.0, image_term = 0.0, pen_term = 0.0;
  int iteration = 0;
};

// --- image term ---------------------------------------------------------------

inline Var image_l2(const GrayImage& target, const GrayImage& rendered,
                    Tape& tape, ImageTerm kind = ImageTerm::L2) {
  if (target.height != rendered.height || target.width != rendered.width)
    throw ImageError("image term: resolution mismatch");
  std::vector<Var> xs;
  std::vector<double> ts;
  double extra = 0.0;
  for (size_t i = 0; i < rendered.count(); ++i) {
    if (!rendered.ids.empty() && rendered.ids[i].valid()) {
      xs.emplace_back(&tape, rendered.ids[i], rendered.pixels[i]);
      ts.push_back(target.pixels[i]);
    } else {
      double d = rendered.pixels[i] - target.pixels[i];
      extra += d * d;
    }
  }
  Var ss = tape.sum_sq_diff(xs, ts, extra);
  if (kind == ImageTerm::MSE) return ss / double(rendered.count());
  return sqrt(ss);
}

inline double image_l2_value(const GrayImage& target, const GrayImage& rendered,
                             ImageTerm kind = ImageTerm::L2) {
  if (target.height != rendered.height || target.width != rendered.width)
    throw ImageError("image term: resolution mismatch");
  double ss = 0.0;
  for (size_t i = 0; i < rendered.count(); ++i) {
    double d = rendered.pixels[i] - target.pixels[i];
    ss += d * d;
  }
  return kind == ImageTerm::MSE ? ss / double(rendered.count()) : std::sqrt(ss);
}

// --- penetration --------------------------------------------------------------

struct PenHit {
  int side;      // 0: vertex of the first mesh, 1: of the second
  int vertex;
  Vec3 nearest;  // on the host surface
  double depth;
};

namespace pendetail {

struct BoneSubmesh {
  TriMesh mesh;
  std::vector<int> vert_map;  // submesh vertex -> original index
};

inline BoneSubmesh bone_submesh(const TriMesh& skinned, const HandRig& rig,
                                int bone) {
  BoneSubmesh out;
  std::vector<int> remap(skinned.vertices.size(), -1);
  for (size_t t = 0; t < skinned.triangles.size(); ++t) {
    if (rig.tri_bone[t] != bone) continue;
    const Tri& tr = skinned.triangles[t];
    Tri nt;
    int* dst[3] = {&nt.a, &nt.b, &nt.c};
    const int src[3] = {tr.a, tr.b, tr.c};
    for (int k = 0; k < 3; ++k) {
      int& m = remap[size_t(src[k])];
      if (m < 0) {
        m = int(out.mesh.vertices.size());
        out.mesh.vertices.push_back(skinned.vertices[size_t(src[k])]);
        out.vert_map.push_back(src[k]);
      }
      *dst[k] = m;
    }
    out.mesh.triangles.push_back(nt);
  }
  return out;
}

// Vertices of one hand against the closed component of a non-adjacent bone of
// the same hand.
inline void collect_intra(const TriMesh& skinned, const HandRig& rig, int side,
                          std::vector<PenHit>& hits) {
  std::array<Aabb, kNumJoints> bone_box;
  for (size_t v = 0; v < skinned.vertices.size(); ++v)
    bone_box[size_t(rig.vert_bone[v])].expand(skinned.vertices[v]);

  std::array<std::optional<BoneSubmesh>, kNumJoints> sub;
  std::array<std::optional<Bvh>, kNumJoints> sub_bvh;
  auto host = [&](int bone) -> std::pair<const TriMesh*, const Bvh*> {
    if (!sub[size_t(bone)]) {
      sub[size_t(bone)] = bone_submesh(skinned, rig, bone);
      sub_bvh[size_t(bone)].emplace(sub[size_t(bone)]->mesh);
    }
    return {&sub[size_t(bone)]->mesh, &*sub_bvh[size_t(bone)]};
  };

  for (int i = 0; i < kNumJoints; ++i) {
    for (int j = i + 1; j < kNumJoints; ++j) {
      if (rig.bones_adjacent(i, j)) continue;
      if (!bone_box[size_t(i)].overlaps(bone_box[size_t(j)])) continue;
      for (auto [vb, hb] : {std::pair{i, j}, std::pair{j, i}}) {
        auto [hmesh, hbvh] = host(hb);
        if (hmesh->empty()) continue;
        for (size_t v = 0; v < skinned.vertices.size(); ++v) {
          if (rig.vert_bone[v] != vb) continue;
          const Vec3& p = skinned.vertices[v];
          if (Bvh::point_box_dist_sq(p, hbvh->bounds()) > 0.0) continue;
          if (!point_inside(*hmesh, *hbvh, p)) continue;
          auto [q, d] = nearest_surface_point(*hmesh, *hbvh, p);
          if (d > 0.0) hits.push_back({side, int(v), q, d});
        }
      }
    }
  }
}

}  // namespace pendetail

// All penetration hits between (and within) a pair of hand meshes. Rigs, when
// present, supply the bone labels for the intra-hand checks; a null second
// mesh restricts the scan to one hand.
inline std::vector<PenHit> collect_penetrations(const TriMesh& a,
                                                const TriMesh* b,
                                                const HandRig* rig_a,
                                                const HandRig* rig_b) {
  std::vector<PenHit> hits;
  if (b) {
    if (mesh_bounds(a).overlaps(mesh_bounds(*b))) {
      Bvh bvh_a(a), bvh_b(*b);
      for (const Penetration& p : detect_penetrations(a, *b, bvh_b))
        hits.push_back({0, p.vertex_index, p.nearest_point, p.depth});
      for (const Penetration& p : detect_penetrations(*b, a, bvh_a))
        hits.push_back({1, p.vertex_index, p.nearest_point, p.depth});
    }
  }
  if (rig_a) pendetail::collect_intra(a, *rig_a, 0, hits);
  if (b && rig_b) pendetail::collect_intra(*b, *rig_b, 1, hits);
  return hits;
}

inline double penetration_loss_value(const TriMesh& a, const TriMesh* b,
                                     const HandRig* rig_a, const HandRig* rig_b) {
  double s = 0.0;
  for (const PenHit& h : collect_penetrations(a, b, rig_a, rig_b))
    s += h.depth * h.depth;
  return s;
}

// Differentiable penetration loss. The host surface point is held fixed per
// evaluation; gradients flow to the intruding vertex positions. Symmetric in
// its arguments by construction (both directions accumulate).
inline Var penetration_loss(const DiffMesh& a, const DiffMesh* b, Tape& tape) {
  if (!a.rig && !is_watertight(a.mesh))
    throw MeshError("penetration loss: first mesh is render-only (not watertight)");
  if (b && !b->rig && !is_watertight(b->mesh))
    throw MeshError("penetration loss: second mesh is render-only (not watertight)");
  auto hits = collect_penetrations(a.mesh, b ? &b->mesh : nullptr, a.rig,
                                   b ? b->rig : nullptr);
  if (hits.empty()) return tape.leaf(0.0);
  std::vector<Var> terms;
  terms.reserve(hits.size());
  for (const PenHit& h : hits) {
    const DiffMesh& m = h.side == 0 ? a : *b;
    const TVec3<Var>& v = m.verts[size_t(h.vertex)];
    terms.push_back(tape.pen_depth_sq(v.x, v.y, v.z, h.nearest.x, h.nearest.y,
                                      h.nearest.z));
  }
  std::vector<double> ones(terms.size(), 1.0);
  return tape.affine(terms, ones, 0.0);
}

// --- full objective -------------------------------------------------------------

struct SceneHand {
  const HandRig* rig = nullptr;
  HandParams params;
};

struct LossBreakdown {
  Var total;
  LossReport report;
  GrayImage rendered;             // soft render with per-pixel tape vars
  std::vector<DiffMesh> meshes;   // skinned hands on the tape
  std::vector<TPose<Var>> poses;  // parameter leaves, for gradient readout
};

// Quadratic out-of-bounds penalty, used only in the w_limit > 0 ablation.
inline Var limit_penalty(const HandRig& rig, const TPose<Var>& pose, Tape& tape) {
  std::vector<Var> terms;
  for (int j = 0; j < kNumArticulated; ++j) {
    for (int axis = 0; axis < 3; ++axis) {
      auto [lo, hi] = rig.limits.channel_interval_rad(j, axis);
      const Var& th = pose.theta[size_t(j * 3 + axis)];
      terms.push_back(powi(relu(th - hi), 2) + powi(relu(lo - th), 2));
    }
  }
  std::vector<double> ones(terms.size(), 1.0);
  return tape.affine(terms, ones, 0.0);
}

inline LossBreakdown total_loss(const GrayImage& target,
                                std::span<const SceneHand> hands,
                                const Camera& cam, const RenderSettings& st,
                                const LossWeights& w, ImageTerm kind,
                                Tape& tape) {
  if (hands.empty() || hands.size() > 2)
    throw std::invalid_argument("total_loss: expected one or two hands");
  if (target.height != cam.height || target.width != cam.width)
    throw ImageError("total_loss: target resolution does not match camera");
  w.validate();

  LossBreakdown out;
  for (const SceneHand& h : hands) {
    out.poses.push_back(pose_leaves(tape, h.params));
    auto xf = forward_kinematics(*h.rig, out.poses.back());
    out.meshes.push_back(skin(*h.rig, xf, h.params.beta, tape));
  }

  std::vector<const DiffMesh*> mptr;
  for (const DiffMesh& m : out.meshes) mptr.push_back(&m);
  out.rendered = render_silhouette_soft(mptr, cam, st, tape);

  Var img = image_l2(target, out.rendered, tape, kind);
  Var pen = penetration_loss(out.meshes[0],
                             out.meshes.size() > 1 ? &out.meshes[1] : nullptr,
                             tape);
  Var total = img * w.w_image + pen * w.w_pen;
  if (w.w_limit > 0.0) {
    for (size_t i = 0; i < hands.size(); ++i)
      total = total + limit_penalty(*hands[i].rig, out.poses[i], tape) * w.w_limit;
  }

  out.total = total;
  out.report.image_term = img.value();
  out.report.pen_term = pen.value();
  out.report.total = total.value();
  return out;
}

// Plain-value mirror of total_loss, used by finite-difference oracles and the
// interpolation sweep. Must stay formula-identical to the tape path.
inline double total_loss_value(const GrayImage& target,
                               std::span<const SceneHand> hands,
                               const Camera& cam, const RenderSettings& st,
                               const LossWeights& w, ImageTerm kind,
                               LossReport* report = nullptr) {
  std::vector<TriMesh> meshes;
  for (const SceneHand& h : hands) {
    auto xf = forward_kinematics(*h.rig, pose_values(h.params));
    meshes.push_back(skin(*h.rig, xf, h.params.beta));
  }
  std::vector<const TriMesh*> mptr;
  for (const TriMesh& m : meshes) mptr.push_back(&m);
  GrayImage rendered = render_silhouette_soft(mptr, cam, st);
  double img = image_l2_value(target, rendered, kind);
  double pen = penetration_loss_value(meshes[0],
                                      meshes.size() > 1 ? &meshes[1] : nullptr,
                                      hands[0].rig,
                                      meshes.size() > 1 ? hands[1].rig : nullptr);
  double total = w.w_image * img + w.w_pen * pen;
  if (w.w_limit > 0.0) {
    for (const SceneHand& h : hands) {
      for (int j = 0; j < kNumArticulated; ++j)
        for (int axis = 0; axis < 3; ++axis) {
          auto [lo, hi] = h.rig->limits.channel_interval_rad(j, axis);
          double th = h.params.theta[size_t(j * 3 + axis)];
          double over = relu(th - hi), under = relu(lo - th);
          total += w.w_limit * (over * over + under * under);
        }
    }
  }
  if (report) {
    report->image_term = img;
    report->pen_term = pen;
    report->total = total;
  }
  return total;
}

}  // namespace handshadow
