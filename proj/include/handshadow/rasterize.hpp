// Silhouette rasterizers. The soft rasterizer gives each triangle a sigmoid
// coverage D = sigmoid(sign * d^2 / sigma) of the pixel center's distance to
// the projected triangle boundary and composites 1 - prod(1 - D); its adjoint
// is recorded as one fused tape node per pixel. The hard rasterizer is the
// exact point-in-triangle oracle used for exports and IoU checks. Both are
// single-threaded and bit-deterministic.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "handshadow/camera.hpp"
#include "handshadow/coverage.hpp"
#include "handshadow/image.hpp"
#include "handshadow/rig.hpp"

namespace handshadow {

struct RenderSettings {
  double sigma = 1e-4;      // softness of the edge sigmoid, NDC^2
  double background = 0.0;  // empty-pixel value

  void validate() const {
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be > 0");
  }
};

// Triangles contribute to pixels within this NDC distance of their bound.
inline double influence_band(double sigma) { return 3.0 * std::sqrt(sigma); }

namespace rasterdetail {

struct PixelRange {
  int r0, r1, c0, c1;
  bool empty() const { return r0 > r1 || c0 > c1; }
};

inline PixelRange pixel_range(const Camera& cam, double xlo, double xhi,
                              double ylo, double yhi, double band) {
  PixelRange pr;
  double W = double(cam.width), H = double(cam.height);
  pr.c0 = std::max(0, int(std::ceil((xlo - band + 1.0) * 0.5 * W - 0.5)));
  pr.c1 = std::min(cam.width - 1, int(std::floor((xhi + band + 1.0) * 0.5 * W - 0.5)));
  pr.r0 = std::max(0, int(std::ceil((1.0 - yhi - band) * 0.5 * H - 0.5)));
  pr.r1 = std::min(cam.height - 1, int(std::floor((1.0 - ylo + band) * 0.5 * H - 0.5)));
  return pr;
}

struct Contrib {
  int32_t pixel;
  double d;                      // coverage D
  std::array<double, 6> dcov;    // dD/dcoord
  std::array<VarId, 6> ids;
};

}  // namespace rasterdetail

// Core soft rasterizer over already-projected 2D triangles (6 NDC coords per
// triangle). When `tape` is non-null, `ids` must give the VarId of every
// coordinate and each touched pixel becomes a fused tape node.
inline GrayImage soft_rasterize_2d(std::span<const double> coords,
                                   const Camera& cam,
                                   const RenderSettings& settings,
                                   Tape* tape = nullptr,
                                   std::span<const VarId> ids = {}) {
  settings.validate();
  const size_t ntris = coords.size() / 6;
  const double band = influence_band(settings.sigma);

  GrayImage img(cam.height, cam.width, settings.background);
  if (tape) img.ids.assign(img.count(), VarId{});

  // Gather per-(triangle,pixel) contributions, then bucket them per pixel
  // with a stable counting sort so compositing order is fixed.
  std::vector<rasterdetail::Contrib> contribs;
  std::vector<int32_t> count(img.count() + 1, 0);

  for (size_t t = 0; t < ntris; ++t) {
    const double* c = coords.data() + t * 6;
    double xlo = std::min({c[0], c[2], c[4]}), xhi = std::max({c[0], c[2], c[4]});
    double ylo = std::min({c[1], c[3], c[5]}), yhi = std::max({c[1], c[3], c[5]});
    auto pr = rasterdetail::pixel_range(cam, xlo, xhi, ylo, yhi, band);
    if (pr.empty()) continue;
    for (int r = pr.r0; r <= pr.r1; ++r) {
      double py = pixel_center_y(cam, r);
      for (int col = pr.c0; col <= pr.c1; ++col) {
        double px = pixel_center_x(cam, col);
        rasterdetail::Contrib k;
        k.pixel = int32_t(r * cam.width + col);
        if (tape) {
          k.d = soft_coverage_grad(c, px, py, settings.sigma, k.dcov.data());
#ifdef HANDSHADOW_FAULT_ADJOINT
          for (double& g : k.dcov) g *= 1.02;  // deliberate wrong adjoint
#endif
          for (int i = 0; i < 6; ++i) k.ids[size_t(i)] = ids[t * 6 + size_t(i)];
        } else {
          k.d = soft_coverage(c, px, py, settings.sigma);
        }
        contribs.push_back(k);
        ++count[size_t(k.pixel) + 1];
      }
    }
  }

  for (size_t i = 1; i < count.size(); ++i) count[i] += count[i - 1];
  std::vector<int32_t> order(contribs.size());
  {
    std::vector<int32_t> fill(count.begin(), count.end() - 1);
    for (size_t i = 0; i < contribs.size(); ++i)
      order[size_t(fill[size_t(contribs[i].pixel)]++)] = int32_t(i);
  }

  std::vector<double> one_minus, prefix, suffix;
  std::vector<Tape::PixelContribution> pcs;
  for (size_t pix = 0; pix < img.count(); ++pix) {
    int32_t lo = count[pix], hi = count[pix + 1];
    if (lo == hi) continue;
    int n = hi - lo;
    one_minus.resize(size_t(n));
    for (int j = 0; j < n; ++j)
      one_minus[size_t(j)] = 1.0 - contribs[size_t(order[size_t(lo + j)])].d;
    double prod = 1.0;
    for (double v : one_minus) prod *= v;
    double value = 1.0 - prod;
    img.pixels[pix] = value;

    if (!tape) continue;

    // Exclusive products (no division, safe when factors underflow to 0).
    prefix.assign(size_t(n) + 1, 1.0);
    suffix.assign(size_t(n) + 1, 1.0);
    for (int j = 0; j < n; ++j)
      prefix[size_t(j + 1)] = prefix[size_t(j)] * one_minus[size_t(j)];
    for (int j = n - 1; j >= 0; --j)
      suffix[size_t(j)] = suffix[size_t(j + 1)] * one_minus[size_t(j)];
    pcs.resize(size_t(n));
    for (int j = 0; j < n; ++j) {
      const auto& k = contribs[size_t(order[size_t(lo + j)])];
      double excl = prefix[size_t(j)] * suffix[size_t(j + 1)];
      pcs[size_t(j)].ids = k.ids;
      for (int i = 0; i < 6; ++i) pcs[size_t(j)].dpix[size_t(i)] = excl * k.dcov[size_t(i)];
    }
    int r = int(pix) / cam.width, col = int(pix) % cam.width;
    Var node = tape->raster_pixel(pixel_center_x(cam, col),
                                  pixel_center_y(cam, r), settings.sigma,
                                  value, pcs);
    img.ids[pix] = node.id();
  }
  return img;
}

namespace rasterdetail {

// Projects mesh triangles to flat NDC coordinate arrays, culling any triangle
// with a vertex at or behind the near plane.
inline void project_mesh_values(const TriMesh& mesh, const Camera& cam,
                                std::vector<double>& coords) {
  std::vector<double> vx(mesh.vertices.size()), vy(mesh.vertices.size()),
      vd(mesh.vertices.size());
  for (size_t i = 0; i < mesh.vertices.size(); ++i) {
    auto pr = project(cam, mesh.vertices[i]);
    vx[i] = pr.x;
    vy[i] = pr.y;
    vd[i] = pr.depth;
  }
  for (const Tri& t : mesh.triangles) {
    if (vd[size_t(t.a)] <= cam.near_plane || vd[size_t(t.b)] <= cam.near_plane ||
        vd[size_t(t.c)] <= cam.near_plane)
      continue;
    for (int v : {t.a, t.b, t.c}) {
      coords.push_back(vx[size_t(v)]);
      coords.push_back(vy[size_t(v)]);
    }
  }
}

}  // namespace rasterdetail

// Value-only soft silhouette of plain meshes.
inline GrayImage render_silhouette_soft(std::span<const TriMesh* const> meshes,
                                        const Camera& cam,
                                        const RenderSettings& settings) {
  if (meshes.empty()) throw std::invalid_argument("render: no meshes");
  std::vector<double> coords;
  for (const TriMesh* m : meshes)
    rasterdetail::project_mesh_values(*m, cam, coords);
  return soft_rasterize_2d(coords, cam, settings);
}

// Differentiable soft silhouette: projects each skinned vertex on the tape,
// then rasterizes with fused per-pixel adjoints.
inline GrayImage render_silhouette_soft(std::span<const DiffMesh* const> meshes,
                                        const Camera& cam,
                                        const RenderSettings& settings,
                                        Tape& tape) {
  if (meshes.empty()) throw std::invalid_argument("render: no meshes");
  std::vector<double> coords;
  std::vector<VarId> ids;
  for (const DiffMesh* dm : meshes) {
    std::vector<Projected<Var>> proj(dm->verts.size());
    std::vector<double> depth(dm->verts.size());
    for (size_t i = 0; i < dm->verts.size(); ++i) {
      proj[i] = project(cam, dm->verts[i]);
      depth[i] = proj[i].depth.value();
    }
    for (const Tri& t : dm->mesh.triangles) {
      if (depth[size_t(t.a)] <= cam.near_plane ||
          depth[size_t(t.b)] <= cam.near_plane ||
          depth[size_t(t.c)] <= cam.near_plane)
        continue;
      for (int v : {t.a, t.b, t.c}) {
        coords.push_back(proj[size_t(v)].x.value());
        coords.push_back(proj[size_t(v)].y.value());
        ids.push_back(proj[size_t(v)].x.id());
        ids.push_back(proj[size_t(v)].y.id());
      }
    }
  }
  return soft_rasterize_2d(coords, cam, settings, &tape, ids);
}

// Exact binary silhouette: pixel = 1 iff its center lies inside some
// projected triangle.
inline GrayImage render_silhouette_hard(std::span<const TriMesh* const> meshes,
                                        const Camera& cam) {
  if (meshes.empty()) throw std::invalid_argument("render: no meshes");
  GrayImage img(cam.height, cam.width, 0.0);
  std::vector<double> coords;
  for (const TriMesh* m : meshes)
    rasterdetail::project_mesh_values(*m, cam, coords);
  for (size_t t = 0; t * 6 < coords.size(); ++t) {
    const double* c = coords.data() + t * 6;
    double xlo = std::min({c[0], c[2], c[4]}), xhi = std::max({c[0], c[2], c[4]});
    double ylo = std::min({c[1], c[3], c[5]}), yhi = std::max({c[1], c[3], c[5]});
    auto pr = rasterdetail::pixel_range(cam, xlo, xhi, ylo, yhi, 0.0);
    for (int r = pr.r0; r <= pr.r1; ++r) {
      double py = pixel_center_y(cam, r);
      for (int col = pr.c0; col <= pr.c1; ++col) {
        if (img.at(r, col) == 1.0) continue;
        if (detail::point_in_tri_2d(c, pixel_center_x(cam, col), py))
          img.at(r, col) = 1.0;
      }
    }
  }
  return img;
}

inline GrayImage render_silhouette_hard(const TriMesh& mesh, const Camera& cam) {
  const TriMesh* p = &mesh;
  return render_silhouette_hard(std::span<const TriMesh* const>(&p, 1), cam);
}

}  // namespace handshadow
