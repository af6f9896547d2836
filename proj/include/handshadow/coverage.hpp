// Per-triangle soft coverage of a 2D point: D = sigmoid(s * d^2 / sigma)
// where d is the Euclidean distance from the point to the triangle boundary
// and s is +1 inside / -1 outside. s*d^2 is C1 across the boundary. Shared by
// the soft rasterizer and by tape replay so both produce bit-identical values.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>

namespace handshadow {

inline double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

namespace detail {

// Squared distance from p to segment ab, plus its gradient wrt the four
// segment coordinates when grad != nullptr (layout: ax, ay, bx, by).
inline double segment_dist_sq(double px, double py, double ax, double ay,
                              double bx, double by, double* grad) {
  double ex = bx - ax, ey = by - ay;
  double qx = px - ax, qy = py - ay;
  double len2 = ex * ex + ey * ey;
  double t = len2 > 0.0 ? (qx * ex + qy * ey) / len2 : 0.0;
  if (t <= 0.0 || len2 == 0.0) {
    double dx = px - ax, dy = py - ay;
    if (grad) {
      grad[0] = -2.0 * dx;
      grad[1] = -2.0 * dy;
      grad[2] = 0.0;
      grad[3] = 0.0;
    }
    return dx * dx + dy * dy;
  }
  if (t >= 1.0) {
    double dx = px - bx, dy = py - by;
    if (grad) {
      grad[0] = 0.0;
      grad[1] = 0.0;
      grad[2] = -2.0 * dx;
      grad[3] = -2.0 * dy;
    }
    return dx * dx + dy * dy;
  }
  // Interior projection: distance to the supporting line, d^2 = c^2 / len2
  // with c = cross(e, q).
  double c = ex * qy - ey * qx;
  double d2 = c * c / len2;
  if (grad) {
    double s = 2.0 * c / len2;
    // dc/d(ax,ay,bx,by) with e and q both depending on a.
    double dc_ax = -qy + ey;   // d/dax of (ex*qy - ey*qx)
    double dc_ay = qx - ex;
    double dc_bx = qy;
    double dc_by = -qx;
    double t2 = c * c / (len2 * len2);
    // d(1/len2) term: len2 depends on a and b.
    grad[0] = s * dc_ax + t2 * 2.0 * ex;
    grad[1] = s * dc_ay + t2 * 2.0 * ey;
    grad[2] = s * dc_bx - t2 * 2.0 * ex;
    grad[3] = s * dc_by - t2 * 2.0 * ey;
  }
  return d2;
}

inline bool point_in_tri_2d(const double* t, double px, double py) {
  double e0 = (t[2] - t[0]) * (py - t[1]) - (t[3] - t[1]) * (px - t[0]);
  double e1 = (t[4] - t[2]) * (py - t[3]) - (t[5] - t[3]) * (px - t[2]);
  double e2 = (t[0] - t[4]) * (py - t[5]) - (t[1] - t[5]) * (px - t[4]);
  return (e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0) ||
         (e0 <= 0.0 && e1 <= 0.0 && e2 <= 0.0);
}

}  // namespace detail

// Coverage value only. coords layout: x0,y0,x1,y1,x2,y2.
inline double soft_coverage(const double* c, double px, double py,
                            double sigma) {
  double d0 = detail::segment_dist_sq(px, py, c[0], c[1], c[2], c[3], nullptr);
  double d1 = detail::segment_dist_sq(px, py, c[2], c[3], c[4], c[5], nullptr);
  double d2 = detail::segment_dist_sq(px, py, c[4], c[5], c[0], c[1], nullptr);
  double d = std::min(d0, std::min(d1, d2));
  double s = detail::point_in_tri_2d(c, px, py) ? 1.0 : -1.0;
  return stable_sigmoid(s * d / sigma);
}

// Coverage plus dD/dcoords (6 entries). The nearest boundary segment is
// chosen first-wins on ties, matching the tape's min convention.
inline double soft_coverage_grad(const double* c, double px, double py,
                                 double sigma, double* dD) {
  double g0[4], g1[4], g2[4];
  double d0 = detail::segment_dist_sq(px, py, c[0], c[1], c[2], c[3], g0);
  double d1 = detail::segment_dist_sq(px, py, c[2], c[3], c[4], c[5], g1);
  double d2 = detail::segment_dist_sq(px, py, c[4], c[5], c[0], c[1], g2);

  double d;
  double dd[6] = {0, 0, 0, 0, 0, 0};
  if (d0 <= d1 && d0 <= d2) {
    d = d0;
    dd[0] = g0[0]; dd[1] = g0[1]; dd[2] = g0[2]; dd[3] = g0[3];
  } else if (d1 <= d2) {
    d = d1;
    dd[2] = g1[0]; dd[3] = g1[1]; dd[4] = g1[2]; dd[5] = g1[3];
  } else {
    d = d2;
    dd[4] = g2[0]; dd[5] = g2[1]; dd[0] = g2[2]; dd[1] = g2[3];
  }

  double s = detail::point_in_tri_2d(c, px, py) ? 1.0 : -1.0;
  double u = s * d / sigma;
  double D = stable_sigmoid(u);
  double k = D * (1.0 - D) * s / sigma;
  for (int i = 0; i < 6; ++i) dD[i] = k * dd[i];
  return D;
}

}  // namespace handshadow
