// Small fixed-size linear algebra used throughout: 3-vectors, 3x3 matrices,
// quaternions and a deterministic RNG. Everything is templated on the scalar
// type so the same formulas run on plain doubles and on autodiff variables.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace handshadow {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double d) { return d * (kPi / 180.0); }
inline double rad_to_deg(double r) { return r * (180.0 / kPi); }

template <class T>
struct TVec3 {
  T x{}, y{}, z{};

  TVec3() = default;
  TVec3(T x_, T y_, T z_) : x(x_), y(y_), z(z_) {}

  TVec3 operator+(const TVec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  TVec3 operator-(const TVec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  TVec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  TVec3 operator-() const { return {-x, -y, -z}; }
  TVec3& operator+=(const TVec3& o) {
    x = x + o.x; y = y + o.y; z = z + o.z;
    return *this;
  }
};

using Vec3 = TVec3<double>;

template <class T>
T dot(const TVec3<T>& a, const TVec3<T>& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <class T>
TVec3<T> cross(const TVec3<T>& a, const TVec3<T>& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline Vec3 normalized(const Vec3& v) {
  double n = norm(v);
  return {v.x / n, v.y / n, v.z / n};
}

// Row-major 3x3 matrix.
template <class T>
struct TMat3 {
  std::array<T, 9> m{};

  T& operator()(int r, int c) { return m[size_t(r) * 3 + size_t(c)]; }
  const T& operator()(int r, int c) const { return m[size_t(r) * 3 + size_t(c)]; }

  TVec3<T> operator*(const TVec3<T>& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }

  TMat3 operator*(const TMat3& o) const {
    TMat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        r(i, j) = (*this)(i, 0) * o(0, j) + (*this)(i, 1) * o(1, j) +
                  (*this)(i, 2) * o(2, j);
    return r;
  }

  static TMat3 identity() {
    TMat3 r;
    r.m = {T(1), T(0), T(0), T(0), T(1), T(0), T(0), T(0), T(1)};
    return r;
  }
};

using Mat3 = TMat3<double>;

// Quaternion, scalar-first storage (w, x, y, z). Not normalized implicitly.
struct Quat {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  static Quat identity() { return {1.0, 0.0, 0.0, 0.0}; }

  static Quat axis_angle(const Vec3& axis, double angle_rad) {
    double n = std::sqrt(axis.x * axis.x + axis.y * axis.y + axis.z * axis.z);
    double h = 0.5 * angle_rad, s = std::sin(h) / n;
    return {std::cos(h), axis.x * s, axis.y * s, axis.z * s};
  }

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

  Quat normalized() const {
    double n = norm();
    return {w / n, x / n, y / n, z / n};
  }

  Quat operator*(const Quat& o) const {
    return {w * o.w - x * o.x - y * o.y - z * o.z,
            w * o.x + x * o.w + y * o.z - z * o.y,
            w * o.y - x * o.z + y * o.w + z * o.x,
            w * o.z + x * o.y - y * o.x + z * o.w};
  }
};

inline double dot(const Quat& a, const Quat& b) {
  return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
}

inline Mat3 quat_to_mat3(const Quat& q) {
  double n2 = q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z;
  double s = 2.0 / n2;
  Mat3 r;
  r.m = {1 - s * (q.y * q.y + q.z * q.z), s * (q.x * q.y - q.w * q.z), s * (q.x * q.z + q.w * q.y),
         s * (q.x * q.y + q.w * q.z), 1 - s * (q.x * q.x + q.z * q.z), s * (q.y * q.z - q.w * q.x),
         s * (q.x * q.z - q.w * q.y), s * (q.y * q.z + q.w * q.x), 1 - s * (q.x * q.x + q.y * q.y)};
  return r;
}

// Shepperd's method; input must be a proper rotation.
inline Quat mat3_to_quat(const Mat3& m) {
  Quat q;
  double tr = m(0, 0) + m(1, 1) + m(2, 2);
  if (tr > 0.0) {
    double s = std::sqrt(tr + 1.0) * 2.0;
    q.w = 0.25 * s;
    q.x = (m(2, 1) - m(1, 2)) / s;
    q.y = (m(0, 2) - m(2, 0)) / s;
    q.z = (m(1, 0) - m(0, 1)) / s;
  } else if (m(0, 0) > m(1, 1) && m(0, 0) > m(2, 2)) {
    double s = std::sqrt(1.0 + m(0, 0) - m(1, 1) - m(2, 2)) * 2.0;
    q.w = (m(2, 1) - m(1, 2)) / s;
    q.x = 0.25 * s;
    q.y = (m(0, 1) + m(1, 0)) / s;
    q.z = (m(0, 2) + m(2, 0)) / s;
  } else if (m(1, 1) > m(2, 2)) {
    double s = std::sqrt(1.0 + m(1, 1) - m(0, 0) - m(2, 2)) * 2.0;
    q.w = (m(0, 2) - m(2, 0)) / s;
    q.x = (m(0, 1) + m(1, 0)) / s;
    q.y = 0.25 * s;
    q.z = (m(1, 2) + m(2, 1)) / s;
  } else {
    double s = std::sqrt(1.0 + m(2, 2) - m(0, 0) - m(1, 1)) * 2.0;
    q.w = (m(1, 0) - m(0, 1)) / s;
    q.x = (m(0, 2) + m(2, 0)) / s;
    q.y = (m(1, 2) + m(2, 1)) / s;
    q.z = 0.25 * s;
  }
  return q.normalized();
}

// Shortest-arc spherical interpolation; falls back to nlerp for tiny angles.
inline Quat slerp(const Quat& a, Quat b, double t) {
  double d = dot(a, b);
  if (d < 0.0) {
    b = {-b.w, -b.x, -b.y, -b.z};
    d = -d;
  }
  if (d > 1.0 - 1e-10) {
    Quat r{a.w + (b.w - a.w) * t, a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t,
           a.z + (b.z - a.z) * t};
    return r.normalized();
  }
  double omega = std::acos(d);
  double so = std::sin(omega);
  double ca = std::sin((1.0 - t) * omega) / so;
  double cb = std::sin(t * omega) / so;
  return {ca * a.w + cb * b.w, ca * a.x + cb * b.x, ca * a.y + cb * b.y,
          ca * a.z + cb * b.z};
}

// Deterministic RNG (splitmix64). Distribution code is hand-rolled so results
// do not depend on the standard library implementation.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1).
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  Vec3 unit_vector() {
    // Rejection sampling inside the unit ball keeps the direction unbiased.
    for (;;) {
      Vec3 v{uniform(-1.0, 1.0), uniform(-1.0, 1.0), uniform(-1.0, 1.0)};
      double n2 = dot(v, v);
      if (n2 > 1e-6 && n2 <= 1.0) return v * (1.0 / std::sqrt(n2));
    }
  }

 private:
  uint64_t state_;
};

}  // namespace handshadow
