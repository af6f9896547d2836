// Reverse-mode autodiff over scalars. A Tape records every operation as an
// append-only node list; backward() runs one reverse sweep in fixed order, so
// gradients are deterministic. Local partials are cached at record time for
// the scalar ops; fused ops (affine combinations, sum-of-squared-differences,
// penetration depth, rasterized pixels) store their inputs and coefficients in
// shared arenas and derive partials from stored data.
#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "handshadow/coverage.hpp"

namespace handshadow {

struct VarId {
  int32_t v = -1;
  bool valid() const { return v >= 0; }
  bool operator==(const VarId&) const = default;
};

class Tape;

// Value + tape handle. Cheap to copy; arithmetic on Vars appends tape nodes.
class Var {
 public:
  Var() = default;
  Var(Tape* t, VarId id, double value) : val_(value), id_(id), tape_(t) {}

  double value() const { return val_; }
  VarId id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  double val_ = 0.0;
  VarId id_{};
  Tape* tape_ = nullptr;
};

enum class Op : uint8_t {
  Leaf,
  Add, Sub, Mul, Div, Neg,
  Sin, Cos, Exp, Sqrt, Sigmoid,
  Min, Max, Relu, Powi,
  LinC,   // a*x + b with constant a, b (a in pa, b in pb)
  DivR,   // c / x with constant c (c in pb)
  Affine,     // fused: bias + sum(coeff_i * x_i)
  SumSqDiff,  // fused: extra + sum((x_i - t_i)^2)
  PenSq,      // fused: |v - q|^2 over 3 inputs
  Pixel,      // fused: 1 - prod(1 - D_j) soft rasterizer pixel
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  size_t size() const { return nodes_.size(); }

  void reset() {
    nodes_.clear();
    values_.clear();
    grads_.clear();
    fused_.clear();
    fin_.clear();
    fco_.clear();
  }

  Var leaf(double value) {
    VarId id = push(Op::Leaf, -1, -1, value, 0.0, 0.0);
    return Var(this, id, value);
  }

  double value(VarId id) const { return values_[size_t(id.v)]; }

  // --- fused recorders ------------------------------------------------------

  // bias + sum(coeffs[i] * xs[i]); partials are the coefficients.
  Var affine(std::span<const Var> xs, std::span<const double> coeffs,
             double bias) {
    assert(xs.size() == coeffs.size());
    double v = bias;
    for (size_t i = 0; i < xs.size(); ++i) v += coeffs[i] * xs[i].value();
    uint32_t rec = push_fused(xs, coeffs);
    VarId id = push(Op::Affine, int32_t(rec), -1, v, bias, 0.0);
    return Var(this, id, v);
  }

  // extra + sum((xs[i] - targets[i])^2)
  Var sum_sq_diff(std::span<const Var> xs, std::span<const double> targets,
                  double extra) {
    assert(xs.size() == targets.size());
    double v = extra;
    for (size_t i = 0; i < xs.size(); ++i) {
      double d = xs[i].value() - targets[i];
      v += d * d;
    }
    uint32_t rec = push_fused(xs, targets);
    VarId id = push(Op::SumSqDiff, int32_t(rec), -1, v, extra, 0.0);
    return Var(this, id, v);
  }

  // |(x,y,z) - q|^2 with q constant (host surface point held fixed).
  Var pen_depth_sq(const Var& x, const Var& y, const Var& z, double qx,
                   double qy, double qz) {
    const Var xs[3] = {x, y, z};
    const double q[3] = {qx, qy, qz};
    return sum_sq_diff(std::span<const Var>(xs, 3), std::span<const double>(q, 3),
                       0.0);
  }

  // One soft-rasterized pixel. Contributions carry the 6 projected-coordinate
  // variables of each triangle and the finished dPixel/dcoord partials
  // (exclusive products already applied by the rasterizer). Coefficient arena
  // layout: [px, py, sigma, partials(6 per tri)...]; replay recomputes the
  // product of complements from the stored inputs.
  struct PixelContribution {
    std::array<VarId, 6> ids;
    std::array<double, 6> dpix;
  };

  Var raster_pixel(double px, double py, double sigma, double value,
                   std::span<const PixelContribution> cs) {
    FusedRec rec;
    rec.first_in = uint32_t(fin_.size());
    rec.first_co = uint32_t(fco_.size());
    rec.count = uint32_t(cs.size()) * 6;
    fco_.push_back(px);
    fco_.push_back(py);
    fco_.push_back(sigma);
    for (const auto& c : cs) {
      for (int i = 0; i < 6; ++i) fin_.push_back(c.ids[i].v);
    }
    for (const auto& c : cs) {
      for (int i = 0; i < 6; ++i) fco_.push_back(c.dpix[i]);
    }
    uint32_t ri = uint32_t(fused_.size());
    fused_.push_back(rec);
    VarId id = push(Op::Pixel, int32_t(ri), -1, value, 0.0, 0.0);
    return Var(this, id, value);
  }

  // --- backward -------------------------------------------------------------

  // Single reverse sweep; gradient of root wrt itself is 1. Accumulation order
  // is fixed by node order, never data dependent.
  void backward(VarId root) {
    assert(root.valid() && size_t(root.v) < nodes_.size());
    grads_.assign(nodes_.size(), 0.0);
    grads_[size_t(root.v)] = 1.0;
    for (int32_t i = int32_t(nodes_.size()) - 1; i >= 0; --i) {
      double g = grads_[size_t(i)];
      if (g == 0.0) continue;
      const Node& n = nodes_[size_t(i)];
      switch (n.op) {
        case Op::Leaf:
          break;
        case Op::Affine: {
          const FusedRec& r = fused_[size_t(n.a)];
          for (uint32_t k = 0; k < r.count; ++k)
            grads_[size_t(fin_[r.first_in + k])] += g * fco_[r.first_co + k];
          break;
        }
        case Op::SumSqDiff: {
          const FusedRec& r = fused_[size_t(n.a)];
          for (uint32_t k = 0; k < r.count; ++k) {
            int32_t in = fin_[r.first_in + k];
            grads_[size_t(in)] +=
                g * 2.0 * (values_[size_t(in)] - fco_[r.first_co + k]);
          }
          break;
        }
        case Op::Pixel: {
          const FusedRec& r = fused_[size_t(n.a)];
          for (uint32_t k = 0; k < r.count; ++k)
            grads_[size_t(fin_[r.first_in + k])] +=
                g * fco_[r.first_co + 3 + k];
          break;
        }
        default:
          if (n.a >= 0) grads_[size_t(n.a)] += g * n.pa;
          if (n.op != Op::Powi && n.b >= 0) grads_[size_t(n.b)] += g * n.pb;
          break;
      }
    }
  }

  double grad(VarId id) const { return grads_[size_t(id.v)]; }
  const std::vector<double>& gradients() const { return grads_; }

  // Recompute every stored value from the leaves. Used to check the tape
  // invariant that forward replay reproduces values exactly.
  std::vector<double> replay() const {
    std::vector<double> v(nodes_.size());
    for (size_t i = 0; i < nodes_.size(); ++i) {
      const Node& n = nodes_[i];
      switch (n.op) {
        case Op::Leaf: v[i] = values_[i]; break;
        case Op::Add: v[i] = v[size_t(n.a)] + v[size_t(n.b)]; break;
        case Op::Sub: v[i] = v[size_t(n.a)] - v[size_t(n.b)]; break;
        case Op::Mul: v[i] = v[size_t(n.a)] * v[size_t(n.b)]; break;
        case Op::Div: v[i] = v[size_t(n.a)] / v[size_t(n.b)]; break;
        case Op::Neg: v[i] = -v[size_t(n.a)]; break;
        case Op::Sin: v[i] = std::sin(v[size_t(n.a)]); break;
        case Op::Cos: v[i] = std::cos(v[size_t(n.a)]); break;
        case Op::Exp: v[i] = std::exp(v[size_t(n.a)]); break;
        case Op::Sqrt: v[i] = std::sqrt(v[size_t(n.a)]); break;
        case Op::Sigmoid: v[i] = stable_sigmoid(v[size_t(n.a)]); break;
        case Op::Min: v[i] = v[size_t(n.a)] <= v[size_t(n.b)] ? v[size_t(n.a)] : v[size_t(n.b)]; break;
        case Op::Max: v[i] = v[size_t(n.a)] >= v[size_t(n.b)] ? v[size_t(n.a)] : v[size_t(n.b)]; break;
        case Op::Relu: v[i] = v[size_t(n.a)] > 0.0 ? v[size_t(n.a)] : 0.0; break;
        case Op::Powi: v[i] = ipow(v[size_t(n.a)], n.b); break;
        case Op::LinC: v[i] = n.pa * v[size_t(n.a)] + n.pb; break;
        case Op::DivR: v[i] = n.pb / v[size_t(n.a)]; break;
        case Op::Affine: {
          const FusedRec& r = fused_[size_t(n.a)];
          double s = n.pa;
          for (uint32_t k = 0; k < r.count; ++k)
            s += fco_[r.first_co + k] * v[size_t(fin_[r.first_in + k])];
          v[i] = s;
          break;
        }
        case Op::SumSqDiff: {
          const FusedRec& r = fused_[size_t(n.a)];
          double s = n.pa;
          for (uint32_t k = 0; k < r.count; ++k) {
            double d = v[size_t(fin_[r.first_in + k])] - fco_[r.first_co + k];
            s += d * d;
          }
          v[i] = s;
          break;
        }
        case Op::Pixel: {
          const FusedRec& r = fused_[size_t(n.a)];
          double px = fco_[r.first_co], py = fco_[r.first_co + 1],
                 sigma = fco_[r.first_co + 2];
          double prod = 1.0;
          for (uint32_t k = 0; k < r.count; k += 6) {
            double c[6];
            for (int j = 0; j < 6; ++j)
              c[j] = v[size_t(fin_[r.first_in + k + j])];
            prod *= 1.0 - soft_coverage(c, px, py, sigma);
          }
          v[i] = 1.0 - prod;
          break;
        }
      }
    }
    return v;
  }

  // --- recording (used by Var operators) -------------------------------------

  VarId push(Op op, int32_t a, int32_t b, double value, double pa, double pb) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.pa = pa;
    n.pb = pb;
    nodes_.push_back(n);
    values_.push_back(value);
    return VarId{int32_t(nodes_.size()) - 1};
  }

  static double ipow(double x, int32_t n) {
    double r = 1.0, base = x;
    for (int32_t e = n; e > 0; e >>= 1) {
      if (e & 1) r *= base;
      base *= base;
    }
    return r;
  }

 private:
  struct Node {
    Op op;
    int32_t a = -1, b = -1;
    double pa = 0.0, pb = 0.0;
  };
  struct FusedRec {
    uint32_t first_in = 0, first_co = 0, count = 0;
  };

  uint32_t push_fused(std::span<const Var> xs, std::span<const double> co) {
    FusedRec r;
    r.first_in = uint32_t(fin_.size());
    r.first_co = uint32_t(fco_.size());
    r.count = uint32_t(xs.size());
    for (const Var& x : xs) fin_.push_back(x.id().v);
    fco_.insert(fco_.end(), co.begin(), co.end());
    uint32_t i = uint32_t(fused_.size());
    fused_.push_back(r);
    return i;
  }

  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<double> grads_;
  std::vector<FusedRec> fused_;
  std::vector<int32_t> fin_;
  std::vector<double> fco_;
};

// --- Var arithmetic ----------------------------------------------------------

inline Var operator+(const Var& a, const Var& b) {
  Tape* t = a.tape();
  double v = a.value() + b.value();
  return Var(t, t->push(Op::Add, a.id().v, b.id().v, v, 1.0, 1.0), v);
}

inline Var operator-(const Var& a, const Var& b) {
  Tape* t = a.tape();
  double v = a.value() - b.value();
  return Var(t, t->push(Op::Sub, a.id().v, b.id().v, v, 1.0, -1.0), v);
}

inline Var operator*(const Var& a, const Var& b) {
  Tape* t = a.tape();
  double v = a.value() * b.value();
  return Var(t, t->push(Op::Mul, a.id().v, b.id().v, v, b.value(), a.value()), v);
}

inline Var operator/(const Var& a, const Var& b) {
  if (b.value() == 0.0) throw std::domain_error("autodiff: division by zero");
  Tape* t = a.tape();
  double v = a.value() / b.value();
  return Var(t, t->push(Op::Div, a.id().v, b.id().v, v, 1.0 / b.value(),
                        -a.value() / (b.value() * b.value())), v);
}

inline Var operator-(const Var& a) {
  Tape* t = a.tape();
  return Var(t, t->push(Op::Neg, a.id().v, -1, -a.value(), -1.0, 0.0),
             -a.value());
}

// a*x + b with plain constants collapses to one node.
inline Var linc(const Var& x, double a, double b) {
  Tape* t = x.tape();
  double v = a * x.value() + b;
  return Var(t, t->push(Op::LinC, x.id().v, -1, v, a, b), v);
}

inline Var operator+(const Var& a, double c) { return linc(a, 1.0, c); }
inline Var operator+(double c, const Var& a) { return linc(a, 1.0, c); }
inline Var operator-(const Var& a, double c) { return linc(a, 1.0, -c); }
inline Var operator-(double c, const Var& a) { return linc(a, -1.0, c); }
inline Var operator*(const Var& a, double c) { return linc(a, c, 0.0); }
inline Var operator*(double c, const Var& a) { return linc(a, c, 0.0); }
inline Var operator/(const Var& a, double c) { return linc(a, 1.0 / c, 0.0); }

inline Var operator/(double c, const Var& x) {
  if (x.value() == 0.0) throw std::domain_error("autodiff: division by zero");
  Tape* t = x.tape();
  double v = c / x.value();
  return Var(t, t->push(Op::DivR, x.id().v, -1, v,
                        -c / (x.value() * x.value()), c), v);
}

inline Var sin(const Var& x) {
  Tape* t = x.tape();
  double v = std::sin(x.value());
  return Var(t, t->push(Op::Sin, x.id().v, -1, v, std::cos(x.value()), 0.0), v);
}

inline Var cos(const Var& x) {
  Tape* t = x.tape();
  double v = std::cos(x.value());
  return Var(t, t->push(Op::Cos, x.id().v, -1, v, -std::sin(x.value()), 0.0), v);
}

inline Var exp(const Var& x) {
  Tape* t = x.tape();
  double v = std::exp(x.value());
  return Var(t, t->push(Op::Exp, x.id().v, -1, v, v, 0.0), v);
}

inline Var sqrt(const Var& x) {
  if (x.value() < 0.0)
    throw std::domain_error("autodiff: sqrt of negative value");
  Tape* t = x.tape();
  double v = std::sqrt(x.value());
  // Subgradient 0 at exactly zero keeps perfect-match losses finite.
  double p = x.value() == 0.0 ? 0.0 : 0.5 / v;
  return Var(t, t->push(Op::Sqrt, x.id().v, -1, v, p, 0.0), v);
}

inline Var sigmoid(const Var& x) {
  Tape* t = x.tape();
  double v = stable_sigmoid(x.value());
  return Var(t, t->push(Op::Sigmoid, x.id().v, -1, v, v * (1.0 - v), 0.0), v);
}

// Ties take the first argument's gradient.
inline Var min(const Var& a, const Var& b) {
  Tape* t = a.tape();
  bool first = a.value() <= b.value();
  double v = first ? a.value() : b.value();
  return Var(t, t->push(Op::Min, a.id().v, b.id().v, v, first ? 1.0 : 0.0,
                        first ? 0.0 : 1.0), v);
}

inline Var max(const Var& a, const Var& b) {
  Tape* t = a.tape();
  bool first = a.value() >= b.value();
  double v = first ? a.value() : b.value();
  return Var(t, t->push(Op::Max, a.id().v, b.id().v, v, first ? 1.0 : 0.0,
                        first ? 0.0 : 1.0), v);
}

inline Var relu(const Var& x) {
  Tape* t = x.tape();
  bool pos = x.value() > 0.0;
  return Var(t, t->push(Op::Relu, x.id().v, -1, pos ? x.value() : 0.0,
                        pos ? 1.0 : 0.0, 0.0), pos ? x.value() : 0.0);
}

inline Var powi(const Var& x, int n) {
  assert(n >= 0);
  Tape* t = x.tape();
  double v = Tape::ipow(x.value(), n);
  double p = n == 0 ? 0.0 : double(n) * Tape::ipow(x.value(), n - 1);
  return Var(t, t->push(Op::Powi, x.id().v, n, v, p, 0.0), v);
}

// Double fallbacks so templated code instantiates with T = double.
inline double sin(double x) { return std::sin(x); }
inline double cos(double x) { return std::cos(x); }
inline double exp(double x) { return std::exp(x); }
inline double sqrt(double x) { return std::sqrt(x); }
inline double min(double a, double b) { return a <= b ? a : b; }
inline double max(double a, double b) { return a >= b ? a : b; }
inline double sigmoid(double x) { return stable_sigmoid(x); }
inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double powi(double x, int n) { return Tape::ipow(x, n); }
inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }

}  // namespace handshadow
