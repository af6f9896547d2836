// The outer optimization loop: Adam over (theta, Q, t) per hand with joint
// limits enforced by projection after every step, optional sigma annealing,
// multi-restart with best-image-term selection, and a deterministic run
// record. Everything is seeded and single-threaded, so identical inputs give
// bit-identical records.
#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "handshadow/losses.hpp"

namespace handshadow {

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OptimConfig {
  int iterations = 5000;
  double lr_theta = 0.01, lr_q = 0.005, lr_t = 0.002;
  double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
  uint64_t seed = 0;
  int restarts = 3;
  int snapshot_every = 50;
  // Convergence: stop when image_term / sqrt(H*W) drops below tol_rms, or the
  // best image term improves by less than rel_improvement (relative) over
  // improvement_window iterations.
  double tol_rms = 1e-3;
  double rel_improvement = 1e-6;
  int improvement_window = 200;
  // Coarse-to-fine: anneal sigma from sigma_start down to the render sigma
  // over the first anneal_fraction of the iteration budget.
  bool anneal_sigma = true;
  double sigma_start = 1e-3;
  double anneal_fraction = 0.4;
  bool debug_check_limits = false;
  ImageTerm image_term = ImageTerm::L2;
  LossWeights weights;

  void validate() const {
    if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    if (!(lr_theta > 0.0 && lr_q > 0.0 && lr_t > 0.0))
      throw std::invalid_argument("learning rates must be > 0");
    if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
    weights.validate();
  }
};

struct AdamState {
  std::vector<double> m, v;
  int step = 0;

  explicit AdamState(size_t dim = 0) : m(dim, 0.0), v(dim, 0.0) {}
};

// Standard bias-corrected Adam update, in place. Throws NumericError naming
// the offending index on a non-finite gradient.
inline void adam_step(std::span<double> params, std::span<const double> grads,
                      AdamState& state, double rate, double beta1 = 0.9,
                      double beta2 = 0.999, double eps = 1e-8) {
  if (params.size() != grads.size() || state.m.size() != params.size())
    throw std::invalid_argument("adam_step: dimension mismatch");
  ++state.step;
  double c1 = 1.0 - std::pow(beta1, state.step);
  double c2 = 1.0 - std::pow(beta2, state.step);
  for (size_t i = 0; i < params.size(); ++i) {
    double g = grads[i];
    if (!std::isfinite(g))
      throw NumericError("non-finite gradient at parameter index " +
                         std::to_string(i));
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
    double mh = state.m[i] / c1;
    double vh = state.v[i] / c2;
    params[i] -= rate * mh / (std::sqrt(vh) + eps);
  }
}

// --- initialization -------------------------------------------------------------

// Deterministic random initial configuration: theta uniform in the inner 50%
// of each limit interval, Q a rotation of at most 30 degrees about a random
// axis composed with the palm-toward-camera base, t inside the frustum at
// depth 0.35..0.6 m (two hands are placed in separate half-fields).
inline std::vector<HandParams> random_init(uint64_t seed,
                                           std::span<const HandRig* const> rigs,
                                           const Camera& cam) {
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<HandParams> out;
  for (size_t i = 0; i < rigs.size(); ++i) {
    const HandRig& rig = *rigs[i];
    HandParams p;
    for (int j = 0; j < kNumArticulated; ++j) {
      for (int a = 0; a < 3; ++a) {
        auto [lo, hi] = rig.limits.channel_interval_rad(j, a);
        double wdt = hi - lo;
        p.theta[size_t(j * 3 + a)] = rng.uniform(lo + 0.25 * wdt, hi - 0.25 * wdt);
      }
    }
    Vec3 axis = rng.unit_vector();
    double angle = rng.uniform(0.0, deg_to_rad(30.0));
    p.q = (Quat::axis_angle(axis, angle) * base_orientation(rig.handedness))
              .normalized();

    double depth = rng.uniform(0.35, 0.6);
    double hh = cam.tan_half_fov() * depth;
    double hw = hh * cam.aspect();
    // Wrist-anchored: fingers extend ~0.2 m up from t, so keep t biased low.
    double mx = std::max(0.0, hw - 0.14), my = std::max(0.0, hh - 0.12);
    double fx;
    if (rigs.size() == 2) {
      fx = i == 0 ? rng.uniform(-0.85, -0.25) : rng.uniform(0.25, 0.85);
    } else {
      fx = rng.uniform(-0.5, 0.5);
    }
    p.t = {fx * mx, rng.uniform(-0.8, 0.1) * my, -depth};
    out.push_back(clamp_pose(p, rig.limits));
  }
  return out;
}

// --- run record -------------------------------------------------------------------

struct IterationRecord {
  int restart = 0;
  int iteration = 0;
  LossReport loss;
  double sigma = 0.0;
};

struct ParamsSnapshot {
  int iteration = 0;
  std::vector<HandParams> params;
};

struct RunRecord {
  std::vector<IterationRecord> history;    // all restarts, in order
  std::vector<ParamsSnapshot> snapshots;   // winning restart only
  std::vector<HandParams> final_params;    // best iterate of the winning restart
  int best_restart = -1;
  double best_image_term = std::numeric_limits<double>::infinity();
  int iterations_run = 0;                  // winning restart
  std::string stop_reason;                 // "iterations" | "tol" | "plateau"
  std::vector<std::string> restart_errors; // non-empty message per aborted restart
  bool aborted = false;                    // every restart failed numerically
  uint64_t seed = 0;
  OptimConfig config;
};

struct InitSpec {
  enum class Kind { Random, Given } kind = Kind::Random;
  std::vector<HandParams> given;

  static InitSpec random() { return {}; }
  static InitSpec from(std::vector<HandParams> p) {
    return {Kind::Given, std::move(p)};
  }
};

using IterObserver =
    std::function<void(int restart, int iteration, std::span<const HandParams>)>;

namespace optdetail {

struct HandState {
  HandParams params;
  AdamState theta{45}, quat{4}, trans{3};
};

inline void apply_update(HandState& h, const HandRig& rig,
                         std::span<const double> g_theta,
                         std::span<const double> g_quat,
                         std::span<const double> g_t, const OptimConfig& cfg) {
  adam_step(h.params.theta, g_theta, h.theta, cfg.lr_theta, cfg.adam_beta1,
            cfg.adam_beta2, cfg.adam_eps);
  double q[4] = {h.params.q.w, h.params.q.x, h.params.q.y, h.params.q.z};
  adam_step(q, g_quat, h.quat, cfg.lr_q, cfg.adam_beta1, cfg.adam_beta2,
            cfg.adam_eps);
  h.params.q = {q[0], q[1], q[2], q[3]};
  double t[3] = {h.params.t.x, h.params.t.y, h.params.t.z};
  adam_step(t, g_t, h.trans, cfg.lr_t, cfg.adam_beta1, cfg.adam_beta2,
            cfg.adam_eps);
  h.params.t = {t[0], t[1], t[2]};
  h.params = clamp_pose(h.params, rig.limits);
}

inline std::vector<HandParams> jittered(const std::vector<HandParams>& base,
                                        std::span<const HandRig* const> rigs,
                                        uint64_t seed) {
  Rng rng(seed);
  std::vector<HandParams> out = base;
  for (size_t i = 0; i < out.size(); ++i) {
    for (double& th : out[i].theta) th += rng.uniform(-1.0, 1.0) * deg_to_rad(3.0);
    Quat dq = Quat::axis_angle(rng.unit_vector(), rng.uniform(0.0, deg_to_rad(5.0)));
    out[i].q = (dq * out[i].q).normalized();
    out[i].t += Vec3{rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01),
                     rng.uniform(-0.01, 0.01)};
    out[i] = clamp_pose(out[i], rigs[i]->limits);
  }
  return out;
}

}  // namespace optdetail

inline double annealed_sigma(const OptimConfig& cfg, const RenderSettings& st,
                             int iteration) {
  if (!cfg.anneal_sigma || cfg.sigma_start <= st.sigma) return st.sigma;
  double span = cfg.anneal_fraction * double(cfg.iterations);
  if (span < 1.0 || double(iteration) >= span) return st.sigma;
  double f = double(iteration) / span;
  return std::exp((1.0 - f) * std::log(cfg.sigma_start) + f * std::log(st.sigma));
}

// Gradient-descent silhouette fitting over (theta, Q, t) per hand, beta fixed.
// Runs cfg.restarts restarts (random inits, or jitters of the given init) and
// keeps the restart whose best soft image term is lowest.
inline RunRecord optimize(const GrayImage& target,
                          std::span<const HandRig* const> rigs,
                          const InitSpec& init, const Camera& cam,
                          const RenderSettings& settings, const OptimConfig& cfg,
                          const IterObserver& observer = {}) {
  cfg.validate();
  cam.validate();
  settings.validate();
  if (!target.in_unit_range())
    throw ImageError("optimize: target pixels must lie in [0,1]");

  RunRecord rec;
  rec.seed = cfg.seed;
  rec.config = cfg;

  Tape tape;
  for (int restart = 0; restart < cfg.restarts; ++restart) {
    std::vector<optdetail::HandState> hands(rigs.size());
    {
      std::vector<HandParams> start;
      if (init.kind == InitSpec::Kind::Random) {
        start = random_init(cfg.seed + 1000003ULL * uint64_t(restart), rigs, cam);
      } else if (restart == 0) {
        start = init.given;
      } else {
        start = optdetail::jittered(init.given, rigs,
                                    cfg.seed + 1000003ULL * uint64_t(restart));
      }
      for (size_t i = 0; i < rigs.size(); ++i)
        hands[i].params = clamp_pose(start[i], rigs[i]->limits);
    }
    const std::vector<std::array<double, 6>> beta0 = [&] {
      std::vector<std::array<double, 6>> b;
      for (auto& h : hands) b.push_back(h.params.beta);
      return b;
    }();

    double best_image = std::numeric_limits<double>::infinity();
    std::vector<HandParams> best_params;
    std::vector<ParamsSnapshot> snapshots;
    double window_best = std::numeric_limits<double>::infinity();
    std::string stop_reason = "iterations";
    int iters_done = 0;
    std::string error;

    try {
      for (int it = 0; it < cfg.iterations; ++it) {
        RenderSettings st = settings;
        st.sigma = annealed_sigma(cfg, settings, it);

        tape.reset();
        std::vector<SceneHand> scene;
        for (size_t i = 0; i < rigs.size(); ++i)
          scene.push_back({rigs[i], hands[i].params});
        LossBreakdown lb =
            total_loss(target, scene, cam, st, cfg.weights, cfg.image_term, tape);
        if (!std::isfinite(lb.report.total))
          throw NumericError("non-finite loss at iteration " + std::to_string(it));
        lb.report.iteration = it;
        rec.history.push_back({restart, it, lb.report, st.sigma});

        if (lb.report.image_term < best_image) {
          best_image = lb.report.image_term;
          best_params.clear();
          for (auto& h : hands) best_params.push_back(h.params);
        }
        if (it % cfg.snapshot_every == 0) {
          ParamsSnapshot snap;
          snap.iteration = it;
          for (auto& h : hands) snap.params.push_back(h.params);
          snapshots.push_back(std::move(snap));
        }
        if (observer) {
          std::vector<HandParams> cur;
          for (auto& h : hands) cur.push_back(h.params);
          observer(restart, it, cur);
        }
        iters_done = it + 1;

        // Convergence checks on the best-so-far image term.
        if (best_image / std::sqrt(double(target.count())) < cfg.tol_rms) {
          stop_reason = "tol";
          break;
        }
        if (it >= cfg.improvement_window && it % cfg.improvement_window == 0) {
          if (window_best - best_image < cfg.rel_improvement * std::max(1e-30, window_best)) {
            stop_reason = "plateau";
            break;
          }
          window_best = best_image;
        }
        if (it == 0) window_best = best_image;

        tape.backward(lb.total.id());

        for (size_t i = 0; i < rigs.size(); ++i) {
          const TPose<Var>& pose = lb.poses[i];
          double g_theta[45], g_quat[4], g_t[3];
          for (int k = 0; k < 45; ++k)
            g_theta[k] = tape.grad(pose.theta[size_t(k)].id());
          for (int k = 0; k < 4; ++k)
            g_quat[k] = tape.grad(pose.quat[size_t(k)].id());
          g_t[0] = tape.grad(pose.t.x.id());
          g_t[1] = tape.grad(pose.t.y.id());
          g_t[2] = tape.grad(pose.t.z.id());
          optdetail::apply_update(hands[i], *rigs[i], g_theta, g_quat, g_t, cfg);
        }

        if (cfg.debug_check_limits) {
          for (size_t i = 0; i < rigs.size(); ++i) {
            const HandParams& p = hands[i].params;
            for (int j = 0; j < kNumArticulated; ++j)
              for (int a = 0; a < 3; ++a) {
                auto [lo, hi] = rigs[i]->limits.channel_interval_rad(j, a);
                double v = p.theta[size_t(j * 3 + a)];
                if (v < lo - 1e-15 || v > hi + 1e-15)
                  throw NumericError("joint limit violated in-loop");
              }
            if (std::abs(p.q.norm() - 1.0) > 1e-9)
              throw NumericError("quaternion drifted off unit norm");
            if (p.beta != beta0[i])
              throw NumericError("shape parameters changed during optimization");
          }
        }
      }
    } catch (const NumericError& e) {
      error = e.what();
    }

    if (!error.empty()) {
      rec.restart_errors.push_back("restart " + std::to_string(restart) + ": " + error);
      continue;
    }
    if (best_image < rec.best_image_term) {
      rec.best_image_term = best_image;
      rec.best_restart = restart;
      rec.final_params = best_params;
      rec.snapshots = std::move(snapshots);
      rec.stop_reason = stop_reason;
      rec.iterations_run = iters_done;
    }
  }

  rec.aborted = rec.best_restart < 0;
  return rec;
}

// Single-hand convenience wrapper; identical machinery.
inline RunRecord single_hand_mode(const GrayImage& target, const HandRig& rig,
                                  const InitSpec& init, const Camera& cam,
                                  const RenderSettings& settings,
                                  const OptimConfig& cfg,
                                  const IterObserver& observer = {}) {
  const HandRig* r = &rig;
  return optimize(target, std::span<const HandRig* const>(&r, 1), init, cam,
                  settings, cfg, observer);
}

}  // namespace handshadow
