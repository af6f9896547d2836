// Shadow-pose interpolation: optimize both endpoint images (the second warm
// started from the first), blend parameters per frame (theta and t linear,
// Q spherical-linear on the short arc), and optionally refine every
// intermediate frame against the blended objective
//   (1-a)*||I_A - R||_2^2 + a*||I_B - R||_2^2 + pen
// so the sequence stays shadow-consistent and penetration-free in transit.
// Frames 0 and T are the optimized endpoint parameters, bitwise.
#pragma once

#include "handshadow/optim.hpp"

namespace handshadow {

struct ShadowSequence {
  std::vector<std::vector<HandParams>> frames;  // T+1 entries, one vector per frame
  bool refined = false;
  int refine_iters = 0;
};

// Optimize I_A from a random init, then I_B warm-started from A's result.
inline std::pair<RunRecord, RunRecord> optimize_pair(
    const GrayImage& image_a, const GrayImage& image_b,
    std::span<const HandRig* const> rigs, const Camera& cam,
    const RenderSettings& settings, const OptimConfig& cfg) {
  if (image_a.height != image_b.height || image_a.width != image_b.width)
    throw ImageError("optimize_pair: targets must share a resolution");
  RunRecord run_a = optimize(image_a, rigs, InitSpec::random(), cam, settings, cfg);
  if (run_a.aborted) return {run_a, RunRecord{}};
  RunRecord run_b = optimize(image_b, rigs, InitSpec::from(run_a.final_params),
                             cam, settings, cfg);
  return {run_a, run_b};
}

namespace interpdetail {

inline std::vector<HandParams> blend(const std::vector<HandParams>& a,
                                     const std::vector<HandParams>& b,
                                     double alpha,
                                     std::span<const HandRig* const> rigs) {
  std::vector<HandParams> out(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    HandParams p;
    p.beta = a[i].beta;
    for (size_t k = 0; k < p.theta.size(); ++k)
      p.theta[k] = (1.0 - alpha) * a[i].theta[k] + alpha * b[i].theta[k];
    p.q = slerp(a[i].q, b[i].q, alpha);
    p.t = a[i].t * (1.0 - alpha) + b[i].t * alpha;
    out[i] = clamp_pose(p, rigs[i]->limits);
  }
  return out;
}

// Blended-objective refinement of one intermediate frame, in place.
inline void refine_frame(std::vector<HandParams>& frame, double alpha,
                         const GrayImage& image_a, const GrayImage& image_b,
                         std::span<const HandRig* const> rigs, const Camera& cam,
                         const RenderSettings& settings, const OptimConfig& cfg,
                         int max_iters) {
  std::vector<optdetail::HandState> hands(frame.size());
  for (size_t i = 0; i < frame.size(); ++i) hands[i].params = frame[i];

  Tape tape;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iters; ++it) {
    tape.reset();
    std::vector<SceneHand> scene;
    for (size_t i = 0; i < rigs.size(); ++i)
      scene.push_back({rigs[i], hands[i].params});

    std::vector<TPose<Var>> poses;
    std::vector<DiffMesh> meshes;
    for (const SceneHand& h : scene) {
      poses.push_back(pose_leaves(tape, h.params));
      auto xf = forward_kinematics(*h.rig, poses.back());
      meshes.push_back(skin(*h.rig, xf, h.params.beta, tape));
    }
    std::vector<const DiffMesh*> mptr;
    for (const DiffMesh& m : meshes) mptr.push_back(&m);
    GrayImage rendered = render_silhouette_soft(mptr, cam, settings, tape);

    // Squared image terms: sum_sq_diff without the root.
    std::vector<Var> xs;
    std::vector<double> ta, tb;
    double extra_a = 0.0, extra_b = 0.0;
    for (size_t i = 0; i < rendered.count(); ++i) {
      if (!rendered.ids.empty() && rendered.ids[i].valid()) {
        xs.emplace_back(&tape, rendered.ids[i], rendered.pixels[i]);
        ta.push_back(image_a.pixels[i]);
        tb.push_back(image_b.pixels[i]);
      } else {
        double da = rendered.pixels[i] - image_a.pixels[i];
        double db = rendered.pixels[i] - image_b.pixels[i];
        extra_a += da * da;
        extra_b += db * db;
      }
    }
    Var sq_a = tape.sum_sq_diff(xs, ta, extra_a);
    Var sq_b = tape.sum_sq_diff(xs, tb, extra_b);
    Var pen = penetration_loss(meshes[0],
                               meshes.size() > 1 ? &meshes[1] : nullptr, tape);
    Var total = sq_a * (1.0 - alpha) + sq_b * alpha + pen * cfg.weights.w_pen;

    if (pen.value() == 0.0 &&
        prev - total.value() < 1e-9 * std::max(1.0, prev) && it > 0)
      break;
    prev = total.value();

    tape.backward(total.id());
    for (size_t i = 0; i < rigs.size(); ++i) {
      double g_theta[45], g_quat[4], g_t[3];
      for (int k = 0; k < 45; ++k) g_theta[k] = tape.grad(poses[i].theta[size_t(k)].id());
      for (int k = 0; k < 4; ++k) g_quat[k] = tape.grad(poses[i].quat[size_t(k)].id());
      g_t[0] = tape.grad(poses[i].t.x.id());
      g_t[1] = tape.grad(poses[i].t.y.id());
      g_t[2] = tape.grad(poses[i].t.z.id());
      optdetail::apply_update(hands[i], *rigs[i], g_theta, g_quat, g_t, cfg);
    }
  }
  for (size_t i = 0; i < frame.size(); ++i) frame[i] = hands[i].params;
}

}  // namespace interpdetail

// Parameter-space interpolation between two optimized endpoint poses.
// image_a/image_b are required when refine is set; they are the blended
// refinement targets.
inline ShadowSequence interpolate(const std::vector<HandParams>& params_a,
                                  const std::vector<HandParams>& params_b,
                                  int frame_count,
                                  std::span<const HandRig* const> rigs,
                                  const Camera& cam,
                                  const RenderSettings& settings,
                                  const OptimConfig& cfg, bool refine,
                                  const GrayImage* image_a = nullptr,
                                  const GrayImage* image_b = nullptr,
                                  int refine_iters = 100) {
  if (params_a.size() != params_b.size() || params_a.size() != rigs.size())
    throw std::invalid_argument("interpolate: endpoint hand counts differ");
  if (frame_count < 1) throw std::invalid_argument("interpolate: T must be >= 1");
  if (refine && (!image_a || !image_b))
    throw std::invalid_argument("interpolate: refine needs both endpoint images");

  ShadowSequence seq;
  seq.refined = refine;
  seq.refine_iters = refine ? refine_iters : 0;
  seq.frames.resize(size_t(frame_count) + 1);
  seq.frames.front() = params_a;  // endpoints copied bitwise, never refined
  seq.frames.back() = params_b;
  for (int t = 1; t < frame_count; ++t) {
    double alpha = double(t) / double(frame_count);
    seq.frames[size_t(t)] = interpdetail::blend(params_a, params_b, alpha, rigs);
    if (refine)
      interpdetail::refine_frame(seq.frames[size_t(t)], alpha, *image_a,
                                 *image_b, rigs, cam, settings, cfg,
                                 refine_iters);
  }
  return seq;
}

}  // namespace handshadow
