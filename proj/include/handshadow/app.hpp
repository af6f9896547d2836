// Command-line front end: optimize / render / interpolate / gradcheck plus a
// bundled-target exporter. All outputs are deterministic for a fixed seed and
// config: manifests carry no timestamps and every float is printed with %.17g.
//
// Exit codes: 0 success, 1 gradcheck failure, 2 configuration error, 3 io
// error, 4 numeric abort on all restarts.
#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>

#include "handshadow/gradcheck.hpp"
#include "handshadow/interpolation.hpp"
#include "handshadow/runconfig.hpp"
#include "handshadow/targets.hpp"

namespace handshadow::app {

namespace fs = std::filesystem;

inline constexpr int kOk = 0;
inline constexpr int kGradFail = 1;
inline constexpr int kConfigError = 2;
inline constexpr int kIoError = 3;
inline constexpr int kNumericError = 4;

namespace appdetail {

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Rigs {
  std::vector<HandRig> storage;
  std::vector<const HandRig*> ptrs;
  std::vector<Handedness> handed;
};

// Hand 0 is the left rig; a second hand is the mirrored right rig.
inline Rigs make_rigs(int hands, double scale) {
  Rigs r;
  r.storage.push_back(make_procedural_hand(Handedness::Left, scale));
  r.handed.push_back(Handedness::Left);
  if (hands == 2) {
    r.storage.push_back(make_procedural_hand(Handedness::Right, scale));
    r.handed.push_back(Handedness::Right);
  }
  for (const HandRig& h : r.storage) r.ptrs.push_back(&h);
  return r;
}

inline Rigs make_rigs_for(const std::vector<Handedness>& handed, double scale) {
  Rigs r;
  for (Handedness h : handed) {
    r.storage.push_back(make_procedural_hand(h, scale));
    r.handed.push_back(h);
  }
  for (const HandRig& h : r.storage) r.ptrs.push_back(&h);
  return r;
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ImageError("cannot create output directory: " + dir);
}

inline std::vector<std::pair<Handedness, HandParams>> tag_params(
    const Rigs& rigs, const std::vector<HandParams>& params) {
  std::vector<std::pair<Handedness, HandParams>> out;
  for (size_t i = 0; i < params.size(); ++i)
    out.emplace_back(rigs.handed[i], params[i]);
  return out;
}

// Skinned meshes at a pose (plain values).
inline std::vector<TriMesh> skinned_meshes(const Rigs& rigs,
                                           const std::vector<HandParams>& params) {
  std::vector<TriMesh> out;
  for (size_t i = 0; i < params.size(); ++i) {
    auto xf = forward_kinematics(*rigs.ptrs[i], pose_values(params[i]));
    out.push_back(skin(*rigs.ptrs[i], xf, params[i].beta));
  }
  return out;
}

inline GrayImage hard_render(const Rigs& rigs, const std::vector<HandParams>& params,
                             const Camera& cam) {
  auto meshes = skinned_meshes(rigs, params);
  std::vector<const TriMesh*> mp;
  for (auto& m : meshes) mp.push_back(&m);
  return render_silhouette_hard(mp, cam);
}

inline GrayImage soft_render(const Rigs& rigs, const std::vector<HandParams>& params,
                             const Camera& cam, const RenderSettings& st) {
  auto meshes = skinned_meshes(rigs, params);
  std::vector<const TriMesh*> mp;
  for (auto& m : meshes) mp.push_back(&m);
  return render_silhouette_soft(mp, cam, st);
}

// Figure-style export: dark silhouette composited on a light wall, shaded a
// touch by the nominal light direction.
inline GrayImage wall_composite(const GrayImage& soft, const ViewingConfig& view) {
  GrayImage out(soft.height, soft.width);
  Vec3 l = view.light ? normalized(view.light->direction) : Vec3{0, 0, -1};
  for (int r = 0; r < soft.height; ++r) {
    double fy = 1.0 - 2.0 * (r + 0.5) / soft.height;
    for (int c = 0; c < soft.width; ++c) {
      double fx = -1.0 + 2.0 * (c + 0.5) / soft.width;
      double wall = 0.93 - 0.05 * (fx * l.x + fy * l.y);
      double v = wall * (1.0 - 0.88 * soft.at(r, c));
      out.at(r, c) = std::min(1.0, std::max(0.0, v));
    }
  }
  return out;
}

inline void write_loss_log(const RunRecord& rec, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageError("cannot open for writing: " + path);
  out << "# restart iteration sigma total image pen\n";
  for (const IterationRecord& ir : rec.history)
    out << "iter " << ir.restart << " " << ir.iteration << " " << fmt(ir.sigma)
        << " " << fmt(ir.loss.total) << " " << fmt(ir.loss.image_term) << " "
        << fmt(ir.loss.pen_term) << "\n";
}

}  // namespace appdetail

// --- optimize -------------------------------------------------------------------

inline int cmd_optimize(const std::string& config_path) {
  RunConfig cfg = parse_run_config(config_path);
  appdetail::ensure_dir(cfg.out_dir);
  if (cfg.target.empty())
    throw ConfigError("config field 'target': required for optimize");

  GrayImage raw = load_image(cfg.target);
  if (raw.height != cfg.camera.height || raw.width != cfg.camera.width)
    throw ConfigError("config field 'target': image is " +
                      std::to_string(raw.width) + "x" + std::to_string(raw.height) +
                      " but the configured resolution is " +
                      std::to_string(cfg.camera.width) + "x" +
                      std::to_string(cfg.camera.height));
  GrayImage target = threshold_binary(raw);

  appdetail::Rigs rigs = appdetail::make_rigs(cfg.hands, cfg.hand_scale);
  RunRecord rec = optimize(target, rigs.ptrs, InitSpec::random(), cfg.camera,
                           cfg.settings, cfg.optim);

  fs::path out(cfg.out_dir);
  write_pgm(raw, (out / "target_input.pgm").string());
  write_pgm(target, (out / "target_used.pgm").string());
  appdetail::write_loss_log(rec, (out / "loss.txt").string());

  std::ofstream mf(out / "manifest.txt", std::ios::binary);
  mf << "handshadow-run-manifest 1\n";
  mf << "command optimize\n";
  mf << "target " << cfg.target << "\n";
  mf << config_echo(cfg);
  for (const std::string& e : rec.restart_errors) mf << "restart_error " << e << "\n";

  if (rec.aborted) {
    mf << "status aborted\n";
    mf.close();
    std::cerr << "optimize: every restart aborted numerically\n";
    return kNumericError;
  }

  // Snapshots of the winning restart, rendered at that iteration's sigma.
  for (const ParamsSnapshot& snap : rec.snapshots) {
    RenderSettings st = cfg.settings;
    st.sigma = annealed_sigma(cfg.optim, cfg.settings, snap.iteration);
    char name[96];
    std::snprintf(name, sizeof name, "snap_%06d", snap.iteration);
    GrayImage soft = appdetail::soft_render(rigs, snap.params, cfg.camera, st);
    GrayImage hard = appdetail::hard_render(rigs, snap.params, cfg.camera);
    write_pgm(soft, (out / (std::string(name) + "_soft.pgm")).string());
    write_pgm(hard, (out / (std::string(name) + "_hard.pgm")).string());
    mf << "snapshot " << snap.iteration << " " << name << "_soft.pgm " << name
       << "_hard.pgm\n";
  }

  // Final parameters; the final renders come from the reloaded file so that
  // `render` on the exported params reproduces them bit-exactly.
  save_params(appdetail::tag_params(rigs, rec.final_params),
              (out / "final.params").string());
  auto reloaded = load_params((out / "final.params").string());
  std::vector<HandParams> fparams;
  for (auto& [h, p] : reloaded) fparams.push_back(p);

  GrayImage fsoft = appdetail::soft_render(rigs, fparams, cfg.camera, cfg.settings);
  GrayImage fhard = appdetail::hard_render(rigs, fparams, cfg.camera);
  write_pgm(fsoft, (out / "final_soft.pgm").string());
  write_pgm(fhard, (out / "final_hard.pgm").string());
  write_png(fsoft, (out / "final_soft.png").string());
  write_png(fhard, (out / "final_hard.png").string());

  auto meshes = appdetail::skinned_meshes(rigs, fparams);
  for (size_t i = 0; i < meshes.size(); ++i) {
    std::string name = std::string("final_") + to_string(rigs.handed[i]) + ".obj";
    write_obj(meshes[i], (out / name).string());
    mf << "final_obj " << to_string(rigs.handed[i]) << " " << name << "\n";
  }

  mf << "status completed\n";
  mf << "best_restart " << rec.best_restart << "\n";
  mf << "best_image_term " << appdetail::fmt(rec.best_image_term) << "\n";
  mf << "iterations_run " << rec.iterations_run << "\n";
  mf << "stop_reason " << rec.stop_reason << "\n";
  mf << "converged " << (rec.stop_reason == "tol" ? 1 : 0) << "\n";
  mf << "final_iou " << appdetail::fmt(iou(fhard, target)) << "\n";
  mf << "final_params final.params\n";
  mf << "final_soft final_soft.pgm\n";
  mf << "final_hard final_hard.pgm\n";
  mf << "loss_log loss.txt\n";
  mf.close();
  if (!mf) throw ImageError("write failed: manifest.txt");
  return kOk;
}

// --- render ---------------------------------------------------------------------

inline int cmd_render(const std::string& params_path,
                      const std::string& config_path,
                      const std::string& out_dir) {
  RunConfig cfg = parse_run_config(config_path);
  appdetail::ensure_dir(out_dir);
  auto loaded = load_params(params_path);

  std::vector<Handedness> handed;
  std::vector<HandParams> params;
  for (auto& [h, p] : loaded) {
    handed.push_back(h);
    params.push_back(p);
  }
  appdetail::Rigs rigs = appdetail::make_rigs_for(handed, cfg.hand_scale);

  // Clamp-on-load: out-of-limit parameter files render after clamping.
  for (size_t i = 0; i < params.size(); ++i) {
    HandParams clamped = clamp_pose(params[i], rigs.ptrs[i]->limits);
    if (clamped.theta != params[i].theta)
      std::cerr << "warning: params hand " << i
                << " has out-of-limit angles; clamped to the joint-limit table\n";
    params[i] = clamped;
  }

  fs::path out(out_dir);
  GrayImage soft = appdetail::soft_render(rigs, params, cfg.camera, cfg.settings);
  GrayImage hard = appdetail::hard_render(rigs, params, cfg.camera);
  write_pgm(soft, (out / "soft.pgm").string());
  write_pgm(hard, (out / "hard.pgm").string());
  write_png(soft, (out / "soft.png").string());
  write_png(hard, (out / "hard.png").string());

  ViewingConfig view{cfg.camera, DirectionalLight{{0.25, 0.35, -1.0}}};
  write_pgm(appdetail::wall_composite(soft, view), (out / "wall.pgm").string());

  std::ofstream mf(out / "render_manifest.txt", std::ios::binary);
  mf << "handshadow-render-manifest 1\n";
  mf << "params " << params_path << "\n";
  mf << config_echo(cfg);
  mf << "soft soft.pgm\nhard hard.pgm\nwall wall.pgm\n";
  return kOk;
}

// --- interpolate ----------------------------------------------------------------

namespace appdetail {

inline bool is_params_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RigError("cannot open endpoint file: " + path);
  std::string first;
  std::getline(in, first);
  return first.rfind("handshadow-params", 0) == 0;
}

}  // namespace appdetail

inline int cmd_interpolate(const std::string& a_path, const std::string& b_path,
                           int frame_count, bool refine,
                           const std::string& config_path,
                           const std::string& out_override = "") {
  RunConfig cfg = parse_run_config(config_path);
  std::string out_dir = out_override.empty() ? cfg.out_dir : out_override;
  appdetail::ensure_dir(out_dir);
  fs::path out(out_dir);

  appdetail::Rigs rigs = appdetail::make_rigs(cfg.hands, cfg.hand_scale);

  bool a_is_params = appdetail::is_params_file(a_path);
  bool b_is_params = appdetail::is_params_file(b_path);

  auto load_endpoint_params = [&](const std::string& path) {
    auto loaded = load_params(path);
    if (int(loaded.size()) != cfg.hands)
      throw ConfigError("config field 'hands': params file " + path + " holds " +
                        std::to_string(loaded.size()) + " hands");
    std::vector<HandParams> p;
    for (size_t i = 0; i < loaded.size(); ++i)
      p.push_back(clamp_pose(loaded[i].second, rigs.ptrs[i]->limits));
    return p;
  };
  auto load_endpoint_image = [&](const std::string& path) {
    GrayImage raw = load_image(path);
    if (raw.height != cfg.camera.height || raw.width != cfg.camera.width)
      throw ConfigError("config field 'width/height': endpoint image " + path +
                        " does not match the configured resolution");
    return threshold_binary(raw);
  };

  std::vector<HandParams> params_a, params_b;
  if (a_is_params) {
    params_a = load_endpoint_params(a_path);
  } else {
    GrayImage ia = load_endpoint_image(a_path);
    RunRecord ra = optimize(ia, rigs.ptrs, InitSpec::random(), cfg.camera,
                            cfg.settings, cfg.optim);
    if (ra.aborted) return kNumericError;
    params_a = ra.final_params;
  }
  if (b_is_params) {
    params_b = load_endpoint_params(b_path);
  } else {
    GrayImage ib = load_endpoint_image(b_path);
    RunRecord rb = optimize(ib, rigs.ptrs, InitSpec::from(params_a), cfg.camera,
                            cfg.settings, cfg.optim);
    if (rb.aborted) return kNumericError;
    params_b = rb.final_params;
  }

  // Refinement targets: the endpoint image when given, else the endpoint's
  // own hard render.
  GrayImage ia = a_is_params ? appdetail::hard_render(rigs, params_a, cfg.camera)
                             : load_endpoint_image(a_path);
  GrayImage ib = b_is_params ? appdetail::hard_render(rigs, params_b, cfg.camera)
                             : load_endpoint_image(b_path);

  ShadowSequence seq =
      interpolate(params_a, params_b, frame_count, rigs.ptrs, cfg.camera,
                  cfg.settings, cfg.optim, refine, &ia, &ib, cfg.refine_iters);

  std::ofstream mf(out / "sequence.txt", std::ios::binary);
  mf << "handshadow-seq-manifest 1\n";
  mf << "mode_a " << (a_is_params ? "params" : "target") << "\n";
  mf << "mode_b " << (b_is_params ? "params" : "target") << "\n";
  mf << "frames " << seq.frames.size() << "\n";
  mf << "refine " << (refine ? "on" : "off") << "\n";
  mf << "refine_iters " << seq.refine_iters << "\n";
  mf << config_echo(cfg);

  save_params(appdetail::tag_params(rigs, params_a), (out / "endpoint_a.params").string());
  save_params(appdetail::tag_params(rigs, params_b), (out / "endpoint_b.params").string());
  mf << "endpoint_a endpoint_a.params\nendpoint_b endpoint_b.params\n";

  for (size_t f = 0; f < seq.frames.size(); ++f) {
    char name[64];
    std::snprintf(name, sizeof name, "frame_%03zu", f);
    GrayImage hard = appdetail::hard_render(rigs, seq.frames[f], cfg.camera);
    write_pgm(hard, (out / (std::string(name) + ".pgm")).string());
    write_png(hard, (out / (std::string(name) + ".png")).string());
    auto meshes = appdetail::skinned_meshes(rigs, seq.frames[f]);
    mf << "frame " << f << " " << name << ".pgm";
    for (size_t i = 0; i < meshes.size(); ++i) {
      std::string oname = std::string(name) + "_" + to_string(rigs.handed[i]) + ".obj";
      write_obj(meshes[i], (out / oname).string());
      mf << " " << oname;
    }
    double pen = penetration_loss_value(
        meshes[0], meshes.size() > 1 ? &meshes[1] : nullptr, rigs.ptrs[0],
        meshes.size() > 1 ? rigs.ptrs[1] : nullptr);
    mf << " pen " << appdetail::fmt(pen) << "\n";
  }
  mf.close();
  if (!mf) throw ImageError("write failed: sequence.txt");
  return kOk;
}

// --- gradcheck --------------------------------------------------------------------

inline int cmd_gradcheck(uint64_t seed) {
  auto stages = run_gradcheck(seed);
  bool all = true;
  for (const auto& s : stages) {
    std::printf("%-12s worst rel err %.3e (threshold %.0e) %s%s%s\n",
                s.name.c_str(), s.worst_rel_err, s.threshold,
                s.pass ? "PASS" : "FAIL", s.pass ? "" : " at ",
                s.pass ? "" : s.worst_at.c_str());
    all = all && s.pass;
  }
  return all ? kOk : kGradFail;
}

// --- bundled target export -----------------------------------------------------

inline int cmd_targets(const std::string& out_dir, int size,
                       double hand_scale = 1.0) {
  appdetail::ensure_dir(out_dir);
  fs::path out(out_dir);
  Camera cam;
  cam.width = cam.height = size;
  HandRig left = make_procedural_hand(Handedness::Left, hand_scale);
  HandRig right = make_procedural_hand(Handedness::Right, hand_scale);
  for (const char* name : {"rabbit", "bird"}) {
    GrayImage img = bundled_hand_target(name, left, right, cam);
    write_pgm(img, (out / (std::string(name) + "_" + std::to_string(size) + ".pgm")).string());
  }
  write_pgm(bundled_disc(size, size, 0.0, -0.05, 0.45),
            (out / ("disc_" + std::to_string(size) + ".pgm")).string());
  write_pgm(bundled_ellipse(size, size, 0.0, -0.05, 0.55, 0.33, 0.35),
            (out / ("ellipse_" + std::to_string(size) + ".pgm")).string());
  return kOk;
}

}  // namespace handshadow::app
