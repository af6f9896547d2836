// Run configuration file: `key value` lines, # comments. Unknown keys are
// rejected; every numeric field is validated and errors name the field.
#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "handshadow/optim.hpp"

namespace handshadow {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string target;       // target image path (optimize)
  std::string out_dir = "out";
  int hands = 2;
  double hand_scale = 1.0;
  int refine_iters = 100;
  Camera camera;
  RenderSettings settings;
  OptimConfig optim;

  void validate() const {
    auto require = [](bool ok, const std::string& field, const std::string& what) {
      if (!ok) throw ConfigError("config field '" + field + "': " + what);
    };
    require(hands == 1 || hands == 2, "hands", "must be 1 or 2");
    require(hand_scale > 0.0, "hand_scale", "must be > 0");
    require(settings.sigma > 0.0, "sigma", "must be > 0");
    require(camera.width > 0 && camera.height > 0, "width/height", "must be > 0");
    require(camera.near_plane > 0.0 && camera.near_plane < camera.far_plane,
            "near/far", "require 0 < near < far");
    require(camera.fov_y_deg > 10.0 && camera.fov_y_deg < 120.0, "fov_deg",
            "must lie in (10, 120)");
    require(optim.iterations >= 1, "iterations", "must be >= 1");
    require(optim.restarts >= 1, "restarts", "must be >= 1");
    require(optim.lr_theta > 0.0, "lr_theta", "must be > 0");
    require(optim.lr_q > 0.0, "lr_q", "must be > 0");
    require(optim.lr_t > 0.0, "lr_t", "must be > 0");
    require(optim.snapshot_every >= 1, "snapshot_every", "must be >= 1");
    require(optim.weights.w_image >= 0.0, "w_image", "must be >= 0");
    require(optim.weights.w_pen >= 0.0, "w_pen", "must be >= 0");
    require(optim.weights.w_limit >= 0.0, "w_limit", "must be >= 0");
    require(optim.sigma_start > 0.0, "sigma_start", "must be > 0");
    require(optim.anneal_fraction >= 0.0 && optim.anneal_fraction <= 1.0,
            "anneal_fraction", "must lie in [0,1]");
    require(refine_iters >= 1, "refine_iters", "must be >= 1");
  }
};

inline RunConfig parse_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key) || key[0] == '#') continue;
    std::string rest;
    std::getline(ss, rest);
    std::istringstream vs(rest);
    auto bad = [&](const std::string& why) -> void {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": field '" + key +
                        "': " + why);
    };
    auto num = [&]() {
      double v;
      if (!(vs >> v)) bad("expected a number");
      return v;
    };
    auto integer = [&]() {
      double v = num();
      if (v != double(int64_t(v))) bad("expected an integer");
      return int(v);
    };
    auto word = [&]() {
      std::string w;
      if (!(vs >> w)) bad("expected a value");
      return w;
    };
    auto onoff = [&]() {
      std::string w = word();
      if (w == "on" || w == "true" || w == "1") return true;
      if (w == "off" || w == "false" || w == "0") return false;
      bad("expected on|off");
      return false;
    };

    if (key == "target") cfg.target = word();
    else if (key == "out_dir") cfg.out_dir = word();
    else if (key == "hands") cfg.hands = integer();
    else if (key == "hand_scale") cfg.hand_scale = num();
    else if (key == "seed") cfg.optim.seed = uint64_t(num());
    else if (key == "width") cfg.camera.width = integer();
    else if (key == "height") cfg.camera.height = integer();
    else if (key == "fov_deg") cfg.camera.fov_y_deg = num();
    else if (key == "near") cfg.camera.near_plane = num();
    else if (key == "far") cfg.camera.far_plane = num();
    else if (key == "sigma") cfg.settings.sigma = num();
    else if (key == "image_term") {
      std::string w = word();
      if (w == "l2") cfg.optim.image_term = ImageTerm::L2;
      else if (w == "mse") cfg.optim.image_term = ImageTerm::MSE;
      else bad("expected l2|mse");
    }
    else if (key == "w_image") cfg.optim.weights.w_image = num();
    else if (key == "w_pen") cfg.optim.weights.w_pen = num();
    else if (key == "w_limit") cfg.optim.weights.w_limit = num();
    else if (key == "iterations") cfg.optim.iterations = integer();
    else if (key == "restarts") cfg.optim.restarts = integer();
    else if (key == "lr_theta") cfg.optim.lr_theta = num();
    else if (key == "lr_q") cfg.optim.lr_q = num();
    else if (key == "lr_t") cfg.optim.lr_t = num();
    else if (key == "adam_beta1") cfg.optim.adam_beta1 = num();
    else if (key == "adam_beta2") cfg.optim.adam_beta2 = num();
    else if (key == "adam_eps") cfg.optim.adam_eps = num();
    else if (key == "snapshot_every") cfg.optim.snapshot_every = integer();
    else if (key == "tol_rms") cfg.optim.tol_rms = num();
    else if (key == "rel_improvement") cfg.optim.rel_improvement = num();
    else if (key == "improvement_window") cfg.optim.improvement_window = integer();
    else if (key == "anneal_sigma") cfg.optim.anneal_sigma = onoff();
    else if (key == "sigma_start") cfg.optim.sigma_start = num();
    else if (key == "anneal_fraction") cfg.optim.anneal_fraction = num();
    else if (key == "debug_check_limits") cfg.optim.debug_check_limits = onoff();
    else if (key == "refine_iters") cfg.refine_iters = integer();
    else
      throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown key '" +
                        key + "'");
  }
  cfg.validate();
  return cfg;
}

// Deterministic config echo for manifests (one `config key value` line each).
inline std::string config_echo(const RunConfig& cfg) {
  char buf[4096];
  std::snprintf(
      buf, sizeof buf,
      "config hands %d\n"
      "config hand_scale %.17g\n"
      "config seed %llu\n"
      "config width %d\n"
      "config height %d\n"
      "config fov_deg %.17g\n"
      "config near %.17g\n"
      "config far %.17g\n"
      "config sigma %.17g\n"
      "config image_term %s\n"
      "config w_image %.17g\n"
      "config w_pen %.17g\n"
      "config w_limit %.17g\n"
      "config iterations %d\n"
      "config restarts %d\n"
      "config lr_theta %.17g\n"
      "config lr_q %.17g\n"
      "config lr_t %.17g\n"
      "config adam_beta1 %.17g\n"
      "config adam_beta2 %.17g\n"
      "config adam_eps %.17g\n"
      "config snapshot_every %d\n"
      "config tol_rms %.17g\n"
      "config rel_improvement %.17g\n"
      "config improvement_window %d\n"
      "config anneal_sigma %s\n"
      "config sigma_start %.17g\n"
      "config anneal_fraction %.17g\n"
      "config refine_iters %d\n",
      cfg.hands, cfg.hand_scale, (unsigned long long)cfg.optim.seed,
      cfg.camera.width, cfg.camera.height, cfg.camera.fov_y_deg,
      cfg.camera.near_plane, cfg.camera.far_plane, cfg.settings.sigma,
      to_string(cfg.optim.image_term), cfg.optim.weights.w_image,
      cfg.optim.weights.w_pen, cfg.optim.weights.w_limit, cfg.optim.iterations,
      cfg.optim.restarts, cfg.optim.lr_theta, cfg.optim.lr_q, cfg.optim.lr_t,
      cfg.optim.adam_beta1, cfg.optim.adam_beta2, cfg.optim.adam_eps,
      cfg.optim.snapshot_every, cfg.optim.tol_rms, cfg.optim.rel_improvement,
      cfg.optim.improvement_window, cfg.optim.anneal_sigma ? "on" : "off",
      cfg.optim.sigma_start, cfg.optim.anneal_fraction, cfg.refine_iters);
  return buf;
}

}  // namespace handshadow
