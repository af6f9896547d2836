// CLI wiring, shared between the `handshadow` binary and the test suites so
// commands can be exercised in-process with real exit codes.
#pragma once

#include <CLI11.hpp>

#include "handshadow/app.hpp"

namespace handshadow::app {

inline int run_cli(std::vector<std::string> args) {
  CLI::App cli{"hand shadow art: differentiable silhouette fitting for articulated hands"};
  cli.require_subcommand(1);

  std::string config_path, params_path, out_dir, a_path, b_path;
  int frames = 30, size = 256;
  bool refine = false;
  uint64_t seed = 0;
  double hand_scale = 1.0;

  CLI::App* opt = cli.add_subcommand("optimize", "fit hand poses to a target shadow image");
  opt->add_option("--config", config_path, "run configuration file")->required();

  CLI::App* ren = cli.add_subcommand("render", "render silhouettes from a params file");
  ren->add_option("--params", params_path, "pose parameters file")->required();
  ren->add_option("--config", config_path, "run configuration file")->required();
  ren->add_option("--out", out_dir, "output directory")->required();

  CLI::App* itp = cli.add_subcommand("interpolate", "interpolate between two shadow poses");
  itp->add_option("--a", a_path, "endpoint A: params file or target image")->required();
  itp->add_option("--b", b_path, "endpoint B: params file or target image")->required();
  itp->add_option("-T,--frames", frames, "frame count T (outputs T+1 frames)");
  itp->add_flag("--refine", refine, "refine intermediate frames against the blended objective");
  itp->add_option("--config", config_path, "run configuration file")->required();
  itp->add_option("--out", out_dir, "output directory (defaults to config out_dir)");

  CLI::App* gc = cli.add_subcommand("gradcheck", "finite-difference verification of all gradient paths");
  gc->add_option("--seed", seed, "seed for the randomized checks");

  CLI::App* tg = cli.add_subcommand("targets", "export the bundled test silhouettes");
  tg->add_option("--out", out_dir, "output directory")->required();
  tg->add_option("--size", size, "image size in pixels");
  tg->add_option("--hand-scale", hand_scale, "hand scale used for posed targets");

  // CLI11 wants argv order reversed for its vector interface.
  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    cli.parse(rev);
  } catch (const CLI::ParseError& e) {
    int code = cli.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (opt->parsed()) return cmd_optimize(config_path);
    if (ren->parsed()) return cmd_render(params_path, config_path, out_dir);
    if (itp->parsed())
      return cmd_interpolate(a_path, b_path, frames, refine, config_path, out_dir);
    if (gc->parsed()) return cmd_gradcheck(seed);
    if (tg->parsed()) return cmd_targets(out_dir, size, hand_scale);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumericError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {  // io: missing/corrupt files
    std::cerr << "io error: " << e.what() << "\n";
    return kIoError;
  }
  return kConfigError;
}

}  // namespace handshadow::app
