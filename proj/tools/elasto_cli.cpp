// Command-line front end: simulate phantoms, track displacement between two
// RF frames, derive strains/EPR, evaluate metrics and render fields.
//
// Exit codes: 0 success, 1 usage or validation failure, 2 tracking finished
// without meeting the convergence tolerance (outputs are still written).

#include <CLI11.hpp>
#include <Eigen/Core>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "elasto/config.hpp"
#include "elasto/init.hpp"
#include "elasto/io.hpp"
#include "elasto/phantom.hpp"
#include "elasto/render.hpp"
#include "elasto/solver.hpp"
#include "elasto/strain.hpp"

namespace fs = std::filesystem;
using namespace elasto;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::string preset;
  std::optional<std::uint64_t> seed;
};

config::RunConfig make_config(const CommonArgs& args) {
  config::RunConfig cfg;
  if (!args.preset.empty()) config::apply_preset(cfg, args.preset);
  if (!args.config_path.empty()) config::merge_config_file(cfg, args.config_path);
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (args.seed) cfg.phantom.rng_seed = *args.seed;
  return cfg;
}

void require_exists(const std::string& path) {
  if (!fs::exists(path)) throw IoError("input not found: " + path);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Binary field files are self-describing through their magic tag; the
// component flag picks one payload out of multi-payload formats.
Matrix load_component(const std::string& path, std::string component,
                      double* axial_mm = nullptr, double* lateral_mm = nullptr) {
  require_exists(path);
  std::ifstream probe(path, std::ios::binary);
  char tag[4] = {0, 0, 0, 0};
  probe.read(tag, 4);
  if (probe.gcount() != 4) throw FormatError("truncated header at byte offset 0");
  probe.close();
  const std::string magic(tag, 4);

  if (magic == "EFR1") {
    RfFrame f = io::load_frame(path);
    if (axial_mm) *axial_mm = f.axial_spacing_mm;
    if (lateral_mm) *lateral_mm = f.lateral_pitch_mm;
    if (!component.empty() && component != "samples")
      throw SpecError("component '" + component + "' not in an RF frame file");
    return f.samples;
  }
  if (magic == "EDF1") {
    DisplacementField f = io::load_displacement(path);
    if (component.empty() || component == "axial") return f.axial;
    if (component == "lateral") return f.lateral;
    throw SpecError("component '" + component + "' not in a displacement file");
  }
  if (magic == "ESF1") {
    StrainTensorField f = io::load_strain(path);
    if (component.empty() || component == "syy") return f.syy;
    if (component == "sxx") return f.sxx;
    throw SpecError("component '" + component + "' not in a strain file");
  }
  if (magic == "EPF1") {
    std::ifstream in(path, std::ios::binary);
    EprField f = io::read_epr(in);
    if (!component.empty() && component != "nu")
      throw SpecError("component '" + component + "' not in an EPR file");
    return f.nu;
  }
  throw FormatError("bad magic at byte offset 0");
}

int cmd_simulate(const config::RunConfig& cfg) {
  RfFrame pre = phantom::generate_speckle(cfg.phantom);
  phantom::GroundTruth gt =
      phantom::analytic_displacement(cfg.deformation, cfg.phantom.rows, cfg.phantom.cols);
  phantom::WarpResult post = phantom::warp_frame(pre, gt.displacement);

  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  io::save_frame(dir / "pre.efr1", pre);
  io::save_frame(dir / "post.efr1", post.frame);
  io::save_displacement(dir / "truth.edf1", gt.displacement);
  io::save_strain(dir / "truth_strain.esf1", gt.strain);
  io::save_epr(dir / "truth_epr.epf1", gt.epr);
  return 0;
}

int cmd_track(const config::RunConfig& cfg, const std::string& pre_path,
              const std::string& post_path, const std::string& method) {
  require_exists(pre_path);
  require_exists(post_path);
  RfFrame pre = io::load_frame(pre_path);
  RfFrame post = io::load_frame(post_path);
  if (pre.rows() != post.rows() || pre.cols() != post.cols())
    throw SpecError("track: frame shapes differ (" + std::to_string(pre.rows()) + "x" +
                    std::to_string(pre.cols()) + " vs " + std::to_string(post.rows()) +
                    "x" + std::to_string(post.cols()) + ")");

  const fs::path dir(cfg.out_dir);

  if (method == "ncc" || method == "dp") {
    DisplacementField d = method == "ncc"
                              ? init::ncc_track(pre, post, cfg.ncc)
                              : init::dp_initialize(pre, post, cfg.solver.dp);
    fs::create_directories(dir);
    io::save_displacement(dir / "displacement.edf1", d);
    return 0;
  }

  solver::Method m;
  if (method == "soul") m = solver::Method::soul;
  else if (method == "l1_soul") m = solver::Method::l1_soul;
  else if (method == "mechsoul") m = solver::Method::mechsoul;
  else if (method == "l1_mechsoul") m = solver::Method::l1_mechsoul;
  else
    throw SpecError("track: unknown method '" + method +
                    "' (expected soul, l1_soul, mechsoul, l1_mechsoul, ncc or dp)");

  solver::TrackingResult r = solver::run_tracking(pre, post, m, cfg.solver);

  fs::create_directories(dir);
  io::save_displacement(dir / "displacement.edf1", r.displacement);
  io::save_strain(dir / "strain.esf1", r.strains);
  io::save_epr(dir / "epr.epf1", r.epr);

  std::ofstream csv(dir / "cost_trace.csv");
  if (!csv) throw IoError("cannot open " + (dir / "cost_trace.csv").string());
  csv << "iteration,cost_before,cost_after,max_update\n";
  for (std::size_t k = 0; k < r.iterations.size(); ++k) {
    const auto& rec = r.iterations[k];
    csv << (k + 1) << "," << fmt(rec.cost_before) << "," << fmt(rec.cost_after) << ","
        << fmt(rec.max_update) << "\n";
  }
  return r.converged ? 0 : 2;
}

int cmd_strain(const config::RunConfig& cfg, const std::string& disp_path) {
  require_exists(disp_path);
  DisplacementField d = io::load_displacement(disp_path);
  StrainTensorField s = strain::compute_strains(d, cfg.strain);
  EprField nu = strain::epr_map(s, cfg.solver.s_floor, cfg.solver.nu_min,
                                cfg.solver.nu_max, cfg.solver.nu_init,
                                cfg.solver.epr_median);
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  io::save_strain(dir / "strain.esf1", s);
  io::save_epr(dir / "epr.epf1", nu);
  return 0;
}

int cmd_metrics(const config::RunConfig& cfg, const std::string& est_path,
                const std::string& truth_path, const std::string& component) {
  if (!cfg.has_metrics)
    throw SpecError("metrics: the config has no metrics section");

  double ax = cfg.phantom.axial_spacing_mm;
  double lat = cfg.phantom.lateral_pitch_mm;
  Matrix field = load_component(est_path, component, &ax, &lat);

  Matrix truth;
  const bool with_truth = !truth_path.empty();
  if (with_truth) truth = load_component(truth_path, component);

  metrics::MetricsReport r = metrics::sweep(field, ax, lat, cfg.metrics,
                                            with_truth ? &truth : nullptr);

  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);

  std::ofstream win(dir / "windows.csv");
  if (!win) throw IoError("cannot open " + (dir / "windows.csv").string());
  win << "kind,index,target,background,row0,col0,value\n";
  for (const auto& e : r.snr_values)
    win << "snr," << e.index << ",,," << e.row0 << "," << e.col0 << ","
        << fmt(e.value) << "\n";
  for (const auto& e : r.cnr_values)
    win << "cnr,," << e.target << "," << e.background << ",,," << fmt(e.value) << "\n";

  std::ofstream sum(dir / "summary.csv");
  if (!sum) throw IoError("cannot open " + (dir / "summary.csv").string());
  sum << "snr_mean,snr_std,snr_excluded,cnr_mean,cnr_std,cnr_excluded,rmse,psnr_db\n";
  sum << fmt(r.snr_mean) << "," << fmt(r.snr_std) << "," << r.snr_excluded << ","
      << fmt(r.cnr_mean) << "," << fmt(r.cnr_std) << "," << r.cnr_excluded << ",";
  if (r.rmse) sum << fmt(*r.rmse);
  sum << ",";
  if (r.psnr_db) sum << fmt(*r.psnr_db);
  sum << "\n";
  return 0;
}

int cmd_render(const config::RunConfig& cfg, const std::string& field_path,
               const std::string& component) {
  Matrix field = load_component(field_path, component);
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  const fs::path out =
      dir / (std::string("render") + render::image_extension(cfg.render.colormap));
  render::save_image(out, field, cfg.render);
  return 0;
}

void setup_threads() {
  if (const char* env = std::getenv("ELASTO_THREADS")) {
    const int k = std::atoi(env);
    if (k > 0) Eigen::setNbThreads(k);
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_threads();

  CLI::App app{"Regularized speckle tracking for quasi-static ultrasound elastography"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string method;
  std::string component;
  std::string pre_path, post_path, estimate_path, truth_path, field_path, disp_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "JSON configuration file");
    sub->add_option("--out", args.out_dir, "output directory (overrides io.out_dir)");
    sub->add_option("--preset", args.preset,
                    "parameter bundle: sim, phantom or invivo");
    sub->add_option("--seed", args.seed, "override the phantom RNG seed");
  };

  CLI::App* simulate =
      app.add_subcommand("simulate", "generate a speckle pair with ground truth");
  add_common(simulate);

  CLI::App* track = app.add_subcommand("track", "estimate displacement between frames");
  track->add_option("pre", pre_path, "pre-compression EFR1 frame")->required();
  track->add_option("post", post_path, "post-compression EFR1 frame")->required();
  track->add_option("--method", method,
                    "soul, l1_soul, mechsoul, l1_mechsoul, ncc or dp");
  add_common(track);

  CLI::App* strain_cmd =
      app.add_subcommand("strain", "least-squares strain and EPR from displacement");
  strain_cmd->add_option("displacement", disp_path, "EDF1 displacement file")->required();
  add_common(strain_cmd);

  CLI::App* metrics_cmd =
      app.add_subcommand("metrics", "windowed SNR/CNR sweep, optional RMSE/PSNR");
  metrics_cmd->add_option("estimate", estimate_path, "field to evaluate")->required();
  metrics_cmd->add_option("truth", truth_path, "reference field for RMSE/PSNR");
  metrics_cmd->add_option("--component", component,
                          "payload to read from multi-field files");
  add_common(metrics_cmd);

  CLI::App* render_cmd = app.add_subcommand("render", "write a PGM/PPM image of a field");
  render_cmd->add_option("field", field_path, "field file to render")->required();
  render_cmd->add_option("--component", component,
                         "payload to read from multi-field files");
  add_common(render_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    config::RunConfig cfg = make_config(args);
    if (!method.empty()) cfg.method = method;

    if (simulate->parsed()) return cmd_simulate(cfg);
    if (track->parsed()) return cmd_track(cfg, pre_path, post_path, cfg.method);
    if (strain_cmd->parsed()) return cmd_strain(cfg, disp_path);
    if (metrics_cmd->parsed())
      return cmd_metrics(cfg, estimate_path, truth_path, component);
    if (render_cmd->parsed()) return cmd_render(cfg, field_path, component);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
