#pragma once

#include <filesystem>
#include <string>

#include "elasto/init.hpp"
#include "elasto/metrics.hpp"
#include "elasto/phantom.hpp"
#include "elasto/solver.hpp"
#include "elasto/strain.hpp"

namespace elasto::config {

enum class Colormap { gray, viridis, jet };

struct RenderSpec {
  Colormap colormap = Colormap::viridis;
  double vmin = 0.0;
  double vmax = 1.0;
};

/// Everything a pipeline run needs, filled from defaults, an optional preset
/// and an optional JSON document (in that order). Unknown keys anywhere in
/// the document are rejected with their full path.
struct RunConfig {
  phantom::PhantomSpec phantom;
  phantom::DeformationSpec deformation;
  solver::SolverParams solver;
  std::string method = "mechsoul";
  init::NccParams ncc;
  strain::LsqParams strain;
  metrics::WindowSweepSpec metrics;
  bool has_metrics = false;  // a metrics section was present
  std::string out_dir = ".";
  RenderSpec render;
};

/// Parameter bundles tuned per dataset class. `sim` matches the built-in
/// defaults; `phantom` and `invivo` move the coupling weight and the
/// corner-rounding constants.
void apply_preset(RunConfig& config, const std::string& name);

/// Parses a JSON document (text). Throws SpecError naming the offending key
/// path on unknown keys, type mismatches or out-of-range values.
RunConfig parse_config(const std::string& json_text);
void merge_config(RunConfig& config, const std::string& json_text);

RunConfig load_config(const std::filesystem::path& path);
void merge_config_file(RunConfig& config, const std::filesystem::path& path);

const char* colormap_name(Colormap map);
Colormap colormap_from(const std::string& name);

}  // namespace elasto::config
