#include "elasto/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace elasto::config {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw SpecError("config: " + path + ": " + what);
}

void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
}

double as_double(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

int as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

Index as_index(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<Index>();
}

std::uint64_t as_u64(const json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !j.is_number_integer())
    fail(path, "expected a non-negative integer");
  if (j.is_number_integer() && j.get<std::int64_t>() < 0)
    fail(path, "expected a non-negative integer");
  return j.get<std::uint64_t>();
}

bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected a boolean");
  return j.get<bool>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

// Walks an object with a fixed dispatch table; anything else is an error.
template <class Fn>
void walk(const json& j, const std::string& path, Fn&& on_key) {
  expect_object(j, path);
  for (const auto& [key, value] : j.items()) {
    if (!on_key(key, value)) fail(path + "." + key, "unknown key");
  }
}

void parse_pulse(const json& j, const std::string& path, phantom::PulseSpec& p) {
  walk(j, path, [&](const std::string& k, const json& v) {
    if (k == "wavelength") p.wavelength = as_double(v, path + ".wavelength");
    else if (k == "sigma_axial") p.sigma_axial = as_double(v, path + ".sigma_axial");
    else if (k == "sigma_lateral") p.sigma_lateral = as_double(v, path + ".sigma_lateral");
    else return false;
    return true;
  });
}

void parse_inclusion(const json& j, const std::string& path, phantom::InclusionSpec& s) {
  walk(j, path, [&](const std::string& k, const json& v) {
    const std::string p = path + "." + k;
    if (k == "center_row") s.center_row = as_double(v, p);
    else if (k == "center_col") s.center_col = as_double(v, p);
    else if (k == "radius") s.radius = as_double(v, p);
    else if (k == "transition_width") s.transition_width = as_double(v, p);
    else if (k == "contrast") s.contrast = as_double(v, p);
    else if (k == "nu") s.nu = as_double(v, p);
    else return false;
    return true;
  });
}

void parse_deformation(const json& j, const std::string& path, phantom::DeformationSpec& d) {
  walk(j, path, [&](const std::string& k, const json& v) {
    const std::string p = path + "." + k;
    if (k == "kind") {
      const std::string s = as_string(v, p);
      if (s == "uniform_compression") d.kind = phantom::DeformationKind::uniform_compression;
      else if (s == "inclusion") d.kind = phantom::DeformationKind::inclusion;
      else if (s == "different_pr") d.kind = phantom::DeformationKind::different_pr;
      else if (s == "lateral_boundary") d.kind = phantom::DeformationKind::lateral_boundary;
      else fail(p, "unknown deformation kind '" + s + "'");
    } else if (k == "applied_strain") d.applied_strain = as_double(v, p);
    else if (k == "background_nu") d.background_nu = as_double(v, p);
    else if (k == "taper_width") d.taper_width = as_double(v, p);
    else if (k == "inclusion") parse_inclusion(v, p, d.inclusion);
    else return false;
    return true;
  });
}

void parse_phantom(const json& j, const std::string& path, RunConfig& c) {
  walk(j, path, [&](const std::string& k, const json& v) {
    const std::string p = path + "." + k;
    if (k == "rows") c.phantom.rows = as_index(v, p);
    else if (k == "cols") c.phantom.cols = as_index(v, p);
    else if (k == "scatterer_density") c.phantom.scatterer_density = as_double(v, p);
    else if (k == "pulse") parse_pulse(v, p, c.phantom.pulse);
    else if (k == "rng_seed") c.phantom.rng_seed = as_u64(v, p);
    else if (k == "noise_snr_db") c.phantom.noise_snr_db = as_double(v, p);
    else if (k == "amplitude_rms") c.phantom.amplitude_rms = as_double(v, p);
    else if (k == "axial_spacing_mm") c.phantom.axial_spacing_mm = as_double(v, p);
    else if (k == "lateral_pitch_mm") c.phantom.lateral_pitch_mm = as_double(v, p);
    else if (k == "center_frequency_mhz") c.phantom.center_frequency_mhz = as_double(v, p);
    else if (k == "sampling_frequency_mhz") c.phantom.sampling_frequency_mhz = as_double(v, p);
    else if (k == "deformation") parse_deformation(v, p, c.deformation);
    else return false;
    return true;
  });
}

void parse_dp(const json& j, const std::string& path, init::DpParams& d) {
  walk(j, path, [&](const std::string& k, const json& v) {
    const std::string p = path + "." + k;
    if (k == "axial_search") d.axial_search = as_int(v, p);
    else if (k == "lateral_search") d.lateral_search = as_int(v, p);
    else if (k == "transition_weight") d.transition_weight = as_double(v, p);
    else if (k == "patch_half_width") d.patch_half_width = as_int(v, p);
    else return false;
    return true;
  });
}

void parse_ncc(const json& j, const std::string& path, init::NccParams& n) {
  walk(j, path, [&](const std::string& k, const json& v) {
    const std::string p = path + "." + k;
    if (k == "upsample_factor") n.upsample_factor = as_int(v, p);
    else if (k == "window_axial") n.window_axial = as_int(v, p);
    else if (k == "window_lateral") n.window_lateral = as_int(v, p);
    else if (k == "overlap_fraction") n.overlap_fraction = as_double(v, p);
    else if (k == "search_axial") n.search_axial = as_int(v, p);
    else if (k == "search_lateral") n.search_lateral = as_int(v, p);
    else if (k == "subsample_fit") n.subsample_fit = as_bool(v, p);
    else return false;
    return true;
  });
}

void parse_solver(const json& j, const std::string& path, RunConfig& c) {
  solver::SolverParams& s = c.solver;
  walk(j, path, [&](const std::string& k, const json& v) {
    const std::string p = path + "." + k;
    if (k == "method") c.method = as_string(v, p);
    else if (k == "alpha1") s.alpha1 = as_double(v, p);
    else if (k == "alpha2") s.alpha2 = as_double(v, p);
    else if (k == "beta1") s.beta1 = as_double(v, p);
    else if (k == "beta2") s.beta2 = as_double(v, p);
    else if (k == "w") s.w = as_double(v, p);
    else if (k == "gamma") s.gamma = as_double(v, p);
    else if (k == "alpha3") s.alpha3 = as_double(v, p);
    else if (k == "alpha1s") s.alpha1s = as_double(v, p);
    else if (k == "alpha2s") s.alpha2s = as_double(v, p);
    else if (k == "beta1s") s.beta1s = as_double(v, p);
    else if (k == "beta2s") s.beta2s = as_double(v, p);
    else if (k == "gamma_s") s.gamma_s = as_double(v, p);
    else if (k == "w_f") s.w_f = as_double(v, p);
    else if (k == "w_s") s.w_s = as_double(v, p);
    else if (k == "alpha3s") s.alpha3s = as_double(v, p);
    else if (k == "eta_first") s.eta_first = as_double(v, p);
    else if (k == "eta_second") s.eta_second = as_double(v, p);
    else if (k == "eta_m") s.eta_m = as_double(v, p);
    else if (k == "nu_init") s.nu_init = as_double(v, p);
    else if (k == "nu_min") s.nu_min = as_double(v, p);
    else if (k == "nu_max") s.nu_max = as_double(v, p);
    else if (k == "s_floor") s.s_floor = as_double(v, p);
    else if (k == "epr_median") s.epr_median = as_bool(v, p);
    else if (k == "epr_update_from_iteration")
      s.epr_update_from_iteration = as_int(v, p);
    else if (k == "outer_iterations") s.outer_iterations = as_int(v, p);
    else if (k == "bias_update") s.bias_update = as_bool(v, p);
    else if (k == "early_stop_tol") s.early_stop_tol = as_double(v, p);
    else if (k == "converged_tol") s.converged_tol = as_double(v, p);
    else if (k == "linear_solver_tolerance") s.linear_solver_tolerance = as_double(v, p);
    else if (k == "strain_window_axial") s.strain_window_axial = as_int(v, p);
    else if (k == "strain_window_lateral") s.strain_window_lateral = as_int(v, p);
    else if (k == "dp") parse_dp(v, p, s.dp);
    else if (k == "ncc") parse_ncc(v, p, c.ncc);
    else return false;
    return true;
  });
}

void parse_strain(const json& j, const std::string& path, strain::LsqParams& s) {
  walk(j, path, [&](const std::string& k, const json& v) {
    const std::string p = path + "." + k;
    if (k == "window_axial") s.window_axial = as_int(v, p);
    else if (k == "window_lateral") s.window_lateral = as_int(v, p);
    else return false;
    return true;
  });
}

void parse_region(const json& j, const std::string& path, metrics::RegionMm& r) {
  walk(j, path, [&](const std::string& k, const json& v) {
    const std::string p = path + "." + k;
    if (k == "top_mm") r.top_mm = as_double(v, p);
    else if (k == "left_mm") r.left_mm = as_double(v, p);
    else if (k == "height_mm") r.height_mm = as_double(v, p);
    else if (k == "width_mm") r.width_mm = as_double(v, p);
    else return false;
    return true;
  });
}

void parse_metrics(const json& j, const std::string& path, metrics::WindowSweepSpec& m) {
  walk(j, path, [&](const std::string& k, const json& v) {
    const std::string p = path + "." + k;
    if (k == "window_height_mm") m.window_height_mm = as_double(v, p);
    else if (k == "window_width_mm") m.window_width_mm = as_double(v, p);
    else if (k == "background") parse_region(v, p, m.background);
    else if (k == "targets") {
      if (!v.is_array()) fail(p, "expected an array");
      m.targets.clear();
      for (std::size_t t = 0; t < v.size(); ++t) {
        metrics::RegionMm r;
        parse_region(v[t], p + "[" + std::to_string(t) + "]", r);
        m.targets.push_back(r);
      }
    } else if (k == "background_window_count")
      m.background_window_count = as_int(v, p);
    else return false;
    return true;
  });
}

void parse_io(const json& j, const std::string& path, RunConfig& c) {
  walk(j, path, [&](const std::string& k, const json& v) {
    if (k == "out_dir") c.out_dir = as_string(v, path + ".out_dir");
    else return false;
    return true;
  });
}

void parse_render(const json& j, const std::string& path, RenderSpec& r) {
  walk(j, path, [&](const std::string& k, const json& v) {
    const std::string p = path + "." + k;
    if (k == "colormap") r.colormap = colormap_from(as_string(v, p));
    else if (k == "vmin") r.vmin = as_double(v, p);
    else if (k == "vmax") r.vmax = as_double(v, p);
    else return false;
    return true;
  });
}

void merge_json(RunConfig& c, const json& root) {
  walk(root, "$", [&](const std::string& k, const json& v) {
    if (k == "preset") apply_preset(c, as_string(v, "$.preset"));
    else if (k == "phantom") parse_phantom(v, "$.phantom", c);
    else if (k == "solver") parse_solver(v, "$.solver", c);
    else if (k == "strain") parse_strain(v, "$.strain", c.strain);
    else if (k == "metrics") {
      parse_metrics(v, "$.metrics", c.metrics);
      c.has_metrics = true;
    } else if (k == "io") parse_io(v, "$.io", c);
    else if (k == "render") parse_render(v, "$.render", c.render);
    else return false;
    return true;
  });
  if (c.render.vmin >= c.render.vmax)
    fail("$.render", "vmin must be smaller than vmax");
}

json parse_text(const std::string& text) {
  json root = json::parse(text, nullptr, false);
  if (root.is_discarded())
    throw FormatError("config: document is not valid JSON");
  return root;
}

}  // namespace

void apply_preset(RunConfig& config, const std::string& name) {
  solver::SolverParams& s = config.solver;
  if (name == "sim") {
    s.alpha3 = 20.0;
    s.alpha3s = 0.045;
    s.eta_first = 1e-3;
    s.eta_second = 5e-4;
    s.eta_m = 1e-3;
  } else if (name == "phantom") {
    s.alpha3 = 80.0;
    s.alpha3s = 0.072;
    s.eta_first = 6e-4;
    s.eta_second = 1e-4;
    s.eta_m = 6e-4;
  } else if (name == "invivo") {
    s.alpha3 = 5.0;
    s.alpha3s = 0.1;
    s.eta_first = 8e-3;
    s.eta_second = 1.3e-3;
    s.eta_m = 8e-3;
  } else {
    throw SpecError("config: unknown preset '" + name +
                    "' (expected sim, phantom or invivo)");
  }
}

RunConfig parse_config(const std::string& json_text) {
  RunConfig c;
  merge_config(c, json_text);
  return c;
}

void merge_config(RunConfig& config, const std::string& json_text) {
  merge_json(config, parse_text(json_text));
}

RunConfig load_config(const std::filesystem::path& path) {
  RunConfig c;
  merge_config_file(c, path);
  return c;
}

void merge_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  merge_config(config, buf.str());
}

const char* colormap_name(Colormap map) {
  switch (map) {
    case Colormap::gray: return "gray";
    case Colormap::viridis: return "viridis";
    case Colormap::jet: return "jet";
  }
  return "unknown";
}

Colormap colormap_from(const std::string& name) {
  if (name == "gray") return Colormap::gray;
  if (name == "viridis") return Colormap::viridis;
  if (name == "jet") return Colormap::jet;
  throw SpecError("config: unknown colormap '" + name + "'");
}

}  // namespace elasto::config
