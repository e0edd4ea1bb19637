#pragma once

// Run configuration: JSON schema, validation, kernel CSV loading, and the
// CSV/JSON writers shared by the command-line tools.

#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "coinvade/dynamics.hpp"
#include "coinvade/model.hpp"
#include "coinvade/profile.hpp"
#include "coinvade/version.hpp"

namespace coinvade {

using json = nlohmann::ordered_json;

/// Invalid or inconsistent configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Two-column CSV (offset, weight) -> tabulated kernel.
inline KernelSpec load_kernel_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("kernel csv: cannot open " + path);
  std::vector<double> offsets, weights;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double o, w;
    if (!(row >> o >> w)) {
      // tolerate a single header line
      if (offsets.empty()) continue;
      throw ConfigError("kernel csv: malformed line '" + line + "' in " + path);
    }
    offsets.push_back(o);
    weights.push_back(w);
  }
  if (offsets.empty()) throw ConfigError("kernel csv: no data rows in " + path);
  try {
    return KernelSpec::tabulated(std::move(offsets), std::move(weights));
  } catch (const std::invalid_argument& err) {
    throw ConfigError("kernel csv " + path + ": " + err.what());
  }
}

namespace detail {

template <class T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value at '" + key + "'");
  }
}

inline const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) throw ConfigError("config: missing required block '" + path + "'");
  return j[key];
}

}  // namespace detail

inline KernelSpec parse_kernel(const json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("family"))
    throw ConfigError("config: kernel at '" + path + "' needs a 'family'");
  const std::string family = j["family"].get<std::string>();
  try {
    if (family == "gaussian") return KernelSpec::gaussian(j.at("sigma").get<double>());
    if (family == "laplace") return KernelSpec::laplace(j.at("beta").get<double>());
    if (family == "uniform") return KernelSpec::uniform(j.at("half_width").get<double>());
    if (family == "tabulated") {
      if (j.contains("csv")) return load_kernel_csv(j["csv"].get<std::string>());
      return KernelSpec::tabulated(j.at("offsets").get<std::vector<double>>(),
                                   j.at("weights").get<std::vector<double>>());
    }
  } catch (const json::exception& err) {
    throw ConfigError("config: kernel at '" + path + "': " + err.what());
  } catch (const std::invalid_argument& err) {
    throw ConfigError("config: kernel at '" + path + "': " + err.what());
  }
  throw ConfigError("config: unknown kernel family '" + family + "' at '" + path + "'");
}

struct ProfileConfig {
  std::optional<double> c;      // absolute speed; wins over the multiplier
  double c_multiplier = 1.2;    // of c*
  ProfileGridOptions grid;
  ProfileIterOptions iter;
  double left_tol = 1e-4;
  double right_rel_tol = 0.01;
};

struct RectangleConfig {
  double epsilon = 0.01;
  int samples = 101;
};

struct BoundsCheckConfig {
  double t_min = -60.0;
  double t_max = 20.0;
  double dt = 0.05;
  double rho_scale = 1.0;  // deliberate-violation probes shrink rho
};

struct SpreadTestConfig {
  Species species = Species::x;
  std::size_t steps = 150;
  double speed_fraction = 0.8;      // ball radius = fraction * c0 * n
  double occupancy_fraction = 0.9;  // pass when min over the ball >= fraction * u+
};

struct SweepAxis {
  std::string param;  // dotted json path, e.g. "model.r1"
  std::vector<json> values;
};

struct RunConfig {
  ModelParams model;
  KernelSpec kernel1 = KernelSpec::gaussian(1.0);
  KernelSpec kernel2 = KernelSpec::gaussian(1.0);
  Grid grid{-100.0, 100.0, 2001};
  InitialCondition ic;
  SimOptions sim;
  double window_fraction = 0.5;
  ProfileConfig profile;
  RectangleConfig rectangle;
  BoundsCheckConfig bounds_check;
  SpreadTestConfig spread_test;
  std::string output_dir = ".";
  unsigned long seed = 0;
  std::vector<SweepAxis> sweep_axes;
  json raw;  // the resolved source document, embedded in reports
};

inline RunConfig parse_config(const json& j) {
  RunConfig cfg;
  cfg.raw = j;

  const json& jm = detail::require(j, "model", "model");
  try {
    cfg.model.r1 = jm.at("r1").get<double>();
    cfg.model.r2 = jm.at("r2").get<double>();
    cfg.model.m = jm.at("m").get<std::size_t>();
    cfg.model.a = detail::get_or<std::vector<double>>(jm, "a", {});
    cfg.model.e = detail::get_or<std::vector<double>>(jm, "e", {});
    cfg.model.b = detail::get_or<std::vector<double>>(jm, "b", {});
    cfg.model.f = detail::get_or<std::vector<double>>(jm, "f", {});
  } catch (const json::exception& err) {
    throw ConfigError(std::string("config: model block: ") + err.what());
  }
  try {
    validate(cfg.model);
  } catch (const std::invalid_argument& err) {
    throw ConfigError(std::string("config: model block: ") + err.what());
  }

  const json& jk = detail::require(j, "kernels", "kernels");
  cfg.kernel1 = parse_kernel(detail::require(jk, "k1", "kernels.k1"), "kernels.k1");
  cfg.kernel2 = parse_kernel(detail::require(jk, "k2", "kernels.k2"), "kernels.k2");

  if (j.contains("grid")) {
    const json& jg = j["grid"];
    cfg.grid.x_min = detail::get_or(jg, "x_min", cfg.grid.x_min);
    cfg.grid.x_max = detail::get_or(jg, "x_max", cfg.grid.x_max);
    cfg.grid.n = detail::get_or(jg, "n", cfg.grid.n);
    try {
      validate(cfg.grid);
    } catch (const std::invalid_argument& err) {
      throw ConfigError(std::string("config: grid block: ") + err.what());
    }
  }

  if (j.contains("simulation")) {
    const json& js = j["simulation"];
    cfg.sim.steps = detail::get_or(js, "steps", cfg.sim.steps);
    cfg.sim.threshold_x = detail::get_or(js, "threshold_x", cfg.sim.threshold_x);
    cfg.sim.threshold_y = detail::get_or(js, "threshold_y", cfg.sim.threshold_y);
    cfg.sim.mass_tol = detail::get_or(js, "mass_tol", cfg.sim.mass_tol);
    cfg.sim.snapshot_stride = detail::get_or(js, "snapshot_stride", cfg.sim.snapshot_stride);
    cfg.sim.guard_radii = detail::get_or(js, "guard_radii", cfg.sim.guard_radii);
    cfg.window_fraction = detail::get_or(js, "window_fraction", cfg.window_fraction);
    if (js.contains("ic")) {
      const json& ji = js["ic"];
      cfg.ic.center = detail::get_or(ji, "center", cfg.ic.center);
      cfg.ic.half_width = detail::get_or(ji, "half_width", cfg.ic.half_width);
      cfg.ic.amplitude_x = detail::get_or(ji, "amplitude_x", cfg.ic.amplitude_x);
      cfg.ic.amplitude_y = detail::get_or(ji, "amplitude_y", cfg.ic.amplitude_y);
    }
  }

  if (j.contains("profile")) {
    const json& jp = j["profile"];
    if (jp.contains("c") && !jp["c"].is_null()) cfg.profile.c = jp["c"].get<double>();
    cfg.profile.c_multiplier = detail::get_or(jp, "c_multiplier", cfg.profile.c_multiplier);
    cfg.profile.grid.t_min = detail::get_or(jp, "t_min", cfg.profile.grid.t_min);
    cfg.profile.grid.t_max = detail::get_or(jp, "t_max", cfg.profile.grid.t_max);
    cfg.profile.grid.dt = detail::get_or(jp, "dt", cfg.profile.grid.dt);
    cfg.profile.grid.mass_tol = detail::get_or(jp, "mass_tol", cfg.profile.grid.mass_tol);
    cfg.profile.iter.tol = detail::get_or(jp, "tol", cfg.profile.iter.tol);
    cfg.profile.iter.max_iters = detail::get_or(jp, "max_iters", cfg.profile.iter.max_iters);
    cfg.profile.iter.theta = detail::get_or(jp, "theta", cfg.profile.iter.theta);
    cfg.profile.iter.clamp_to_bounds = detail::get_or(jp, "clamp", true);
    cfg.profile.left_tol = detail::get_or(jp, "left_tol", cfg.profile.left_tol);
    cfg.profile.right_rel_tol = detail::get_or(jp, "right_rel_tol", cfg.profile.right_rel_tol);
    if (!(cfg.profile.grid.dt > 0) || !(cfg.profile.grid.t_max > cfg.profile.grid.t_min))
      throw ConfigError("config: profile block: need dt > 0 and t_max > t_min");
  }

  if (j.contains("rectangle")) {
    const json& jr = j["rectangle"];
    cfg.rectangle.epsilon = detail::get_or(jr, "epsilon", cfg.rectangle.epsilon);
    cfg.rectangle.samples = detail::get_or(jr, "samples", cfg.rectangle.samples);
    if (!(cfg.rectangle.epsilon > 0) || cfg.rectangle.samples < 3)
      throw ConfigError("config: rectangle block: need epsilon > 0 and samples >= 3");
  }

  if (j.contains("bounds_check")) {
    const json& jb = j["bounds_check"];
    cfg.bounds_check.t_min = detail::get_or(jb, "t_min", cfg.bounds_check.t_min);
    cfg.bounds_check.t_max = detail::get_or(jb, "t_max", cfg.bounds_check.t_max);
    cfg.bounds_check.dt = detail::get_or(jb, "dt", cfg.bounds_check.dt);
    cfg.bounds_check.rho_scale = detail::get_or(jb, "rho_scale", cfg.bounds_check.rho_scale);
  }

  if (j.contains("spread_test")) {
    const json& js = j["spread_test"];
    const std::string sp = detail::get_or<std::string>(js, "species", "x");
    if (sp != "x" && sp != "y") throw ConfigError("config: spread_test.species must be x or y");
    cfg.spread_test.species = sp == "x" ? Species::x : Species::y;
    cfg.spread_test.steps = detail::get_or(js, "steps", cfg.spread_test.steps);
    cfg.spread_test.speed_fraction =
        detail::get_or(js, "speed_fraction", cfg.spread_test.speed_fraction);
    cfg.spread_test.occupancy_fraction =
        detail::get_or(js, "occupancy_fraction", cfg.spread_test.occupancy_fraction);
  }

  cfg.output_dir = detail::get_or<std::string>(j, "output_dir", cfg.output_dir);
  cfg.seed = detail::get_or(j, "seed", cfg.seed);

  if (j.contains("sweep")) {
    const json& js = j["sweep"];
    if (!js.contains("axes") || !js["axes"].is_array())
      throw ConfigError("config: sweep block needs an 'axes' array");
    for (const auto& ja : js["axes"]) {
      SweepAxis axis;
      axis.param = ja.at("param").get<std::string>();
      if (!ja.contains("values") || !ja["values"].is_array() || ja["values"].empty())
        throw ConfigError("config: sweep axis '" + axis.param + "' needs nonempty values");
      for (const auto& v : ja["values"]) axis.values.push_back(v);
      cfg.sweep_axes.push_back(std::move(axis));
    }
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& err) {
    throw ConfigError("config: " + path + " is not valid JSON: " + err.what());
  }
  return parse_config(j);
}

/// Dotted-path override ("model.r1" = 2.0) applied to a JSON document.
inline void apply_override(json& doc, const std::string& dotted, const json& value) {
  json* node = &doc;
  std::size_t pos = 0;
  for (;;) {
    const std::size_t dot = dotted.find('.', pos);
    const std::string key = dotted.substr(pos, dot == std::string::npos ? dot : dot - pos);
    if (key.empty()) throw ConfigError("sweep: bad parameter path '" + dotted + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    pos = dot + 1;
  }
}

// ---- formatting helpers (deterministic, round-trip precision)

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << body;
}

inline std::string fronts_csv(const FrontTrace& trace) {
  std::string s = "n,front_x_X,front_x_Y\n";
  for (const auto& rec : trace.records) {
    s += std::to_string(rec.n);
    s += ',';
    s += rec.x_front_x ? format_double(*rec.x_front_x) : "nan";
    s += ',';
    s += rec.x_front_y ? format_double(*rec.x_front_y) : "nan";
    s += '\n';
  }
  return s;
}

inline std::string snapshots_csv(const std::vector<Snapshot>& snaps, const Grid& grid) {
  std::string s = "n,x,X,Y\n";
  for (const auto& snap : snaps)
    for (std::size_t i = 0; i < snap.X.size(); ++i) {
      s += std::to_string(snap.n);
      s += ',';
      s += format_double(grid.x(i));
      s += ',';
      s += format_double(snap.X[i]);
      s += ',';
      s += format_double(snap.Y[i]);
      s += '\n';
    }
  return s;
}

inline std::string profile_csv(const Profile& pr, const std::optional<BoundPair>& bounds) {
  std::string s = "t,phi,psi,phi_upper,phi_lower,psi_upper,psi_lower\n";
  for (std::size_t i = 0; i < pr.t.size(); ++i) {
    const double t = pr.t[i];
    s += format_double(t);
    s += ',';
    s += format_double(pr.phi[i]);
    s += ',';
    s += format_double(pr.psi[i]);
    for (const double v :
         {bounds ? bounds->phi_upper(t) : std::numeric_limits<double>::quiet_NaN(),
          bounds ? bounds->phi_lower(t) : std::numeric_limits<double>::quiet_NaN(),
          bounds ? bounds->psi_upper(t) : std::numeric_limits<double>::quiet_NaN(),
          bounds ? bounds->psi_lower(t) : std::numeric_limits<double>::quiet_NaN()}) {
      s += ',';
      s += format_double(v);
    }
    s += '\n';
  }
  return s;
}

/// Report skeleton carrying the resolved config and the artifact version.
inline json report_base(const RunConfig& cfg) {
  json r;
  r["artifact_version"] = version;
  r["config"] = cfg.raw;
  return r;
}

}  // namespace coinvade
