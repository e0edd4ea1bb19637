// Command-line front end: wave-speed analysis, simulation, profile solving,
// and the verification subcommands, all driven by one JSON config.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "coinvade/config.hpp"
#include "coinvade/rectangle.hpp"
#include "coinvade/sweep.hpp"

namespace {

using namespace coinvade;

enum class LogLevel { silent = 0, error = 1, warn = 2, info = 3, debug = 4 };

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("COINVADE_LOG");
    if (!env) return LogLevel::warn;
    const std::string v = env;
    if (v == "silent") return LogLevel::silent;
    if (v == "error") return LogLevel::error;
    if (v == "info") return LogLevel::info;
    if (v == "debug") return LogLevel::debug;
    return LogLevel::warn;
  }();
  return level;
}

void log(LogLevel lvl, const std::string& msg) {
  static const char* names[] = {"", "error", "warn", "info", "debug"};
  if (static_cast<int>(lvl) <= static_cast<int>(log_level()))
    std::cerr << "[coinvade:" << names[static_cast<int>(lvl)] << "] " << msg << "\n";
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  unsigned workers = 1;
  std::optional<unsigned long> seed;
};

RunConfig load(const CommonArgs& args) {
  RunConfig cfg = load_config(args.config_path);
  if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
  if (args.seed) cfg.seed = *args.seed;
  std::filesystem::create_directories(cfg.output_dir);
  return cfg;
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.output_dir) / name).string();
}

double resolve_speed(const RunConfig& cfg, const MinimalSpeed& ms) {
  return cfg.profile.c ? *cfg.profile.c : cfg.profile.c_multiplier * ms.c_star;
}

int cmd_wavespeed(const RunConfig& cfg) {
  json rep = report_base(cfg);
  const MinimalSpeed ms = minimal_speed(cfg.model, cfg.kernel1, cfg.kernel2);
  rep["c1_star"] = ms.c1_star;
  rep["c2_star"] = ms.c2_star;
  rep["c_star"] = ms.c_star;
  const double c = resolve_speed(cfg, ms);
  rep["c"] = c;
  if (c > ms.c_star + 1e-9) {
    const WaveAnalysis wa = analyze_wave(cfg.model, cfg.kernel1, cfg.kernel2, c);
    rep["lambda1"] = wa.lambda1;
    rep["lambda2"] = wa.lambda2;
    rep["lambda_hat1"] = wa.lambda_hat1;
    rep["lambda_hat2"] = wa.lambda_hat2;
    rep["gamma_window1"] = {wa.gamma_window1.lo, wa.gamma_window1.hi};
    rep["gamma_window2"] = {wa.gamma_window2.lo, wa.gamma_window2.hi};
    rep["eta"] = wa.eta;
    rep["rho"] = wa.rho;
    rep["L1"] = wa.L1;
    rep["L2"] = wa.L2;
  } else {
    rep["note"] = "subcritical: c <= c*, no decay exponents";
  }
  std::cout << rep.dump(2) << "\n";
  return 0;
}

int cmd_simulate(const RunConfig& cfg) {
  SimOptions opts = cfg.sim;
  const SimResult res = simulate(cfg.grid, cfg.model, cfg.kernel1, cfg.kernel2, cfg.ic, opts);
  write_text_file(out_path(cfg, "fronts.csv"), fronts_csv(res.trace));
  write_text_file(out_path(cfg, "snapshots.csv"), snapshots_csv(res.snapshots, cfg.grid));

  json rep = report_base(cfg);
  const MinimalSpeed ms = minimal_speed(cfg.model, cfg.kernel1, cfg.kernel2);
  rep["c_star"] = ms.c_star;
  rep["threshold_x"] = res.trace.threshold_x;
  rep["threshold_y"] = res.trace.threshold_y;
  for (const Species sp : {Species::x, Species::y}) {
    const char* key = sp == Species::x ? "speed_x" : "speed_y";
    try {
      const SpeedEstimate est = estimate_speed(res.trace, sp, cfg.window_fraction);
      rep[key] = {{"slope", est.slope},
                  {"stderr", est.stderr_slope},
                  {"points", est.points},
                  {"ratio_to_c_star", est.slope / ms.c_star}};
    } catch (const std::invalid_argument&) {
      rep[key] = "not reached";
    }
  }
  write_text_file(out_path(cfg, "summary.json"), rep.dump(2) + "\n");
  std::cout << rep.dump(2) << "\n";
  return 0;
}

int cmd_profile(const RunConfig& cfg) {
  const MinimalSpeed ms = minimal_speed(cfg.model, cfg.kernel1, cfg.kernel2);
  const double c = resolve_speed(cfg, ms);
  auto [pr, rep] = solve_profile(c, cfg.model, cfg.kernel1, cfg.kernel2, cfg.profile.grid,
                                 cfg.profile.iter);

  std::optional<BoundPair> bounds;
  if (!rep.subcritical)
    bounds = build_bound_pair(analyze_wave(cfg.model, cfg.kernel1, cfg.kernel2, c),
                              capacity_bounds(cfg.model));
  write_text_file(out_path(cfg, "profile.csv"), profile_csv(pr, bounds));

  std::optional<Equilibrium> eq;
  try {
    eq = coexistence_equilibrium(cfg.model);
  } catch (const NoCoexistenceError&) {
  }
  const AdmissibilityReport adm = check_admissibility(cfg.model, cfg.kernel1, cfg.kernel2);
  const RightLimitMode mode =
      adm.a5_ok && eq ? RightLimitMode::equilibrium : RightLimitMode::positivity;
  const LimitReport limits = check_limits(pr, eq, capacity_bounds(cfg.model), mode,
                                          cfg.profile.left_tol, cfg.profile.right_rel_tol);

  json out = report_base(cfg);
  out["c"] = c;
  out["c_star"] = ms.c_star;
  out["subcritical"] = rep.subcritical;
  out["converged"] = rep.converged;
  out["iterations"] = rep.iterations;
  out["final_update"] = rep.final_update;
  out["residual"] = rep.final_residual;
  out["left_tail_max"] = rep.left_tail_max;
  out["right_gap_phi"] = format_double(rep.right_gap_phi);
  out["right_gap_psi"] = format_double(rep.right_gap_psi);
  out["gamma_violations"] = rep.gamma_violations;
  out["clamp_active_at_solution"] = rep.clamp_active_at_solution;
  out["limits"] = {{"left_ok", limits.left_ok},
                   {"right_ok", limits.right_ok},
                   {"left_tail_max", limits.left_tail_max},
                   {"mode", mode == RightLimitMode::equilibrium ? "equilibrium" : "positivity"}};
  // a subcritical solve is never reported as a valid wave, whatever its residual
  const bool pass = !rep.subcritical && rep.converged && rep.final_residual <= 1e-6 &&
                    limits.pass && rep.gamma_violations == 0;
  out["pass"] = pass;
  write_text_file(out_path(cfg, "profile_report.json"), out.dump(2) + "\n");
  std::cout << out.dump(2) << "\n";
  return pass ? 0 : 1;
}

int cmd_verify_rectangle(const RunConfig& cfg) {
  json out = report_base(cfg);
  bool pass = false;
  try {
    const Equilibrium eq = coexistence_equilibrium(cfg.model);
    const auto rep = verify_contracting_adaptive(eq, capacity_bounds(cfg.model), cfg.model,
                                                 cfg.rectangle.epsilon, cfg.rectangle.samples);
    pass = rep.final.pass;
    out["equilibrium"] = {eq.k1, eq.k2};
    out["epsilon"] = rep.final.epsilon;
    out["worst_margin"] = rep.final.worst_margin;
    out["worst_s"] = rep.final.worst_s;
    json attempts = json::array();
    for (const auto& at : rep.attempts)
      attempts.push_back({{"epsilon", at.epsilon}, {"pass", at.pass}});
    out["attempts"] = attempts;
    json margins = json::array();
    for (const auto& sm : rep.final.samples)
      margins.push_back({{"s", sm.s}, {"margin", sm.margin}});
    out["margins"] = margins;
  } catch (const NoCoexistenceError& err) {
    out["error"] = err.what();
  }
  out["pass"] = pass;
  write_text_file(out_path(cfg, "rectangle_report.json"), out.dump(2) + "\n");
  std::cout << out.dump(2) << "\n";
  return pass ? 0 : 1;
}

int cmd_verify_bounds(const RunConfig& cfg) {
  const MinimalSpeed ms = minimal_speed(cfg.model, cfg.kernel1, cfg.kernel2);
  const double c = resolve_speed(cfg, ms);
  const WaveAnalysis wa = analyze_wave(cfg.model, cfg.kernel1, cfg.kernel2, c);
  BoundPair bp = build_bound_pair(wa, capacity_bounds(cfg.model));
  bp.rho *= cfg.bounds_check.rho_scale;  // deliberate-violation probes

  std::vector<double> tgrid;
  for (double t = cfg.bounds_check.t_min; t <= cfg.bounds_check.t_max + 1e-12;
       t += cfg.bounds_check.dt)
    tgrid.push_back(t);
  const BoundsCheckReport rep =
      verify_bounds(bp, cfg.model, cfg.kernel1, cfg.kernel2, c, tgrid, wa.L1, wa.L2);

  json out = report_base(cfg);
  out["c"] = c;
  out["eta"] = wa.eta;
  out["rho"] = bp.rho;
  out["rho_unscaled"] = wa.rho;
  out["L1"] = wa.L1;
  out["L2"] = wa.L2;
  out["q_err"] = rep.q_err;
  out["upper_violations"] = rep.upper_violations;
  out["lower_violations"] = rep.lower_violations;
  out["worst_upper_excess"] = rep.worst_upper_excess;
  out["worst_lower_deficit"] = rep.worst_lower_deficit;
  out["worst_upper_t"] = rep.worst_upper_t;
  out["worst_lower_t"] = rep.worst_lower_t;
  out["quadrature_rel_err"] = rep.worst_quadrature_rel_err;
  out["pass"] = rep.pass;
  write_text_file(out_path(cfg, "bounds_report.json"), out.dump(2) + "\n");
  std::cout << out.dump(2) << "\n";
  return rep.pass ? 0 : 1;
}

int cmd_spread_test(const RunConfig& cfg) {
  const Species sp = cfg.spread_test.species;
  const AuxiliaryScalarMap floor_map = capacity_floor_map(cfg.model, sp);
  const KernelSpec& kernel = sp == Species::x ? cfg.kernel1 : cfg.kernel2;
  const double c0 = scalar_spreading_speed(floor_map.b0(), kernel);

  const DiscreteKernel dk = discretize(kernel, cfg.grid.dx(), cfg.sim.mass_tol);
  std::vector<double> u0(cfg.grid.n, 0.0);
  for (std::size_t i = 0; i < cfg.grid.n; ++i)
    if (std::abs(cfg.grid.x(i) - cfg.ic.center) <= cfg.ic.half_width)
      u0[i] = sp == Species::x ? cfg.ic.amplitude_x : cfg.ic.amplitude_y;

  const std::size_t steps = cfg.spread_test.steps;
  const std::vector<double> u = iterate_scalar_recursion(cfg.grid, floor_map, dk, u0, steps);

  const double ball = cfg.spread_test.speed_fraction * c0 * static_cast<double>(steps);
  double min_in_ball = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cfg.grid.n; ++i)
    if (std::abs(cfg.grid.x(i) - cfg.ic.center) <= ball)
      min_in_ball = std::min(min_in_ball, u[i]);

  const bool pass = min_in_ball >= cfg.spread_test.occupancy_fraction * floor_map.u_fixed;
  json out = report_base(cfg);
  out["species"] = sp == Species::x ? "x" : "y";
  out["b0"] = floor_map.b0();
  out["c0"] = c0;
  out["u_fixed"] = floor_map.u_fixed;
  out["steps"] = steps;
  out["ball_radius"] = ball;
  out["min_in_ball"] = min_in_ball;
  out["required"] = cfg.spread_test.occupancy_fraction * floor_map.u_fixed;
  out["pass"] = pass;
  write_text_file(out_path(cfg, "spread_report.json"), out.dump(2) + "\n");
  std::cout << out.dump(2) << "\n";
  return pass ? 0 : 1;
}

int cmd_sweep(const RunConfig& cfg, unsigned workers) {
  const std::string csv = run_sweep(cfg, workers);
  write_text_file(out_path(cfg, "sweep.csv"), csv);
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coinvade: traveling waves and spreading speeds of a two-species "
               "integro-difference competition model"};
  app.require_subcommand(1);
  app.fallthrough();

  CommonArgs args;
  app.add_option("--config", args.config_path, "JSON configuration file")->required();
  app.add_option("--out", args.out_dir, "output directory (overrides config)");
  app.add_option("--workers", args.workers, "worker threads for sweeps")->default_val(1u);
  unsigned long seed_val = 0;
  auto* seed_opt = app.add_option("--seed", seed_val, "seed override for randomized checks");

  auto* sc_wavespeed = app.add_subcommand("wavespeed", "minimal speed and wave constants");
  auto* sc_simulate = app.add_subcommand("simulate", "run the spatial system, track fronts");
  auto* sc_profile = app.add_subcommand("profile", "solve the wave profile by fixed point");
  auto* sc_rect = app.add_subcommand("verify-rectangle", "check the contracting rectangle");
  auto* sc_bounds = app.add_subcommand("verify-bounds", "check the upper/lower solution chains");
  auto* sc_spread = app.add_subcommand("spread-test", "scalar recursion spreading lower bound");
  auto* sc_sweep = app.add_subcommand("sweep", "parameter sweep to CSV");

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) args.seed = seed_val;

  try {
    const RunConfig cfg = load(args);
    log(LogLevel::info, "config loaded from " + args.config_path);
    if (sc_wavespeed->parsed()) return cmd_wavespeed(cfg);
    if (sc_simulate->parsed()) return cmd_simulate(cfg);
    if (sc_profile->parsed()) return cmd_profile(cfg);
    if (sc_rect->parsed()) return cmd_verify_rectangle(cfg);
    if (sc_bounds->parsed()) return cmd_verify_bounds(cfg);
    if (sc_spread->parsed()) return cmd_spread_test(cfg);
    if (sc_sweep->parsed()) return cmd_sweep(cfg, args.workers);
    return 2;
  } catch (const coinvade::ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
}
