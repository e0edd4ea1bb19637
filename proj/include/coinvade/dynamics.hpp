#pragma once

// Time-stepping of the full spatial system with history, front tracking,
// spreading-speed estimation, and the auxiliary monotone comparison maps.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "coinvade/kernel.hpp"
#include "coinvade/model.hpp"

namespace coinvade {

struct Grid {
  double x_min = 0.0;
  double x_max = 0.0;
  std::size_t n = 0;

  double dx() const { return (x_max - x_min) / static_cast<double>(n - 1); }
  double x(std::size_t i) const { return x_min + static_cast<double>(i) * dx(); }
};

inline void validate(const Grid& g) {
  if (g.n < 64) throw std::invalid_argument("grid: need at least 64 points");
  if (!(g.x_max > g.x_min)) throw std::invalid_argument("grid: x_max must exceed x_min");
}

/// Ring buffer of the last m+1 spatial field pairs; slot 0 is the oldest.
class StateHistory {
 public:
  StateHistory(std::size_t m, std::size_t n)
      : depth_(m + 1), x_(m + 1, std::vector<double>(n, 0.0)),
        y_(m + 1, std::vector<double>(n, 0.0)) {}

  std::size_t depth() const { return depth_; }
  std::size_t field_size() const { return x_[0].size(); }

  const std::vector<double>& X(std::size_t slot) const { return x_[index(slot)]; }
  const std::vector<double>& Y(std::size_t slot) const { return y_[index(slot)]; }
  const std::vector<double>& newest_X() const { return X(depth_ - 1); }
  const std::vector<double>& newest_Y() const { return Y(depth_ - 1); }

  void fill(const std::vector<double>& x0, const std::vector<double>& y0) {
    for (std::size_t s = 0; s < depth_; ++s) {
      x_[s] = x0;
      y_[s] = y0;
    }
    head_ = 0;
  }

  void set_slot(std::size_t slot, std::vector<double> xs, std::vector<double> ys) {
    x_[index(slot)] = std::move(xs);
    y_[index(slot)] = std::move(ys);
  }

  /// Drops the oldest pair and appends the new one.
  void push(std::vector<double> xn, std::vector<double> yn) {
    x_[head_] = std::move(xn);
    y_[head_] = std::move(yn);
    head_ = (head_ + 1) % depth_;
  }

 private:
  std::size_t index(std::size_t slot) const { return (head_ + slot) % depth_; }
  std::size_t depth_;
  std::size_t head_ = 0;
  std::vector<std::vector<double>> x_, y_;
};

namespace detail {

inline void ensure_finite_nonneg(std::span<const double> v, const char* what, std::size_t step) {
  for (double x : v)
    if (!(x >= 0.0) || !std::isfinite(x))
      throw std::runtime_error(std::string("numerical blow-up: ") + what + " at step " +
                               std::to_string(step));
}

}  // namespace detail

/// Pointwise interaction exponents from the newest and delayed entries,
/// multiplied into the newest fields. The convolution is applied by the
/// caller (so engines can be reused).
inline void growth_fields(const StateHistory& h, const ModelParams& p, std::vector<double>& gx,
                          std::vector<double>& gy) {
  const std::size_t n = h.field_size();
  const std::size_t newest = p.m;
  gx.resize(n);
  gy.resize(n);
  const auto& xn = h.X(newest);
  const auto& yn = h.Y(newest);
  for (std::size_t j = 0; j < n; ++j) {
    double sx = 1.0 - xn[j];
    double sy = 1.0 - yn[j];
    for (std::size_t i = 1; i <= p.m; ++i) {
      sx -= p.a[i - 1] * h.X(newest - i)[j];
      sy -= p.e[i - 1] * h.Y(newest - i)[j];
    }
    for (std::size_t i = 0; i <= p.m; ++i) {
      sx -= p.b[i] * h.Y(newest - i)[j];
      sy -= p.f[i] * h.X(newest - i)[j];
    }
    gx[j] = xn[j] * std::exp(p.r1 * sx);
    gy[j] = yn[j] * std::exp(p.r2 * sy);
  }
}

/// One generation: growth from the full history, then dispersal. The fields
/// are extended beyond the grid by the edge values of the growth field.
inline std::pair<std::vector<double>, std::vector<double>> step(const StateHistory& h,
                                                                const ModelParams& p,
                                                                const DiscreteKernel& k1,
                                                                const DiscreteKernel& k2,
                                                                std::size_t step_index = 0) {
  validate(p);
  if (h.depth() != p.m + 1)
    throw std::invalid_argument("step: history depth does not match m+1");
  std::vector<double> gx, gy;
  growth_fields(h, p, gx, gy);
  detail::ensure_finite_nonneg(gx, "growth field X", step_index);
  detail::ensure_finite_nonneg(gy, "growth field Y", step_index);
  auto xn = convolve(gx, k1, {gx.front(), gx.back()});
  auto yn = convolve(gy, k2, {gy.front(), gy.back()});
  detail::ensure_finite_nonneg(xn, "dispersed field X", step_index);
  detail::ensure_finite_nonneg(yn, "dispersed field Y", step_index);
  return {std::move(xn), std::move(yn)};
}

/// Rightmost threshold crossing, linearly interpolated; empty when the field
/// stays below the threshold everywhere.
inline std::optional<double> front_position(std::span<const double> field, const Grid& grid,
                                            double threshold) {
  const std::size_t n = field.size();
  std::size_t j = n;
  for (std::size_t i = n; i-- > 0;) {
    if (field[i] >= threshold) {
      j = i;
      break;
    }
  }
  if (j == n) return std::nullopt;
  if (j == n - 1) return grid.x_max;
  const double f0 = field[j], f1 = field[j + 1];
  const double frac = (f0 - threshold) / (f0 - f1);
  return grid.x(j) + frac * grid.dx();
}

struct FrontRecord {
  std::size_t n = 0;
  std::optional<double> x_front_x;  // species X
  std::optional<double> x_front_y;  // species Y
};

struct FrontTrace {
  std::vector<FrontRecord> records;
  double threshold_x = 0.0;
  double threshold_y = 0.0;
};

enum class Species { x, y };

struct SpeedEstimate {
  double slope = 0.0;
  double stderr_slope = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares of front position against step index over the last
/// window_fraction of recorded steps. Unreached records are skipped.
inline SpeedEstimate estimate_speed(const FrontTrace& trace, Species which,
                                    double window_fraction = 0.5) {
  if (trace.records.empty()) throw std::invalid_argument("estimate_speed: empty trace");
  const double n_max = static_cast<double>(trace.records.back().n);
  const double n_lo = n_max * (1.0 - window_fraction);
  std::vector<std::pair<double, double>> pts;
  for (const auto& rec : trace.records) {
    if (static_cast<double>(rec.n) < n_lo) continue;
    const auto& pos = which == Species::x ? rec.x_front_x : rec.x_front_y;
    if (pos) pts.emplace_back(static_cast<double>(rec.n), *pos);
  }
  if (pts.size() < 10)
    throw std::invalid_argument("estimate_speed: fewer than 10 usable points in window");

  double sn = 0.0, sx = 0.0;
  for (const auto& [n, x] : pts) {
    sn += n;
    sx += x;
  }
  const double mean_n = sn / static_cast<double>(pts.size());
  const double mean_x = sx / static_cast<double>(pts.size());
  double snn = 0.0, snx = 0.0;
  for (const auto& [n, x] : pts) {
    snn += (n - mean_n) * (n - mean_n);
    snx += (n - mean_n) * (x - mean_x);
  }
  const double slope = snx / snn;
  double ssr = 0.0;
  for (const auto& [n, x] : pts) {
    const double r = x - mean_x - slope * (n - mean_n);
    ssr += r * r;
  }
  SpeedEstimate est;
  est.slope = slope;
  est.points = pts.size();
  est.stderr_slope = std::sqrt(std::max(ssr, 0.0) / (static_cast<double>(pts.size()) - 2.0) / snn);
  return est;
}

/// Compact-support block initial condition.
struct InitialCondition {
  double center = 0.0;
  double half_width = 5.0;
  double amplitude_x = 0.5;
  double amplitude_y = 0.5;

  std::pair<std::vector<double>, std::vector<double>> sample(const Grid& g) const {
    std::vector<double> x0(g.n, 0.0), y0(g.n, 0.0);
    for (std::size_t i = 0; i < g.n; ++i) {
      if (std::abs(g.x(i) - center) <= half_width) {
        x0[i] = amplitude_x;
        y0[i] = amplitude_y;
      }
    }
    return {std::move(x0), std::move(y0)};
  }
};

struct Snapshot {
  std::size_t n = 0;
  std::vector<double> X, Y;
};

struct SimOptions {
  std::size_t steps = 100;
  // negative thresholds mean "auto": half the coexistence equilibrium, or
  // half the auxiliary fixed point when no equilibrium exists
  double threshold_x = -1.0;
  double threshold_y = -1.0;
  double mass_tol = 1e-10;
  std::size_t snapshot_stride = 0;  // 0: every ceil(steps/50)
  double guard_radii = 10.0;        // abort margin, in kernel radii
  bool record_snapshots = true;
};

struct SimResult {
  StateHistory history{0, 64};
  FrontTrace trace;
  std::vector<Snapshot> snapshots;
  double dx = 0.0;
  std::size_t kernel_radius = 0;
};

/// Monotone scalar lower-comparison map b(u) = min over the shrinking
/// interval [u, U+] of x e^{rate (1 - shift - slope x)}; nondecreasing, with
/// b(0) = 0 and a unique positive fixed point.
struct AuxiliaryScalarMap {
  double rate = 1.0;
  double shift = 0.0;  // depressed growth (competition at capacity, or eps)
  double slope = 1.0;  // self-limitation scale (1, or M)
  double u_cap = 2.0;  // U+
  double u_fixed = 0.0;  // the positive fixed point

  double growth(double x) const { return x * std::exp(rate * (1.0 - shift - slope * x)); }
  // the growth curve rises to x = 1/(rate*slope)... its minimum over
  // [u, u_cap] is always attained at an endpoint
  double operator()(double u) const { return std::min(growth(u), growth(u_cap)); }
  double b0() const { return std::exp(rate * (1.0 - shift)); }
};

namespace detail {

inline double solve_aux_fixed_point(const AuxiliaryScalarMap& b) {
  double lo = 1e-14, hi = b.u_cap;
  // b(u) > u near zero (b0 > 1) and b(u_cap) < u_cap
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (b(mid) > mid ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Comparison map with the competing species pinned at capacity: the growth
/// rate is depressed by A = sum_own l_own + sum_cross l_cross and the cap is
/// l_own + 1. Requires A < 1; otherwise no positive fixed point exists.
inline AuxiliaryScalarMap capacity_floor_map(const ModelParams& p, Species which) {
  validate(p);
  const CapacityBounds cap = capacity_bounds(p);
  AuxiliaryScalarMap b;
  if (which == Species::x) {
    b.rate = p.r1;
    b.shift = p.sum_a() * cap.l1 + p.sum_b() * cap.l2;
    b.u_cap = cap.l1 + 1.0;
  } else {
    b.rate = p.r2;
    b.shift = p.sum_e() * cap.l2 + p.sum_f() * cap.l1;
    b.u_cap = cap.l2 + 1.0;
  }
  b.slope = 1.0;
  if (b.shift >= 1.0)
    throw std::domain_error(
        "auxiliary map: competition at capacity exceeds growth, no positive fixed point");
  b.u_fixed = detail::solve_aux_fixed_point(b);
  return b;
}

/// Comparison map with rate depressed by eps and self-limitation scaled by M,
/// capped at `cap` (usually e^{r-1}/r).
inline AuxiliaryScalarMap depressed_floor_map(double rate, double eps, double M, double cap) {
  if (!(rate > 0) || !(M > 0) || !(cap > 0) || !(eps >= 0) || !(eps < 1))
    throw std::invalid_argument("depressed_floor_map: need rate, M, cap > 0 and eps in [0,1)");
  AuxiliaryScalarMap b;
  b.rate = rate;
  b.shift = eps;
  b.slope = M;
  b.u_cap = cap;
  b.u_fixed = detail::solve_aux_fixed_point(b);
  return b;
}

/// Iterates u_{n+1} = K * b(u_n) with edge-value boundary extension;
/// returns the final field.
inline std::vector<double> iterate_scalar_recursion(const Grid& grid, const AuxiliaryScalarMap& b,
                                                    const DiscreteKernel& kernel,
                                                    std::vector<double> u, std::size_t steps) {
  validate(grid);
  if (u.size() != grid.n)
    throw std::invalid_argument("iterate_scalar_recursion: field/grid size mismatch");
  Convolver engine(kernel, grid.n);
  std::vector<double> g(grid.n), next(grid.n);
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t j = 0; j < grid.n; ++j) g[j] = b(u[j]);
    engine.apply(g, {g.front(), g.back()}, next);
    u.swap(next);
  }
  return u;
}

/// Full simulation driver: seeds all m+1 history slots with the initial
/// condition (constant prehistory), iterates, and tracks fronts. Aborts when
/// a front comes within guard_radii kernel radii of the right boundary.
inline SimResult simulate(const Grid& grid, const ModelParams& p, const KernelSpec& spec1,
                          const KernelSpec& spec2, const InitialCondition& ic,
                          const SimOptions& opts) {
  validate(grid);
  validate(p);
  const DiscreteKernel k1 = discretize(spec1, grid.dx(), opts.mass_tol);
  const DiscreteKernel k2 = discretize(spec2, grid.dx(), opts.mass_tol);

  SimResult result;
  result.dx = grid.dx();
  result.kernel_radius = static_cast<std::size_t>(std::max(k1.radius, k2.radius));

  double thr_x = opts.threshold_x, thr_y = opts.threshold_y;
  if (thr_x < 0.0 || thr_y < 0.0) {
    double def_x, def_y;
    try {
      const Equilibrium eq = coexistence_equilibrium(p);
      def_x = 0.5 * eq.k1;
      def_y = 0.5 * eq.k2;
    } catch (const NoCoexistenceError&) {
      def_x = 0.5 * capacity_floor_map(p, Species::x).u_fixed;
      def_y = 0.5 * capacity_floor_map(p, Species::y).u_fixed;
    }
    if (thr_x < 0.0) thr_x = def_x;
    if (thr_y < 0.0) thr_y = def_y;
  }
  result.trace.threshold_x = thr_x;
  result.trace.threshold_y = thr_y;

  StateHistory hist(p.m, grid.n);
  auto [x0, y0] = ic.sample(grid);
  hist.fill(x0, y0);

  const double guard_x = grid.x_max - opts.guard_radii * result.kernel_radius * grid.dx();
  const std::size_t stride =
      opts.snapshot_stride > 0 ? opts.snapshot_stride
                               : std::max<std::size_t>(1, (opts.steps + 49) / 50);

  Convolver engine1(k1, grid.n), engine2(k2, grid.n);
  std::vector<double> gx, gy, xn(grid.n), yn(grid.n);

  auto record = [&](std::size_t n, const std::vector<double>& X, const std::vector<double>& Y) {
    FrontRecord rec;
    rec.n = n;
    rec.x_front_x = front_position(X, grid, thr_x);
    rec.x_front_y = front_position(Y, grid, thr_y);
    result.trace.records.push_back(rec);
    for (const auto& fx : {rec.x_front_x, rec.x_front_y})
      if (fx && *fx > guard_x)
        throw std::runtime_error("domain guard: front at x=" + std::to_string(*fx) +
                                 " within " + std::to_string(opts.guard_radii) +
                                 " kernel radii of the right boundary (step " +
                                 std::to_string(n) + ")");
  };

  record(0, hist.newest_X(), hist.newest_Y());
  if (opts.record_snapshots) result.snapshots.push_back({0, hist.newest_X(), hist.newest_Y()});

  for (std::size_t n = 1; n <= opts.steps; ++n) {
    growth_fields(hist, p, gx, gy);
    detail::ensure_finite_nonneg(gx, "growth field X", n);
    detail::ensure_finite_nonneg(gy, "growth field Y", n);
    engine1.apply(gx, {gx.front(), gx.back()}, xn);
    engine2.apply(gy, {gy.front(), gy.back()}, yn);
    detail::ensure_finite_nonneg(xn, "dispersed field X", n);
    detail::ensure_finite_nonneg(yn, "dispersed field Y", n);
    hist.push(xn, yn);
    record(n, hist.newest_X(), hist.newest_Y());
    if (opts.record_snapshots && (n % stride == 0 || n == opts.steps))
      result.snapshots.push_back({n, hist.newest_X(), hist.newest_Y()});
  }

  result.history = std::move(hist);
  return result;
}

}  // namespace coinvade
