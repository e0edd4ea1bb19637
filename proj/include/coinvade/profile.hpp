#pragma once

// The wave operator of the profile recursion, fixed-point iteration inside
// the profile set, residual and limit diagnostics, the decay norm, and the
// pointwise verification of the upper/lower-solution inequality chains.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "coinvade/kernel.hpp"
#include "coinvade/model.hpp"
#include "coinvade/wavespeed.hpp"

namespace coinvade {

/// Wave-coordinate profiles phi, psi on a uniform t grid, moving at speed c.
struct Profile {
  std::vector<double> t;
  std::vector<double> phi, psi;
  double c = 0.0;

  double dt() const { return t.size() > 1 ? (t.back() - t.front()) / (t.size() - 1.0) : 0.0; }
};

inline Profile make_profile_grid(double t_min, double t_max, double dt, double c) {
  if (!(dt > 0) || !(t_max > t_min))
    throw std::invalid_argument("profile grid: need dt > 0 and t_max > t_min");
  Profile pr;
  pr.c = c;
  const std::size_t n = static_cast<std::size_t>(std::llround((t_max - t_min) / dt)) + 1;
  pr.t.resize(n);
  for (std::size_t i = 0; i < n; ++i) pr.t[i] = t_min + static_cast<double>(i) * dt;
  pr.phi.assign(n, 0.0);
  pr.psi.assign(n, 0.0);
  return pr;
}

namespace detail {

// linear interpolation in index space with constant extensions
inline double sample_linear(std::span<const double> f, double idx, double left, double right) {
  const long n = static_cast<long>(f.size());
  const double p = std::floor(idx);
  const long p0 = static_cast<long>(p);
  const double frac = idx - p;
  auto value = [&](long q) -> double {
    if (q < 0) return left;
    if (q >= n) return right;
    return f[static_cast<std::size_t>(q)];
  };
  return value(p0) + frac * (value(p0 + 1) - value(p0));
}

}  // namespace detail

struct WaveOperatorOptions {
  enum class LeftExtension { zero, first_value };
  /// How fields continue past the left end of the grid. A traveling front
  /// vanishes there, so zero is the default; first_value is for diagnostics
  /// on profiles that do not decay (e.g. constants).
  LeftExtension left = LeftExtension::zero;
};

/// Applies both components of the wave operator for a fixed grid/kernel/speed
/// combination. Delayed evaluations and the final shift by c use linear
/// interpolation; the right end is continued by the last grid value.
class WaveOperator {
 public:
  WaveOperator(const ModelParams& p, const DiscreteKernel& k1, const DiscreteKernel& k2, double c,
               std::size_t n, double dt, WaveOperatorOptions opts = {})
      : p_(p), c_(c), n_(n), dt_(dt), opts_(opts), engine1_(k1, n), engine2_(k2, n) {
    validate(p_);
    if (!(c > 0)) throw std::invalid_argument("wave operator: speed must be > 0");
    if (std::abs(k1.dx - dt) > 1e-12 * dt || std::abs(k2.dx - dt) > 1e-12 * dt)
      throw std::invalid_argument("wave operator: kernel dx must match the grid spacing");
    const double radius = std::max(k1.radius, k2.radius) * dt;
    const double span = (static_cast<double>(n) - 1.0) * dt;
    if (span < 2.0 * (radius + static_cast<double>(p.m + 1) * c))
      throw std::invalid_argument("wave operator: grid too short for kernel radius plus shift");
  }

  std::size_t size() const { return n_; }

  void apply(std::span<const double> phi, std::span<const double> psi, std::span<double> out_phi,
             std::span<double> out_psi) const {
    if (phi.size() != n_ || psi.size() != n_ || out_phi.size() != n_ || out_psi.size() != n_)
      throw std::invalid_argument("wave operator: field size mismatch");
    const bool zero_left = opts_.left == WaveOperatorOptions::LeftExtension::zero;
    const double lphi = zero_left ? 0.0 : phi.front();
    const double lpsi = zero_left ? 0.0 : psi.front();
    const double shift = c_ / dt_;

    std::vector<double> ix(n_), iy(n_);
    for (std::size_t j = 0; j < n_; ++j) {
      const double jd = static_cast<double>(j);
      double sx = 1.0 - phi[j] - p_.b[0] * psi[j];
      double sy = 1.0 - psi[j] - p_.f[0] * phi[j];
      for (std::size_t i = 1; i <= p_.m; ++i) {
        const double idx = jd - shift * static_cast<double>(i);
        const double phi_d = detail::sample_linear(phi, idx, lphi, phi.back());
        const double psi_d = detail::sample_linear(psi, idx, lpsi, psi.back());
        sx -= p_.a[i - 1] * phi_d + p_.b[i] * psi_d;
        sy -= p_.e[i - 1] * psi_d + p_.f[i] * phi_d;
      }
      ix[j] = phi[j] * std::exp(p_.r1 * sx);
      iy[j] = psi[j] * std::exp(p_.r2 * sy);
    }

    std::vector<double> hx = engine1_.apply(ix, {zero_left ? 0.0 : ix.front(), ix.back()});
    std::vector<double> hy = engine2_.apply(iy, {zero_left ? 0.0 : iy.front(), iy.back()});
    for (std::size_t j = 0; j < n_; ++j) {
      const double idx = static_cast<double>(j) - shift;
      out_phi[j] = detail::sample_linear(hx, idx, zero_left ? 0.0 : hx.front(), hx.back());
      out_psi[j] = detail::sample_linear(hy, idx, zero_left ? 0.0 : hy.front(), hy.back());
    }
  }

 private:
  ModelParams p_;
  double c_;
  std::size_t n_;
  double dt_;
  WaveOperatorOptions opts_;
  Convolver engine1_, engine2_;
};

inline Profile wave_operator(const Profile& pr, const ModelParams& p, const DiscreteKernel& k1,
                             const DiscreteKernel& k2, double c, WaveOperatorOptions opts = {}) {
  WaveOperator op(p, k1, k2, c, pr.t.size(), pr.dt(), opts);
  Profile out = pr;
  out.c = c;
  op.apply(pr.phi, pr.psi, out.phi, out.psi);
  return out;
}

/// Sup-norm fixed-point defect over the interior (one kernel-radius margin
/// excluded at each end).
inline double residual(const Profile& pr, const ModelParams& p, const DiscreteKernel& k1,
                       const DiscreteKernel& k2, double c, WaveOperatorOptions opts = {}) {
  const Profile image = wave_operator(pr, p, k1, k2, c, opts);
  const std::size_t margin = static_cast<std::size_t>(std::max(k1.radius, k2.radius));
  if (pr.t.size() <= 2 * margin) throw std::invalid_argument("residual: grid shorter than margin");
  double worst = 0.0;
  for (std::size_t j = margin; j + margin < pr.t.size(); ++j) {
    worst = std::max(worst, std::abs(image.phi[j] - pr.phi[j]));
    worst = std::max(worst, std::abs(image.psi[j] - pr.psi[j]));
  }
  return worst;
}

/// sup_t max(|phi|, |psi|) e^{-mu |t|}. For convergence diagnostics mu must
/// stay below min(lambda_1, lambda_2).
inline double decay_norm(std::span<const double> t, std::span<const double> phi,
                         std::span<const double> psi, double mu) {
  if (!(mu > 0)) throw std::invalid_argument("decay_norm: mu must be > 0");
  if (t.size() != phi.size() || t.size() != psi.size())
    throw std::invalid_argument("decay_norm: size mismatch");
  double worst = 0.0;
  for (std::size_t j = 0; j < t.size(); ++j) {
    const double v = std::max(std::abs(phi[j]), std::abs(psi[j])) * std::exp(-mu * std::abs(t[j]));
    worst = std::max(worst, v);
  }
  return worst;
}

inline double decay_norm(const Profile& pr, double mu) {
  return decay_norm(pr.t, pr.phi, pr.psi, mu);
}

struct GammaMembershipReport {
  std::size_t phi_below = 0, phi_above = 0;
  std::size_t psi_below = 0, psi_above = 0;
  double worst_excess = 0.0;
  std::size_t total() const { return phi_below + phi_above + psi_below + psi_above; }
};

/// Counts grid points escaping [phi_lower, phi_upper] x [psi_lower, psi_upper]
/// beyond the tolerance.
inline GammaMembershipReport check_gamma_membership(const Profile& pr, const BoundPair& bp,
                                                    double tol = 1e-9) {
  GammaMembershipReport rep;
  for (std::size_t j = 0; j < pr.t.size(); ++j) {
    const double t = pr.t[j];
    auto tally = [&](double v, double lo, double hi, std::size_t& below, std::size_t& above) {
      if (v < lo - tol) {
        ++below;
        rep.worst_excess = std::max(rep.worst_excess, lo - v);
      }
      if (v > hi + tol) {
        ++above;
        rep.worst_excess = std::max(rep.worst_excess, v - hi);
      }
    };
    tally(pr.phi[j], bp.phi_lower(t), bp.phi_upper(t), rep.phi_below, rep.phi_above);
    tally(pr.psi[j], bp.psi_lower(t), bp.psi_upper(t), rep.psi_below, rep.psi_above);
  }
  return rep;
}

struct BoundsCheckReport {
  bool pass = false;
  std::size_t upper_violations = 0;
  std::size_t lower_violations = 0;
  double worst_upper_excess = 0.0;  // amount P exceeds the upper chain
  double worst_lower_deficit = 0.0;
  double worst_upper_t = 0.0;
  double worst_lower_t = 0.0;
  double q_err = 0.0;
  double worst_quadrature_rel_err = 0.0;
  bool quadrature_ok = false;
};

/// Verifies the two inequality chains that make [lower, upper] invariant.
///
/// Upper: with the extreme pair (phi_upper, psi_lower), the operator image
/// must stay below the single-species integral of phi_upper e^{r(1-phi_upper)}
/// which in turn stays below phi_upper (and symmetrically for psi).
///
/// Lower: the displayed four-term expression
///   e^{l t} - rho D(eta l, c) e^{eta l t} - L(1+sum_own) D(2l, c) e^{2l t}
///   - L sum_cross D(l1+l2, c) e^{(l1+l2) t}
/// must dominate e^{l t} - rho e^{eta l t} for t < 0, and each D-term is
/// cross-checked against discrete quadrature.
inline BoundsCheckReport verify_bounds(const BoundPair& bp, const ModelParams& p,
                                       const KernelSpec& spec1, const KernelSpec& spec2, double c,
                                       std::span<const double> tgrid, double L1, double L2) {
  validate(p);
  if (tgrid.size() < 8) throw std::invalid_argument("verify_bounds: t grid too short");
  const std::size_t n = tgrid.size();
  const double dt = (tgrid.back() - tgrid.front()) / (static_cast<double>(n) - 1.0);
  for (std::size_t j = 1; j < n; ++j)
    if (std::abs(tgrid[j] - tgrid[j - 1] - dt) > 1e-9 * dt)
      throw std::invalid_argument("verify_bounds: t grid must be uniform");

  BoundsCheckReport rep;
  rep.q_err = 10.0 * dt * dt;

  const DiscreteKernel k1 = discretize(spec1, dt, 1e-12);
  const DiscreteKernel k2 = discretize(spec2, dt, 1e-12);
  WaveOperator op(p, k1, k2, c, n, dt);

  // ---- upper chain on the extreme pair (phi_upper, psi_lower) and its mirror
  std::vector<double> phi_up(n), psi_up(n), phi_lo(n), psi_lo(n);
  for (std::size_t j = 0; j < n; ++j) {
    phi_up[j] = bp.phi_upper(tgrid[j]);
    psi_up[j] = bp.psi_upper(tgrid[j]);
    phi_lo[j] = bp.phi_lower(tgrid[j]);
    psi_lo[j] = bp.psi_lower(tgrid[j]);
  }
  std::vector<double> p1(n), p2(n), scratch(n);
  op.apply(phi_up, psi_lo, p1, scratch);  // P1 at its pointwise maximum over the set
  op.apply(phi_lo, psi_up, scratch, p2);

  // single-species integral bound, the middle link of the upper chain
  auto single_species = [&](std::span<const double> up, const DiscreteKernel& k, double r) {
    std::vector<double> integrand(n), out(n);
    for (std::size_t j = 0; j < n; ++j) integrand[j] = up[j] * std::exp(r * (1.0 - up[j]));
    Convolver engine(k, n);
    std::vector<double> h = engine.apply(integrand, {0.0, integrand.back()});
    const double shift = c / dt;
    for (std::size_t j = 0; j < n; ++j)
      out[j] = detail::sample_linear(h, static_cast<double>(j) - shift, 0.0, h.back());
    return out;
  };
  const std::vector<double> i1 = single_species(phi_up, k1, p.r1);
  const std::vector<double> i2 = single_species(psi_up, k2, p.r2);

  const std::size_t margin = static_cast<std::size_t>(std::max(k1.radius, k2.radius));
  for (std::size_t j = margin; j + margin < n; ++j) {
    auto upper_check = [&](double pv, double iv, double upv) {
      const double excess = std::max(pv - iv, iv - upv);
      if (excess > rep.q_err) {
        ++rep.upper_violations;
        if (excess > rep.worst_upper_excess) {
          rep.worst_upper_excess = excess;
          rep.worst_upper_t = tgrid[j];
        }
      }
    };
    upper_check(p1[j], i1[j], phi_up[j]);
    upper_check(p2[j], i2[j], psi_up[j]);
  }

  // ---- lower chain, species-wise, in closed form via the characteristic
  // function, on the negative-t part of the grid
  auto lower_chain = [&](double r, double lam, double L, double sum_own, double sum_cross,
                         const KernelSpec& spec) {
    const double d_eta = delta(bp.eta * lam, c, r, spec);
    const double d_2l = delta(2.0 * lam, c, r, spec);
    const double d_cross = delta(bp.lambda1 + bp.lambda2, c, r, spec);
    for (std::size_t j = 0; j + margin < n; ++j) {
      const double t = tgrid[j];
      if (!(t < 0.0)) break;
      const double chain = std::exp(lam * t) - bp.rho * d_eta * std::exp(bp.eta * lam * t) -
                           L * (1.0 + sum_own) * d_2l * std::exp(2.0 * lam * t) -
                           L * sum_cross * d_cross * std::exp((bp.lambda1 + bp.lambda2) * t);
      const double target = std::exp(lam * t) - bp.rho * std::exp(bp.eta * lam * t);
      const double deficit = target - chain;
      if (deficit > rep.q_err) {
        ++rep.lower_violations;
        if (deficit > rep.worst_lower_deficit) {
          rep.worst_lower_deficit = deficit;
          rep.worst_lower_t = t;
        }
      }
    }
  };
  lower_chain(p.r1, bp.lambda1, L1, p.sum_a(), p.sum_b(), spec1);
  lower_chain(p.r2, bp.lambda2, L2, p.sum_e(), p.sum_f(), spec2);

  // ---- term-by-term quadrature cross-check of every characteristic factor
  auto quad_check = [&](double mu, double r, const KernelSpec& spec, const DiscreteKernel& k) {
    const double closed = std::exp(r) * spec.mgf(mu);
    const double discrete = std::exp(r) * k.mgf(mu);
    rep.worst_quadrature_rel_err =
        std::max(rep.worst_quadrature_rel_err, std::abs(discrete - closed) / closed);
  };
  for (const double mu : {bp.eta * bp.lambda1, 2.0 * bp.lambda1, bp.lambda1 + bp.lambda2})
    quad_check(mu, p.r1, spec1, k1);
  for (const double mu : {bp.eta * bp.lambda2, 2.0 * bp.lambda2, bp.lambda1 + bp.lambda2})
    quad_check(mu, p.r2, spec2, k2);
  rep.quadrature_ok = rep.worst_quadrature_rel_err <= 1e-8;

  rep.pass = rep.upper_violations == 0 && rep.lower_violations == 0 && rep.quadrature_ok;
  return rep;
}

enum class RightLimitMode { equilibrium, positivity };

struct LimitReport {
  double left_tail_max = 0.0;
  bool left_ok = false;
  double right_gap_phi = std::numeric_limits<double>::quiet_NaN();
  double right_gap_psi = std::numeric_limits<double>::quiet_NaN();
  bool right_ok = false;
  double right_min_phi = 0.0;
  double right_min_psi = 0.0;
  bool pass = false;
};

/// Left limit: the leftmost 10% of the grid must stay below tol. Right limit:
/// either the gap to the coexistence equilibrium (relative tolerance), or a
/// positivity-only proxy (min over the rightmost 10% strictly positive) when
/// only boundedness away from zero is guaranteed.
inline LimitReport check_limits(const Profile& pr, const std::optional<Equilibrium>& eq,
                                const CapacityBounds& cap, RightLimitMode mode,
                                double left_tol = 1e-4, double right_rel_tol = 0.01) {
  (void)cap;
  LimitReport rep;
  const std::size_t n = pr.t.size();
  const std::size_t tail = std::max<std::size_t>(1, n / 10);
  for (std::size_t j = 0; j < tail; ++j)
    rep.left_tail_max = std::max({rep.left_tail_max, std::abs(pr.phi[j]), std::abs(pr.psi[j])});
  rep.left_ok = rep.left_tail_max < left_tol;

  rep.right_min_phi = std::numeric_limits<double>::infinity();
  rep.right_min_psi = std::numeric_limits<double>::infinity();
  for (std::size_t j = n - tail; j < n; ++j) {
    rep.right_min_phi = std::min(rep.right_min_phi, pr.phi[j]);
    rep.right_min_psi = std::min(rep.right_min_psi, pr.psi[j]);
  }

  if (mode == RightLimitMode::equilibrium) {
    if (!eq) throw std::invalid_argument("check_limits: equilibrium mode needs an equilibrium");
    rep.right_gap_phi = std::abs(pr.phi.back() - eq->k1);
    rep.right_gap_psi = std::abs(pr.psi.back() - eq->k2);
    rep.right_ok =
        rep.right_gap_phi <= right_rel_tol * eq->k1 && rep.right_gap_psi <= right_rel_tol * eq->k2;
  } else {
    rep.right_ok = rep.right_min_phi > 0.0 && rep.right_min_psi > 0.0;
  }
  rep.pass = rep.left_ok && rep.right_ok;
  return rep;
}

struct ProfileGridOptions {
  double t_min = -60.0;
  double t_max = 20.0;
  double dt = 0.05;
  double mass_tol = 1e-10;
};

struct ProfileIterOptions {
  double tol = 1e-10;
  std::size_t max_iters = 10000;
  double theta = 1.0;          // damping; halved when the iteration oscillates
  bool clamp_to_bounds = true;
};

struct ProfileSolveReport {
  bool converged = false;
  bool subcritical = false;
  std::size_t iterations = 0;
  double final_update = 0.0;
  double final_residual = 0.0;
  double left_tail_max = 0.0;
  double right_gap_phi = std::numeric_limits<double>::quiet_NaN();
  double right_gap_psi = std::numeric_limits<double>::quiet_NaN();
  std::size_t gamma_violations = 0;
  bool clamp_active_at_solution = false;
  double theta_final = 1.0;
  double c = 0.0, c_star = 0.0;
};

/// Fixed-point solve of the wave operator, seeded at the upper solution and
/// damped-iterated with optional clamping into [lower, upper]. Subcritical
/// speeds are permitted for the nonexistence probe but flagged; they are
/// seeded from the clamped exponential at the quotient minimizer instead
/// (no bound pair exists below c*) and never clamped.
inline std::pair<Profile, ProfileSolveReport> solve_profile(double c, const ModelParams& p,
                                                            const KernelSpec& spec1,
                                                            const KernelSpec& spec2,
                                                            const ProfileGridOptions& gopts = {},
                                                            const ProfileIterOptions& iopts = {}) {
  validate(p);
  const DiscreteKernel k1 = discretize(spec1, gopts.dt, gopts.mass_tol);
  const DiscreteKernel k2 = discretize(spec2, gopts.dt, gopts.mass_tol);
  Profile pr = make_profile_grid(gopts.t_min, gopts.t_max, gopts.dt, c);
  const std::size_t n = pr.t.size();

  ProfileSolveReport rep;
  rep.c = c;
  const MinimalSpeed ms = minimal_speed(p, spec1, spec2);
  rep.c_star = ms.c_star;
  rep.subcritical = !(c > ms.c_star + 1e-9);

  const CapacityBounds cap = capacity_bounds(p);
  std::optional<WaveAnalysis> analysis;
  std::optional<BoundPair> bounds;
  if (!rep.subcritical) {
    analysis = analyze_wave(p, spec1, spec2, c);
    bounds = build_bound_pair(*analysis, cap);
    for (std::size_t j = 0; j < n; ++j) {
      pr.phi[j] = bounds->phi_upper(pr.t[j]);
      pr.psi[j] = bounds->psi_upper(pr.t[j]);
    }
  } else {
    const double lh1 = critical_speed(p.r1, spec1).lambda_hat;
    const double lh2 = critical_speed(p.r2, spec2).lambda_hat;
    for (std::size_t j = 0; j < n; ++j) {
      pr.phi[j] = std::min(std::exp(lh1 * pr.t[j]), cap.l1);
      pr.psi[j] = std::min(std::exp(lh2 * pr.t[j]), cap.l2);
    }
  }
  const bool clamping = iopts.clamp_to_bounds && bounds.has_value();

  WaveOperator op(p, k1, k2, c, n, gopts.dt);
  std::vector<double> im_phi(n), im_psi(n);
  std::vector<double> upd_phi(n, 0.0), upd_psi(n, 0.0), prev_upd_phi(n, 0.0),
      prev_upd_psi(n, 0.0);
  double theta = iopts.theta;

  for (std::size_t it = 1; it <= iopts.max_iters; ++it) {
    op.apply(pr.phi, pr.psi, im_phi, im_psi);
    bool clamp_hit = false;
    double sup_update = 0.0;
    double dot = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double nphi = (1.0 - theta) * pr.phi[j] + theta * im_phi[j];
      double npsi = (1.0 - theta) * pr.psi[j] + theta * im_psi[j];
      if (clamping) {
        const double t = pr.t[j];
        const double phi_lo = bounds->phi_lower(t), phi_hi = bounds->phi_upper(t);
        const double psi_lo = bounds->psi_lower(t), psi_hi = bounds->psi_upper(t);
        const double cphi = std::clamp(nphi, phi_lo, phi_hi);
        const double cpsi = std::clamp(npsi, psi_lo, psi_hi);
        if (cphi != nphi || cpsi != npsi) clamp_hit = true;
        nphi = cphi;
        npsi = cpsi;
      }
      upd_phi[j] = nphi - pr.phi[j];
      upd_psi[j] = npsi - pr.psi[j];
      dot += upd_phi[j] * prev_upd_phi[j] + upd_psi[j] * prev_upd_psi[j];
      sup_update = std::max({sup_update, std::abs(upd_phi[j]), std::abs(upd_psi[j])});
      pr.phi[j] = nphi;
      pr.psi[j] = npsi;
    }
    rep.iterations = it;
    rep.final_update = sup_update;
    rep.clamp_active_at_solution = clamp_hit;
    if (sup_update < iopts.tol) {
      rep.converged = true;
      break;
    }
    if (it > 1 && dot < 0.0) theta = std::max(0.5 * theta, 1.0 / 64.0);
    prev_upd_phi.swap(upd_phi);
    prev_upd_psi.swap(upd_psi);
  }
  rep.theta_final = theta;

  // diagnostics on the returned iterate; the residual is always unclamped
  rep.final_residual = residual(pr, p, k1, k2, c);
  const std::size_t tail = std::max<std::size_t>(1, n / 10);
  for (std::size_t j = 0; j < tail; ++j)
    rep.left_tail_max = std::max({rep.left_tail_max, pr.phi[j], pr.psi[j]});
  try {
    const Equilibrium eq = coexistence_equilibrium(p);
    rep.right_gap_phi = std::abs(pr.phi.back() - eq.k1);
    rep.right_gap_psi = std::abs(pr.psi.back() - eq.k2);
  } catch (const NoCoexistenceError&) {
    // gaps stay NaN; the positivity proxy in check_limits applies instead
  }
  if (bounds) rep.gamma_violations = check_gamma_membership(pr, *bounds).total();
  return {std::move(pr), rep};
}

}  // namespace coinvade
