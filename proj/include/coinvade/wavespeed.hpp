#pragma once

// Characteristic functions, minimal wave speed, decay exponents, and the
// constructive constants (eta, gamma window, L, rho) behind the explicit
// upper/lower wave profiles, plus spreading speeds of scalar recursions.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "coinvade/kernel.hpp"
#include "coinvade/model.hpp"

namespace coinvade {

/// Delta(lambda, c) = e^r * MGF(lambda) * e^{-lambda c}; its unit level set
/// determines the decay exponents of the wave tails.
inline double delta(double lambda, double c, double r, const KernelSpec& kernel) {
  return std::exp(r + std::log(kernel.mgf(lambda)) - lambda * c);
}

inline double log_delta(double lambda, double c, double r, const KernelSpec& kernel) {
  return r + std::log(kernel.mgf(lambda)) - lambda * c;
}

namespace detail {

// Golden-section minimum of a unimodal f on [lo, hi], to interval width tol.
template <class F>
double golden_section_min(F&& f, double lo, double hi, double tol) {
  constexpr double inv_phi = 0.6180339887498948482;
  double a = lo, b = hi;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace detail

struct CriticalSpeed {
  double c_star = 0.0;
  double lambda_hat = 0.0;     // argmin of the speed quotient
  bool boundary_minimum = false;  // minimizer pinned at the MGF domain edge
};

/// Minimizes q(lambda) = (r + ln MGF(lambda)) / lambda over lambda > 0 by
/// geometric bracketing followed by golden-section search. `rate` is the
/// linearized growth exponent (r_i, or ln b_0 for a scalar recursion).
inline CriticalSpeed critical_speed(double rate, const KernelSpec& kernel) {
  if (!(rate > 0.0)) throw std::invalid_argument("critical_speed: rate must be > 0");
  const double cap = kernel.mgf_domain_bound() * (1.0 - 1e-9);
  auto q = [&](double lam) { return (rate + std::log(kernel.mgf(lam))) / lam; };

  double lam = std::min(1e-3, 0.5 * cap);
  bool hit_cap = false;
  double lo, hi;
  if (std::min(2.0 * lam, cap) >= cap || q(std::min(2.0 * lam, cap)) >= q(lam)) {
    // minimum at or below the starting point: expand downward
    double prev = lam;
    while (q(0.5 * prev) < q(prev)) {
      prev *= 0.5;
      if (prev < 1e-15) break;
    }
    lo = 0.5 * prev;
    hi = std::min(2.0 * lam, cap);
  } else {
    // expand upward until the quotient starts rising
    double prev2 = lam, prev = std::min(2.0 * lam, cap);
    for (;;) {
      const double next = std::min(2.0 * prev, cap);
      if (next == prev) {  // pinned at the domain edge
        hit_cap = true;
        break;
      }
      if (next > 1e12) {
        hit_cap = true;
        prev = next;
        break;
      }
      if (q(next) >= q(prev)) {
        prev2 = prev;  // bracket found: min inside (prev2/2, next)
        prev = next;
        break;
      }
      prev2 = prev;
      prev = next;
    }
    lo = 0.5 * prev2;
    hi = prev;
  }

  const double argmin = detail::golden_section_min(q, lo, hi, 1e-10);
  CriticalSpeed out;
  out.lambda_hat = argmin;
  out.c_star = q(argmin);
  out.boundary_minimum = hit_cap && (hi - argmin) < 1e-6 * hi;
  return out;
}

struct MinimalSpeed {
  double c1_star = 0.0;
  double c2_star = 0.0;
  double c_star = 0.0;
};

inline MinimalSpeed minimal_speed(const ModelParams& p, const KernelSpec& k1,
                                  const KernelSpec& k2) {
  validate(p);
  const double c1 = critical_speed(p.r1, k1).c_star;
  const double c2 = critical_speed(p.r2, k2).c_star;
  return {c1, c2, std::max(c1, c2)};
}

/// Smallest positive root of Delta(., c) = 1 for c > c*, by bisection on
/// (0, lambda_hat]. Also spot-checks that Delta > 1 left of the root.
inline double lambda_of_c(double c, double rate, const KernelSpec& kernel) {
  const CriticalSpeed cs = critical_speed(rate, kernel);
  if (!(c > cs.c_star + 1e-9))
    throw std::domain_error("lambda_of_c: subcritical speed c = " + std::to_string(c) +
                            " (c* = " + std::to_string(cs.c_star) + ")");
  auto f = [&](double lam) { return log_delta(lam, c, rate, kernel); };
  double lo = 1e-12, hi = cs.lambda_hat;
  // f(lo) ~ rate > 0 and f(lambda_hat) = lambda_hat (c* - c) < 0
  while (hi - lo > 1e-12 * hi) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  const double root = 0.5 * (lo + hi);
  for (int i = 1; i <= 64; ++i) {
    const double lam = root * static_cast<double>(i) / 65.0;
    if (lam > 0.0 && f(lam) <= 0.0)
      throw std::logic_error("lambda_of_c: Delta <= 1 left of the smallest root");
  }
  return root;
}

/// Upper endpoint of the interval (lambda(c), .) on which Delta < 1: the
/// larger unit-level root, or +inf when Delta stays below one for all larger
/// lambda (possible for compactly supported kernels).
inline double delta_upper_root(double c, double rate, const KernelSpec& kernel,
                               double lambda_small) {
  auto f = [&](double lam) { return log_delta(lam, c, rate, kernel); };
  const double cap = kernel.mgf_domain_bound() * (1.0 - 1e-9);
  double hi = std::min(2.0 * lambda_small, cap);
  while (f(hi) < 0.0) {
    if (hi >= cap) return cap;  // pole pushes the root beyond double resolution
    const double next = std::min(2.0 * hi, cap);
    if (next == hi || hi > 1e9) return std::numeric_limits<double>::infinity();
    hi = next;
  }
  double lo = lambda_small;
  while (hi - lo > 1e-12 * hi) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Exponent eta in (1,2) with eta*lambda_i < lambda_1 + lambda_2 and
/// Delta_i(eta*lambda_i, c) < 1 for both species; returns the midpoint of the
/// feasible interval.
inline double select_eta(double lambda1, double lambda2, double c, double r1, double r2,
                         const KernelSpec& k1, const KernelSpec& k2) {
  const double sum = lambda1 + lambda2;
  double ub = std::min({2.0, sum / lambda1, sum / lambda2});
  const double up1 = delta_upper_root(c, r1, k1, lambda1);
  const double up2 = delta_upper_root(c, r2, k2, lambda2);
  ub = std::min({ub, up1 / lambda1, up2 / lambda2});
  if (!(ub > 1.0 + 1e-12))
    throw std::logic_error("select_eta: empty feasible interval (impossible for c > c*)");
  const double eta = 1.0 + 0.5 * (ub - 1.0);
  if (!(eta * lambda1 < sum) || !(eta * lambda2 < sum) ||
      !(delta(eta * lambda1, c, r1, k1) < 1.0) || !(delta(eta * lambda2, c, r2, k2) < 1.0))
    throw std::logic_error("select_eta: post-check failed");
  return eta;
}

/// The quadratic-remainder constant: L = r satisfies
/// |u e^{r(1-u-v-w)} - u e^r| <= L e^r (u^2 + uv + uw), which is verified on a
/// 30^3 grid over [0, l_own] x [0, (1+sum_own) l_own] x [0, sum_cross l_cross].
inline double remainder_constant(double r, double sum_own, double sum_cross, double l_own,
                                 double l_cross) {
  const double L = r;
  const double er = std::exp(r);
  const double u_hi = l_own;
  const double v_hi = (1.0 + sum_own) * l_own;
  const double w_hi = sum_cross * l_cross;
  const int n = 30;
  for (int iu = 0; iu < n; ++iu)
    for (int iv = 0; iv < n; ++iv)
      for (int iw = 0; iw < n; ++iw) {
        const double u = u_hi * iu / (n - 1);
        const double v = v_hi * iv / (n - 1);
        const double w = w_hi * iw / (n - 1);
        const double lhs = std::abs(u * std::exp(r * (1.0 - u - v - w)) - u * er);
        const double rhs = L * er * (u * u + u * v + u * w);
        if (lhs > rhs + 1e-12 * std::max(1.0, rhs))
          throw std::logic_error("remainder_constant: bound violated at u=" + std::to_string(u));
      }
  return L;
}

/// Spreading speed c_0 = inf_{lambda>0} ln(b0 MGF(lambda))/lambda of the
/// linearized scalar recursion with slope b0 > 1 at zero.
inline double scalar_spreading_speed(double b0, const KernelSpec& kernel) {
  if (!(b0 > 1.0)) throw std::invalid_argument("scalar_spreading_speed: requires b0 > 1");
  return critical_speed(std::log(b0), kernel).c_star;
}

/// Half-open interval (lo, hi] on which the characteristic function stays
/// below one.
struct GammaWindow {
  double lo = 0.0;
  double hi = 0.0;
};

/// Everything tied to a fixed supercritical speed c > c*.
struct WaveAnalysis {
  double c1_star = 0.0, c2_star = 0.0, c_star = 0.0;
  double lambda_hat1 = 0.0, lambda_hat2 = 0.0;
  bool boundary_min1 = false, boundary_min2 = false;
  double c = 0.0;
  double lambda1 = 0.0, lambda2 = 0.0;
  GammaWindow gamma_window1, gamma_window2;
  double eta = 0.0;
  double L1 = 0.0, L2 = 0.0;
  double rho = 0.0;
};

/// rho = 1 + max over the species of
///   [L (1+sum_own) Delta(2 lambda_own, c) + L sum_cross Delta(lambda1+lambda2, c)]
///   / (1 - Delta(eta lambda_own, c)).
inline double rho_bound(const WaveAnalysis& wa, const ModelParams& p, const KernelSpec& k1,
                        const KernelSpec& k2) {
  auto species = [&](double r, double L, double sum_own, double sum_cross, double lam,
                     const KernelSpec& k) {
    const double denom = 1.0 - delta(wa.eta * lam, wa.c, r, k);
    if (!(denom > 0.0))
      throw std::logic_error("rho_bound: nonpositive denominator (eta selection broken)");
    const double num = L * (1.0 + sum_own) * delta(2.0 * lam, wa.c, r, k) +
                       L * sum_cross * delta(wa.lambda1 + wa.lambda2, wa.c, r, k);
    return num / denom;
  };
  const double r1 = species(p.r1, wa.L1, p.sum_a(), p.sum_b(), wa.lambda1, k1);
  const double r2 = species(p.r2, wa.L2, p.sum_e(), p.sum_f(), wa.lambda2, k2);
  return 1.0 + std::max(r1, r2);
}

/// Full analysis at speed c > c*: decay exponents, gamma windows, eta, the
/// remainder constants, and the lower-solution coefficient rho.
inline WaveAnalysis analyze_wave(const ModelParams& p, const KernelSpec& k1, const KernelSpec& k2,
                                 double c) {
  validate(p);
  WaveAnalysis wa;
  const CriticalSpeed cs1 = critical_speed(p.r1, k1);
  const CriticalSpeed cs2 = critical_speed(p.r2, k2);
  wa.c1_star = cs1.c_star;
  wa.c2_star = cs2.c_star;
  wa.c_star = std::max(cs1.c_star, cs2.c_star);
  wa.lambda_hat1 = cs1.lambda_hat;
  wa.lambda_hat2 = cs2.lambda_hat;
  wa.boundary_min1 = cs1.boundary_minimum;
  wa.boundary_min2 = cs2.boundary_minimum;
  wa.c = c;
  if (!(c > wa.c_star + 1e-9))
    throw std::domain_error("analyze_wave: subcritical speed c = " + std::to_string(c) +
                            " (c* = " + std::to_string(wa.c_star) + ")");
  wa.lambda1 = lambda_of_c(c, p.r1, k1);
  wa.lambda2 = lambda_of_c(c, p.r2, k2);

  const double up1 = delta_upper_root(c, p.r1, k1, wa.lambda1);
  const double up2 = delta_upper_root(c, p.r2, k2, wa.lambda2);
  const double gmax = 2.0 * (1.0 - 1e-9);
  wa.gamma_window1 = {wa.lambda1, std::min(gmax * wa.lambda1, up1 * (1.0 - 1e-9))};
  wa.gamma_window2 = {wa.lambda2, std::min(gmax * wa.lambda2, up2 * (1.0 - 1e-9))};

  wa.eta = select_eta(wa.lambda1, wa.lambda2, c, p.r1, p.r2, k1, k2);

  const CapacityBounds cap = capacity_bounds(p);
  wa.L1 = remainder_constant(p.r1, p.sum_a(), p.sum_b(), cap.l1, cap.l2);
  wa.L2 = remainder_constant(p.r2, p.sum_e(), p.sum_f(), cap.l2, cap.l1);
  wa.rho = rho_bound(wa, p, k1, k2);
  return wa;
}

/// Closed-form upper/lower profile pairs:
///   phi_upper = min(e^{l1 t}, l1-cap),  phi_lower = max(e^{l1 t} - rho e^{eta l1 t}, 0).
struct BoundPair {
  double lambda1 = 0.0, lambda2 = 0.0;
  double eta = 0.0, rho = 0.0;
  double l1 = 1.0, l2 = 1.0;

  double phi_upper(double t) const { return std::min(std::exp(lambda1 * t), l1); }
  double psi_upper(double t) const { return std::min(std::exp(lambda2 * t), l2); }
  double phi_lower(double t) const {
    return std::max(std::exp(lambda1 * t) - rho * std::exp(eta * lambda1 * t), 0.0);
  }
  double psi_lower(double t) const {
    return std::max(std::exp(lambda2 * t) - rho * std::exp(eta * lambda2 * t), 0.0);
  }

  /// phi_lower is positive exactly on t < phi_lower_crossing().
  double phi_lower_crossing() const { return -std::log(rho) / ((eta - 1.0) * lambda1); }
  double psi_lower_crossing() const { return -std::log(rho) / ((eta - 1.0) * lambda2); }
};

inline BoundPair build_bound_pair(const WaveAnalysis& wa, const CapacityBounds& cap) {
  BoundPair bp;
  bp.lambda1 = wa.lambda1;
  bp.lambda2 = wa.lambda2;
  bp.eta = wa.eta;
  bp.rho = wa.rho;
  bp.l1 = cap.l1;
  bp.l2 = cap.l2;
  return bp;
}

}  // namespace coinvade
