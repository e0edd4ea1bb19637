#pragma once

// Parameter records, admissibility checks, the pointwise (nondispersal)
// growth map, capacity bounds, and the coexistence equilibrium.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "coinvade/kernel.hpp"

namespace coinvade {

/// Growth rates, history depth m, and competition coefficient sequences.
/// `a`, `e` are the own-species delay coefficients a_1..a_m / e_1..e_m;
/// `b`, `f` the cross-species ones b_0..b_m / f_0..f_m.
struct ModelParams {
  double r1 = 1.0;
  double r2 = 1.0;
  std::size_t m = 0;
  std::vector<double> a;
  std::vector<double> e;
  std::vector<double> b;
  std::vector<double> f;

  double sum_a() const { return std::accumulate(a.begin(), a.end(), 0.0); }
  double sum_e() const { return std::accumulate(e.begin(), e.end(), 0.0); }
  double sum_b() const { return std::accumulate(b.begin(), b.end(), 0.0); }
  double sum_f() const { return std::accumulate(f.begin(), f.end(), 0.0); }
};

inline bool params_well_formed(const ModelParams& p) {
  if (!(p.r1 > 0.0) || !(p.r2 > 0.0)) return false;
  if (p.a.size() != p.m || p.e.size() != p.m) return false;
  if (p.b.size() != p.m + 1 || p.f.size() != p.m + 1) return false;
  auto nonneg = [](const std::vector<double>& v) {
    for (double x : v)
      if (!(x >= 0.0)) return false;
    return true;
  };
  return nonneg(p.a) && nonneg(p.e) && nonneg(p.b) && nonneg(p.f);
}

inline void validate(const ModelParams& p) {
  if (!(p.r1 > 0.0) || !(p.r2 > 0.0))
    throw std::invalid_argument("model params: growth rates must be > 0");
  if (p.a.size() != p.m || p.e.size() != p.m)
    throw std::invalid_argument("model params: a and e must have length m");
  if (p.b.size() != p.m + 1 || p.f.size() != p.m + 1)
    throw std::invalid_argument("model params: b and f must have length m+1");
  if (!params_well_formed(p))
    throw std::invalid_argument("model params: competition coefficients must be >= 0");
}

/// Capacities l_i = 1 for r_i <= 1 and e^{r_i-1}/r_i otherwise;
/// [0,l_1] x [0,l_2] is invariant for the growth map.
struct CapacityBounds {
  double l1 = 1.0;
  double l2 = 1.0;
};

inline double capacity(double r) { return r <= 1.0 ? 1.0 : std::exp(r - 1.0) / r; }

inline CapacityBounds capacity_bounds(const ModelParams& p) {
  validate(p);
  return {capacity(p.r1), capacity(p.r2)};
}

struct Equilibrium {
  double k1 = 0.0;
  double k2 = 0.0;
};

/// "no admissible coexistence equilibrium"; carries the raw 2x2 solution
/// when the system was solvable at all.
class NoCoexistenceError : public std::runtime_error {
 public:
  NoCoexistenceError(const std::string& what, double raw_k1, double raw_k2, bool singular)
      : std::runtime_error(what), raw_k1(raw_k1), raw_k2(raw_k2), singular(singular) {}
  double raw_k1;
  double raw_k2;
  bool singular;
};

namespace detail {

// Solves k1 (1 + sum a) + k2 sum b = 1, k2 (1 + sum e) + k1 sum f = 1.
// Returns {k1, k2, det}.
struct EquilibriumSolve {
  double k1, k2, det;
  bool singular;
};

inline EquilibriumSolve solve_equilibrium(const ModelParams& p) {
  const double a11 = 1.0 + p.sum_a();
  const double a12 = p.sum_b();
  const double a21 = p.sum_f();
  const double a22 = 1.0 + p.sum_e();
  const double det = a11 * a22 - a12 * a21;
  if (std::abs(det) < 1e-12) return {0.0, 0.0, det, true};
  return {(a22 - a12) / det, (a11 - a21) / det, det, false};
}

}  // namespace detail

/// The positive solution of the defining linear system. The paper's
/// solvability proviso (1 + sum a > sum f and 1 + sum e > sum b) is
/// equivalent to det > 0 together with positivity, which is what is enforced.
inline Equilibrium coexistence_equilibrium(const ModelParams& p) {
  validate(p);
  const auto s = detail::solve_equilibrium(p);
  if (s.singular)
    throw NoCoexistenceError("no admissible coexistence equilibrium: singular system", s.k1, s.k2,
                             true);
  if (s.det < 1e-12 || s.k1 < 1e-12 || s.k2 < 1e-12)
    throw NoCoexistenceError("no admissible coexistence equilibrium: raw solution (" +
                                 std::to_string(s.k1) + ", " + std::to_string(s.k2) + ")",
                             s.k1, s.k2, false);
  return {s.k1, s.k2};
}

/// One generation of the nondispersal system. Histories are ordered
/// oldest -> newest, length m+1; entries must be nonnegative.
inline std::pair<double, double> growth_map(const ModelParams& p, std::span<const double> u_hist,
                                            std::span<const double> v_hist) {
  validate(p);
  if (u_hist.size() != p.m + 1 || v_hist.size() != p.m + 1)
    throw std::invalid_argument("growth_map: histories must have length m+1");
  for (std::size_t i = 0; i <= p.m; ++i)
    if (!(u_hist[i] >= 0.0) || !(v_hist[i] >= 0.0))
      throw std::invalid_argument("growth_map: histories must be nonnegative");

  const std::size_t newest = p.m;
  double sx = 1.0 - u_hist[newest];
  double sy = 1.0 - v_hist[newest];
  for (std::size_t i = 1; i <= p.m; ++i) {
    sx -= p.a[i - 1] * u_hist[newest - i];
    sy -= p.e[i - 1] * v_hist[newest - i];
  }
  for (std::size_t i = 0; i <= p.m; ++i) {
    sx -= p.b[i] * v_hist[newest - i];
    sy -= p.f[i] * u_hist[newest - i];
  }
  return {u_hist[newest] * std::exp(p.r1 * sx), v_hist[newest] * std::exp(p.r2 * sy)};
}

struct AdmissibilityReport {
  bool a1_a2_kernel_ok = false;    // (A1)-(A2) for both kernels
  bool coeff_ok = false;           // (A3)-(A4)
  bool a5_ok = false;              // (A5)
  bool up_ok = false;              // condition (up) of the r > 1 theorem
  bool equilibrium_solvable = false;
  double growth_floor_x = 0.0;  // 1 - sum a - sum b, the Section 4 lower bound
  double growth_floor_y = 0.0;  // 1 - sum e - sum f
};

/// Reports each assumption as a flag; never throws, even on malformed input.
inline AdmissibilityReport check_admissibility(const ModelParams& p, const KernelSpec& k1,
                                               const KernelSpec& k2) {
  AdmissibilityReport rep;
  rep.a1_a2_kernel_ok = k1.finite_mgf_everywhere() && k2.finite_mgf_everywhere();
  rep.coeff_ok = params_well_formed(p);
  if (!rep.coeff_ok) return rep;

  const double sa = p.sum_a(), se = p.sum_e(), sb = p.sum_b(), sf = p.sum_f();
  rep.growth_floor_x = 1.0 - sa - sb;
  rep.growth_floor_y = 1.0 - se - sf;
  rep.a5_ok = p.r1 <= 1.0 && p.r2 <= 1.0 && sa + sb < 1.0 && se + sf < 1.0;

  const CapacityBounds cap = capacity_bounds(p);
  rep.up_ok = sa * cap.l1 + sb * cap.l2 < 1.0 && se * cap.l2 + sf * cap.l1 < 1.0;

  const auto s = detail::solve_equilibrium(p);
  rep.equilibrium_solvable = !s.singular && s.det > 1e-12 && s.k1 > 1e-12 && s.k2 > 1e-12;
  return rep;
}

}  // namespace coinvade
