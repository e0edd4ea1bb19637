#pragma once

// Contracting rectangles for the nondispersal delayed system: the explicit
// affine family shrinking to the coexistence equilibrium, and its exact
// verification through box extrema of the growth map.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "coinvade/dynamics.hpp"
#include "coinvade/model.hpp"

namespace coinvade {

/// Nested boxes [R(s), T(s)] with r_i(s) = s k_i and
/// t_i(s) = s k_i + (1-s)(1+epsilon), s in [0,1].
struct RectangleFamily {
  Equilibrium eq;
  double epsilon = 0.01;

  double r_lo(Species sp, double s) const { return s * k(sp); }
  double t_hi(Species sp, double s) const { return s * k(sp) + (1.0 - s) * (1.0 + epsilon); }
  double k(Species sp) const { return sp == Species::x ? eq.k1 : eq.k2; }
};

/// Validates the ordering and monotonicity conditions of the family:
/// 0 <= r(0) < k = r(1) = t(1) < t(0) <= (2 l_1, 2 l_2).
inline RectangleFamily build_family(const Equilibrium& eq, double epsilon,
                                    const CapacityBounds& cap) {
  if (!(epsilon > 0)) throw std::invalid_argument("rectangle family: epsilon must be > 0");
  if (!(eq.k1 > 0) || !(eq.k2 > 0))
    throw std::invalid_argument("rectangle family: equilibrium must be positive");
  if (!(eq.k1 < 1.0 + epsilon) || !(eq.k2 < 1.0 + epsilon))
    throw std::invalid_argument("rectangle family: equilibrium above the s=0 ceiling");
  if (1.0 + epsilon > 2.0 * cap.l1 || 1.0 + epsilon > 2.0 * cap.l2)
    throw std::invalid_argument("rectangle family: 1+epsilon exceeds twice the capacity");
  return {eq, epsilon};
}

/// Exact extrema of g(u^0..u^m; v^0..v^m) = u^0 e^{r(1-u^0-sum a_l u^l-sum b_l v^l)}
/// over a coordinate box. g is decreasing in every argument except u^0, and in
/// u^0 rises to 1/r then falls, so the maximum sits at u^0 = clamp(1/r) with
/// the other coordinates at their lows, and the minimum at a u^0 endpoint
/// with the others at their highs.
inline std::pair<double, double> box_extrema(const ModelParams& p, Species which,
                                             std::span<const double> lows,
                                             std::span<const double> highs,
                                             std::span<const double> cross_lows,
                                             std::span<const double> cross_highs) {
  validate(p);
  if (lows.size() != p.m + 1 || highs.size() != p.m + 1 || cross_lows.size() != p.m + 1 ||
      cross_highs.size() != p.m + 1)
    throw std::invalid_argument("box_extrema: bounds must have length m+1");
  for (std::size_t i = 0; i <= p.m; ++i)
    if (!(0.0 <= lows[i]) || !(lows[i] <= highs[i]) || !(0.0 <= cross_lows[i]) ||
        !(cross_lows[i] <= cross_highs[i]))
      throw std::invalid_argument("box_extrema: need 0 <= lows <= highs");

  const double r = which == Species::x ? p.r1 : p.r2;
  const auto& own = which == Species::x ? p.a : p.e;
  const auto& cross = which == Species::x ? p.b : p.f;

  auto eval = [&](double u0, std::span<const double> du, std::span<const double> dv) {
    double s = 1.0 - u0;
    for (std::size_t l = 1; l <= p.m; ++l) s -= own[l - 1] * du[l];
    for (std::size_t l = 0; l <= p.m; ++l) s -= cross[l] * dv[l];
    return u0 * std::exp(r * s);
  };

  const double u0_peak = std::clamp(1.0 / r, lows[0], highs[0]);
  const double g_max = eval(u0_peak, lows, cross_lows);
  const double g_min =
      std::min(eval(lows[0], highs, cross_highs), eval(highs[0], highs, cross_highs));
  return {g_min, g_max};
}

struct SampleMargin {
  double s = 0.0;
  double margin = 0.0;  // min over both species of the distance to the walls
};

struct ContractionReport {
  bool pass = false;
  double epsilon = 0.0;
  double worst_margin = 0.0;
  double worst_s = 0.0;
  std::vector<SampleMargin> samples;
};

/// Checks the strict-invariance condition at s_samples Chebyshev-spaced
/// interior values of s (plus the near-limit points 0.001 and 0.999): for each
/// species the growth-map extrema over the s-box must satisfy
/// r_i(s) < min and max < t_i(s) strictly.
inline ContractionReport verify_contracting(const RectangleFamily& family, const ModelParams& p,
                                            int s_samples = 101) {
  validate(p);
  ContractionReport rep;
  rep.epsilon = family.epsilon;

  std::vector<double> svals;
  constexpr double pi = 3.14159265358979323846;
  for (int k = 0; k < s_samples; ++k)
    svals.push_back(0.5 * (1.0 - std::cos(pi * (k + 0.5) / s_samples)));
  svals.push_back(0.001);
  svals.push_back(0.999);
  std::sort(svals.begin(), svals.end());

  rep.pass = true;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  for (double s : svals) {
    std::vector<double> lo1(p.m + 1, family.r_lo(Species::x, s));
    std::vector<double> hi1(p.m + 1, family.t_hi(Species::x, s));
    std::vector<double> lo2(p.m + 1, family.r_lo(Species::y, s));
    std::vector<double> hi2(p.m + 1, family.t_hi(Species::y, s));

    double margin = std::numeric_limits<double>::infinity();
    {
      const auto [gmin, gmax] = box_extrema(p, Species::x, lo1, hi1, lo2, hi2);
      margin = std::min({margin, gmin - family.r_lo(Species::x, s),
                         family.t_hi(Species::x, s) - gmax});
    }
    {
      const auto [gmin, gmax] = box_extrema(p, Species::y, lo2, hi2, lo1, hi1);
      margin = std::min({margin, gmin - family.r_lo(Species::y, s),
                         family.t_hi(Species::y, s) - gmax});
    }
    rep.samples.push_back({s, margin});
    if (margin < rep.worst_margin) {
      rep.worst_margin = margin;
      rep.worst_s = s;
    }
    if (!(margin > 0.0)) rep.pass = false;
  }
  return rep;
}

struct RetryOutcome {
  double epsilon = 0.0;
  bool pass = false;
};

struct AdaptiveContractionReport {
  ContractionReport final;
  std::vector<RetryOutcome> attempts;
};

/// Retries with halved epsilon (down to 1e-6) when verification fails; each
/// attempt's outcome is kept for the report.
inline AdaptiveContractionReport verify_contracting_adaptive(const Equilibrium& eq,
                                                             const CapacityBounds& cap,
                                                             const ModelParams& p, double epsilon,
                                                             int s_samples = 101) {
  AdaptiveContractionReport out;
  double eps = epsilon;
  for (;;) {
    const RectangleFamily family = build_family(eq, eps, cap);
    out.final = verify_contracting(family, p, s_samples);
    out.attempts.push_back({eps, out.final.pass});
    if (out.final.pass || eps * 0.5 < 1e-6) return out;
    eps *= 0.5;
  }
}

}  // namespace coinvade
