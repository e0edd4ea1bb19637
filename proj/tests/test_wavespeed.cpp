#include <doctest.h>

#include <random>

#include "coinvade/wavespeed.hpp"
#include "oracles.hpp"

using namespace coinvade;

namespace {

ModelParams preset(double b1 = 0.05) {
  ModelParams p;
  p.r1 = p.r2 = 1.0;
  p.m = 1;
  p.a = {0.1};
  p.e = {0.1};
  p.b = {0.1, b1};
  p.f = {0.1, b1};
  return p;
}

}  // namespace

TEST_CASE("delta: normalization, the gaussian root, and monotonicity in c") {
  auto g = KernelSpec::gaussian(1.0);
  CHECK(delta(0.0, 3.7, 1.0, g) == doctest::Approx(std::exp(1.0)).epsilon(1e-14));
  // ln Delta = 1 + lambda^2/2 - 2 lambda vanishes at 2 - sqrt(2)
  const double root = 2.0 - std::sqrt(2.0);
  CHECK(delta(root, 2.0, 1.0, g) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(delta(0.5, 2.0, 1.0, g) > delta(0.5, 2.5, 1.0, g));
  CHECK(delta(0.5, 2.5, 1.0, g) > delta(0.5, 3.0, 1.0, g));
}

TEST_CASE("critical speed: gaussian closed form sigma*sqrt(2r)") {
  for (double r : {0.5, 1.0, 2.0}) {
    for (double sigma : {0.5, 1.0, 2.0}) {
      const CriticalSpeed cs = critical_speed(r, KernelSpec::gaussian(sigma));
      CHECK(cs.c_star == doctest::Approx(sigma * std::sqrt(2.0 * r)).epsilon(1e-9));
      CHECK(cs.lambda_hat == doctest::Approx(std::sqrt(2.0 * r) / sigma).epsilon(1e-6));
      CHECK(!cs.boundary_minimum);
    }
  }
}

TEST_CASE("critical speed: uniform kernel against a dense grid scan") {
  auto k = KernelSpec::uniform(1.0);
  const CriticalSpeed cs = critical_speed(1.0, k);
  auto q = [&](double lam) { return (1.0 + std::log(k.mgf(lam))) / lam; };
  const auto [grid_val, grid_arg] = oracle::grid_min(q, 1e-3, 10.0, 1000000);
  CHECK(std::abs(cs.c_star - grid_val) < 1e-8);
  CHECK(std::abs(cs.lambda_hat - grid_arg) < 1e-3);
}

TEST_CASE("critical speed: doubling sigma doubles the speed") {
  const double c1 = critical_speed(0.7, KernelSpec::gaussian(0.9)).c_star;
  const double c2 = critical_speed(0.7, KernelSpec::gaussian(1.8)).c_star;
  CHECK(c2 == doctest::Approx(2.0 * c1).epsilon(1e-9));
}

TEST_CASE("critical speed survives discretization of the kernel") {
  auto spec = KernelSpec::gaussian(1.0);
  auto tab = to_tabulated(discretize(spec, 0.05, 1e-10));
  const double exact = critical_speed(1.0, spec).c_star;
  const double discrete = critical_speed(1.0, tab).c_star;
  CHECK(std::abs(exact - discrete) <= 1e-3);
}

TEST_CASE("minimal speed: symmetry and the max rule") {
  auto g = KernelSpec::gaussian(1.0);
  ModelParams p = preset();
  const MinimalSpeed ms = minimal_speed(p, g, g);
  CHECK(ms.c1_star == ms.c2_star);
  CHECK(ms.c_star == ms.c1_star);

  p.r2 = 0.5;
  const MinimalSpeed ms2 = minimal_speed(p, g, g);
  CHECK(ms2.c_star == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
  CHECK(ms2.c_star == ms2.c1_star);
  CHECK(ms2.c2_star == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("below c*, some characteristic function stays above one") {
  auto g = KernelSpec::gaussian(1.0);
  const ModelParams p = preset();
  const MinimalSpeed ms = minimal_speed(p, g, g);
  const double c = 0.99 * ms.c_star;
  double min_over_grid = std::numeric_limits<double>::infinity();
  for (double lam = 0.0; lam <= 6.0; lam += 0.002) {
    const double worst = std::max(delta(lam, c, p.r1, g), delta(lam, c, p.r2, g));
    min_over_grid = std::min(min_over_grid, worst);
  }
  CHECK(min_over_grid >= 1.0);
}

TEST_CASE("lambda_of_c: quadratic root, continuity at c*, down-crossing") {
  auto g = KernelSpec::gaussian(1.0);
  const double lam = lambda_of_c(2.0, 1.0, g);
  CHECK(lam == doctest::Approx(2.0 - std::sqrt(2.0)).epsilon(1e-12));
  CHECK(delta(lam * (1.0 + 1e-3), 2.0, 1.0, g) < 1.0);

  const double c_star = std::sqrt(2.0);
  const double near = lambda_of_c(c_star * (1.0 + 1e-6), 1.0, g);
  CHECK(std::abs(near - std::sqrt(2.0)) < 5e-3);

  CHECK_THROWS_WITH_AS(lambda_of_c(1.0, 1.0, g), doctest::Contains("subcritical"),
                       std::domain_error);
}

TEST_CASE("log of the characteristic function is convex in lambda") {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto kernels = {KernelSpec::gaussian(1.3), KernelSpec::uniform(0.8), KernelSpec::laplace(3.0)};
  for (const auto& k : kernels) {
    const double cap = std::min(4.0, k.mgf_domain_bound() * 0.9);
    for (int trial = 0; trial < 200; ++trial) {
      const double x0 = cap * 0.9 * unif(rng);
      const double h = 1e-3 + 0.05 * unif(rng);
      if (x0 + 2.0 * h >= cap) continue;
      const double f0 = log_delta(x0, 1.7, 1.0, k);
      const double f1 = log_delta(x0 + h, 1.7, 1.0, k);
      const double f2 = log_delta(x0 + 2.0 * h, 1.7, 1.0, k);
      CHECK(f0 - 2.0 * f1 + f2 >= -1e-9);
    }
  }
}

TEST_CASE("select_eta: all four constraints hold with margin at c = 2") {
  auto g = KernelSpec::gaussian(1.0);
  const double l1 = lambda_of_c(2.0, 1.0, g);
  const double l2 = lambda_of_c(2.0, 1.0, g);
  const double eta = select_eta(l1, l2, 2.0, 1.0, 1.0, g, g);
  CHECK(eta > 1.0 + 1e-6);
  CHECK(eta < 2.0 - 1e-6);
  CHECK(eta * l1 < l1 + l2 - 1e-6);
  CHECK(delta(eta * l1, 2.0, 1.0, g) < 1.0 - 1e-6);
  // equal exponents reduce the sum constraints to eta < 2
  CHECK((l1 + l2) / std::max(l1, l2) == doctest::Approx(2.0));

  // cross-check the feasible set on an eta grid: the midpoint sits inside
  double feas_lo = 2.0, feas_hi = 1.0;
  for (double cand = 1.001; cand < 2.0; cand += 0.001) {
    const bool ok = cand * l1 < l1 + l2 && cand * l2 < l1 + l2 &&
                    delta(cand * l1, 2.0, 1.0, g) < 1.0 && delta(cand * l2, 2.0, 1.0, g) < 1.0;
    if (ok) {
      feas_lo = std::min(feas_lo, cand);
      feas_hi = std::max(feas_hi, cand);
    }
  }
  CHECK(feas_lo < feas_hi);
  CHECK(eta > feas_lo - 1e-3);
  CHECK(eta < feas_hi + 1e-3);
}

TEST_CASE("gamma window: the characteristic function stays below one on it") {
  auto g = KernelSpec::gaussian(1.0);
  const WaveAnalysis wa = analyze_wave(preset(), g, g, 2.0);
  for (int i = 1; i <= 100; ++i) {
    const double lam = wa.gamma_window1.lo +
                       (wa.gamma_window1.hi - wa.gamma_window1.lo) * static_cast<double>(i) / 100.0;
    CHECK(delta(lam, 2.0, 1.0, g) < 1.0);
  }
  CHECK(wa.gamma_window1.hi <= 2.0 * wa.lambda1);
  CHECK(wa.gamma_window1.hi > wa.lambda1);
}

TEST_CASE("remainder constant: L = r passes its own grid verification") {
  CHECK(remainder_constant(1.0, 0.1, 0.3, 1.0, 1.0) == 1.0);
  CHECK(remainder_constant(2.0, 0.1, 0.2, std::exp(1.0) / 2.0, 1.0) == 2.0);
  CHECK(remainder_constant(0.5, 0.0, 0.0, 1.0, 1.0) == 0.5);
}

TEST_CASE("remainder inequality is first-order tight near zero") {
  // |u e^{r(1-u-s)} - u e^r| ~ r e^r u s as s -> 0 at fixed small u
  const double r = 1.0, u = 1e-4, s = 1e-6;
  const double lhs = std::abs(u * std::exp(r * (1.0 - u - s)) - u * std::exp(r));
  const double firstorder = r * std::exp(r) * u * (u + s);
  CHECK(lhs <= firstorder * (1.0 + 1e-3));
  CHECK(lhs >= firstorder * (1.0 - 1e-3));
}

TEST_CASE("rho bound: decoupled closed form and symmetric equality") {
  auto g = KernelSpec::gaussian(1.0);
  SUBCASE("no competition, m = 0") {
    ModelParams p;
    p.m = 0;
    p.b = {0.0};
    p.f = {0.0};
    const WaveAnalysis wa = analyze_wave(p, g, g, 2.0);
    const double expected =
        1.0 + wa.L1 * delta(2.0 * wa.lambda1, 2.0, 1.0, g) /
                  (1.0 - delta(wa.eta * wa.lambda1, 2.0, 1.0, g));
    CHECK(wa.rho == doctest::Approx(expected).epsilon(1e-12));
    CHECK(wa.rho > 1.0);
  }
  SUBCASE("symmetric parameters give equal species bounds") {
    const WaveAnalysis wa = analyze_wave(preset(), g, g, 2.0);
    ModelParams swapped = preset();
    std::swap(swapped.r1, swapped.r2);
    std::swap(swapped.a, swapped.e);
    std::swap(swapped.b, swapped.f);
    const WaveAnalysis wb = analyze_wave(swapped, g, g, 2.0);
    CHECK(wa.rho == doctest::Approx(wb.rho).epsilon(1e-13));
  }
}

TEST_CASE("rho bound: every characteristic factor agrees with quadrature") {
  auto g = KernelSpec::gaussian(1.0);
  const ModelParams p = preset();
  const WaveAnalysis wa = analyze_wave(p, g, g, 2.0);
  CHECK(wa.rho > 1.0);
  CHECK(std::isfinite(wa.rho));
  auto quad_delta = [&](double lam) {
    const double integral = oracle::integrate(
        [&](double y) { return oracle::gaussian_density(1.0, y) * std::exp(lam * y); }, -14.0,
        14.0);
    return std::exp(p.r1) * integral * std::exp(-lam * 2.0);
  };
  for (double lam : {wa.eta * wa.lambda1, 2.0 * wa.lambda1, wa.lambda1 + wa.lambda2})
    CHECK(delta(lam, 2.0, p.r1, g) == doctest::Approx(quad_delta(lam)).epsilon(1e-10));
}

TEST_CASE("scalar spreading speed") {
  auto g = KernelSpec::gaussian(1.0);
  SUBCASE("b0 = e^r reproduces the species speed") {
    CHECK(scalar_spreading_speed(std::exp(1.0), g) ==
          doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
  }
  SUBCASE("depressed slope: sums 0.3 give sqrt(1.4)") {
    CHECK(scalar_spreading_speed(std::exp(0.7), g) ==
          doctest::Approx(std::sqrt(1.4)).epsilon(1e-9));
    CHECK(std::sqrt(1.4) == doctest::Approx(1.183216).epsilon(1e-6));
  }
  SUBCASE("slope tending to one gives vanishing speed") {
    CHECK(scalar_spreading_speed(1.0 + 1e-8, g) < 1e-3);
    CHECK_THROWS_AS(scalar_spreading_speed(1.0, g), std::invalid_argument);
  }
}

TEST_CASE("bound pair: clamps, tails, and the lower-profile crossing") {
  auto g = KernelSpec::gaussian(1.0);
  ModelParams p = preset();
  p.r1 = 2.0;  // capacity above one exercises the clamp corner
  const WaveAnalysis wa = analyze_wave(p, g, g, 2.5);
  const BoundPair bp = build_bound_pair(wa, capacity_bounds(p));

  CHECK(bp.phi_upper(-100.0) < 1e-12);
  CHECK(bp.phi_lower(-100.0) < 1e-12);
  CHECK(bp.psi_upper(-80.0) < 1e-12);

  const double corner = std::log(bp.l1) / bp.lambda1;
  CHECK(bp.phi_upper(corner + 0.1) == bp.l1);
  CHECK(bp.phi_upper(corner - 0.1) < bp.l1);

  const double t0 = bp.phi_lower_crossing();
  CHECK(bp.phi_lower(t0 - 1e-6) > 0.0);
  CHECK(bp.phi_lower(t0 + 1e-6) == 0.0);

  for (double t = -40.0; t <= 10.0; t += 0.37) {
    CHECK(bp.phi_lower(t) >= 0.0);
    CHECK(bp.phi_lower(t) <= bp.phi_upper(t));
    CHECK(bp.phi_upper(t) <= bp.l1);
    CHECK(bp.psi_lower(t) <= bp.psi_upper(t));
  }
}

TEST_CASE("laplace kernels: analysis stays inside the MGF domain") {
  auto lap = KernelSpec::laplace(2.0);
  const CriticalSpeed cs = critical_speed(1.0, lap);
  CHECK(cs.lambda_hat < 2.0);
  CHECK(cs.c_star > 0.0);
  ModelParams p;
  p.m = 0;
  p.b = {0.05};
  p.f = {0.05};
  const WaveAnalysis wa = analyze_wave(p, lap, lap, cs.c_star * 1.3);
  CHECK(wa.lambda1 < 2.0);
  CHECK(wa.eta * wa.lambda1 < 2.0);
  CHECK(wa.rho > 1.0);
}
