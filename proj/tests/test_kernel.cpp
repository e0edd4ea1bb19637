#include <doctest.h>

#include <random>

#include "coinvade/kernel.hpp"
#include "oracles.hpp"

using namespace coinvade;

TEST_CASE("mgf is 1 at lambda = 0 for every family") {
  CHECK(KernelSpec::gaussian(0.7).mgf(0.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(KernelSpec::laplace(2.0).mgf(0.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(KernelSpec::uniform(1.3).mgf(0.0) == doctest::Approx(1.0).epsilon(1e-14));
  auto tab = KernelSpec::tabulated({-0.5, 0.0, 0.5}, {0.25, 0.5, 0.25});
  CHECK(tab.mgf(0.0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("gaussian mgf closed form matches quadrature") {
  auto k = KernelSpec::gaussian(1.0);
  CHECK(k.mgf(1.0) == doctest::Approx(std::exp(0.5)).epsilon(1e-12));
  const double quad =
      oracle::mgf_by_quadrature([](double y) { return oracle::gaussian_density(1.0, y); }, 1.0, 14.0);
  CHECK(std::abs(k.mgf(1.0) - quad) < 1e-10);
}

TEST_CASE("laplace mgf diverges at the pole and matches quadrature inside") {
  auto k = KernelSpec::laplace(1.0);
  CHECK_THROWS_WITH_AS(k.mgf(1.0), doctest::Contains("MGF divergent"), std::domain_error);
  CHECK_THROWS_AS(k.mgf(-1.2), std::domain_error);
  const double quad = oracle::mgf_by_quadrature(
      [](double y) { return 0.5 * std::exp(-std::abs(y)); }, 0.5, 60.0);
  CHECK(k.mgf(0.5) == doctest::Approx(quad).epsilon(1e-10));
  CHECK(k.mgf_domain_bound() == 1.0);
}

TEST_CASE("uniform mgf: sinh form with a smooth limit at zero") {
  auto k = KernelSpec::uniform(1.0);
  CHECK(k.mgf(2.0) == doctest::Approx(std::sinh(2.0) / 2.0).epsilon(1e-13));
  CHECK(k.mgf(1e-10) == doctest::Approx(1.0).epsilon(1e-12));
  const double quad = oracle::mgf_by_quadrature(
      [](double y) { return std::abs(y) <= 1.0 ? 0.5 : 0.0; }, 0.7, 1.0);
  CHECK(k.mgf(0.7) == doctest::Approx(quad).epsilon(1e-10));
}

TEST_CASE("tabulated kernels validate mass and symmetry") {
  CHECK_THROWS_AS(KernelSpec::tabulated({0.0, 1.0}, {0.5, 0.6}), std::invalid_argument);
  CHECK_THROWS_AS(KernelSpec::tabulated({0.0, 1.0}, {0.5, 0.5}), std::invalid_argument);
  auto tab = KernelSpec::tabulated({-1.0, 0.0, 1.0}, {0.3, 0.4, 0.3});
  CHECK(tab.mgf(0.25) ==
        doctest::Approx(0.3 * std::exp(-0.25) + 0.4 + 0.3 * std::exp(0.25)).epsilon(1e-14));
}

TEST_CASE("discretize: uniform h=1 at dx=0.5 gives the 5-point stencil") {
  auto dk = discretize(KernelSpec::uniform(1.0), 0.5);
  CHECK(dk.radius == 2);
  REQUIRE(dk.weights.size() == 5);
  for (double w : dk.weights) CHECK(w == doctest::Approx(0.2).epsilon(1e-14));
  double sum = 0.0;
  for (double w : dk.weights) sum += w;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("discretize: gaussian radius tracks the tail bound") {
  auto dk = discretize(KernelSpec::gaussian(1.0), 0.1, 1e-10);
  CHECK(dk.radius >= 60);
  CHECK(dk.radius <= 70);
  // omitted mass beyond the stencil, by quadrature
  const double tail = 2.0 * oracle::integrate(
                                [](double y) { return oracle::gaussian_density(1.0, y); },
                                (dk.radius + 0.5) * 0.1, 12.0);
  CHECK(tail < 1e-10);
  // exact mirror symmetry by construction
  for (int j = 1; j <= dk.radius; ++j) CHECK(dk.weight(j) == dk.weight(-j));
}

TEST_CASE("discretize: tabulated kernel already on the grid is unchanged") {
  auto base = discretize(KernelSpec::gaussian(1.0), 0.25, 1e-10);
  auto spec = to_tabulated(base);
  auto again = discretize(spec, 0.25);
  REQUIRE(again.radius == base.radius);
  for (std::size_t i = 0; i < base.weights.size(); ++i)
    CHECK(again.weights[i] == doctest::Approx(base.weights[i]).epsilon(1e-14));
}

TEST_CASE("discretize: coarse grids are rejected") {
  CHECK_THROWS_WITH_AS(discretize(KernelSpec::uniform(1.0), 1.0),
                       doctest::Contains("grid too coarse"), std::invalid_argument);
  CHECK_THROWS_AS(discretize(KernelSpec::gaussian(1.0), -0.1), std::invalid_argument);
  CHECK_THROWS_AS(discretize(KernelSpec::gaussian(1.0), 0.1, 0.5), std::invalid_argument);
}

TEST_CASE("discrete mgf approaches the continuous one as dx shrinks") {
  auto gauss = KernelSpec::gaussian(1.0);
  auto dk = discretize(gauss, 0.1, 1e-10);
  double worst = 0.0;
  for (double lam = -2.0; lam <= 2.0; lam += 0.25) {
    const double exact = gauss.mgf(lam);
    worst = std::max(worst, std::abs(dk.mgf(lam) - exact) / exact);
  }
  CHECK(worst < 5e-4);

  // for the smooth gaussian the midpoint rule is already at the truncation
  // floor; the uniform kernel's edge makes the dx dependence visible
  auto unif = KernelSpec::uniform(1.0);
  auto coarse = discretize(unif, 0.1);
  auto fine = discretize(unif, 0.02);
  double worst_coarse = 0.0, worst_fine = 0.0;
  for (double lam = -2.0; lam <= 2.0; lam += 0.25) {
    const double exact = unif.mgf(lam);
    worst_coarse = std::max(worst_coarse, std::abs(coarse.mgf(lam) - exact) / exact);
    worst_fine = std::max(worst_fine, std::abs(fine.mgf(lam) - exact) / exact);
  }
  CHECK(worst_fine < worst_coarse);
}

TEST_CASE("convolve: constant fields are fixed points of a mass-one kernel") {
  auto dk = discretize(KernelSpec::gaussian(1.0), 0.1);
  std::vector<double> field(777, 0.37);
  for (auto method : {ConvMethod::direct, ConvMethod::fft}) {
    auto out = convolve(field, dk, {0.37, 0.37}, method);
    for (double v : out) CHECK(v == doctest::Approx(0.37).epsilon(1e-13));
  }
}

TEST_CASE("convolve: a delta spike reproduces the kernel shape") {
  auto dk = discretize(KernelSpec::gaussian(1.0), 0.1);
  std::vector<double> field(1024, 0.0);
  field[500] = 1.0 / dk.dx;
  auto out = convolve(field, dk, {0.0, 0.0}, ConvMethod::direct);
  for (int j = -dk.radius; j <= dk.radius; ++j)
    CHECK(out[static_cast<std::size_t>(500 + j)] ==
          doctest::Approx(dk.weight(j) / dk.dx).epsilon(1e-12));
  CHECK(out[500 + dk.radius + 1] == 0.0);
  CHECK(out[500 - dk.radius - 1] == 0.0);
}

TEST_CASE("convolve: symmetric kernels preserve linear ramps in the interior") {
  auto dk = discretize(KernelSpec::gaussian(0.8), 0.1);
  const std::size_t n = 500;
  std::vector<double> ramp(n);
  for (std::size_t i = 0; i < n; ++i) ramp[i] = -2.0 + 0.013 * static_cast<double>(i);
  auto out = convolve(ramp, dk, {ramp.front(), ramp.back()}, ConvMethod::direct);
  const std::size_t r = static_cast<std::size_t>(dk.radius);
  for (std::size_t i = r; i + r < n; ++i) CHECK(std::abs(out[i] - ramp[i]) < 1e-12);
}

TEST_CASE("convolve: fft and direct paths agree to 1e-12 on random fields") {
  std::mt19937 rng(20240811);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto dk = discretize(KernelSpec::gaussian(1.0), 0.05, 1e-10);
  for (std::size_t n : {300u, 1023u, 4096u}) {
    std::vector<double> field(n);
    for (double& v : field) v = unif(rng);
    // some exact zeros, as front dynamics produce
    for (std::size_t i = 0; i < n / 5; ++i) field[i] = 0.0;
    auto a = convolve(field, dk, {0.0, 0.5}, ConvMethod::direct);
    auto b = convolve(field, dk, {0.0, 0.5}, ConvMethod::fft);
    double scale = 0.0;
    for (double v : a) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12 * scale);
  }
}

TEST_CASE("convolve: nonnegativity and the max bound are preserved") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> unif(0.0, 2.0);
  auto dk = discretize(KernelSpec::laplace(2.0), 0.1);
  std::vector<double> field(600);
  for (double& v : field) v = unif(rng);
  const double cap = *std::max_element(field.begin(), field.end());
  for (auto method : {ConvMethod::direct, ConvMethod::fft}) {
    auto out = convolve(field, dk, {0.3, 0.1}, method);
    for (double v : out) {
      CHECK(v >= 0.0);
      CHECK(v <= cap * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("convolve: symmetry about the center is preserved") {
  auto dk = discretize(KernelSpec::uniform(0.9), 0.1);
  const std::size_t n = 301;
  std::vector<double> field(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (static_cast<double>(i) - 150.0) * 0.1;
    field[i] = std::exp(-d * d);
  }
  for (auto method : {ConvMethod::direct, ConvMethod::fft}) {
    auto out = convolve(field, dk, {0.0, 0.0}, method);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(out[i] - out[n - 1 - i]) < 1e-13);
  }
}

TEST_CASE("convolve: field shorter than the kernel radius is rejected") {
  auto dk = discretize(KernelSpec::gaussian(1.0), 0.1);  // radius ~ 65
  std::vector<double> tiny(10, 1.0);
  CHECK_THROWS_AS(convolve(tiny, dk, {0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("fft path stays exact ahead of compact supports") {
  // exponential growth amplifies any absolute noise floor; cells outside the
  // reach of the stencil must come back exactly zero
  auto dk = discretize(KernelSpec::gaussian(1.0), 0.1, 1e-10);
  std::vector<double> field(2048, 0.0);
  for (std::size_t i = 1000; i < 1050; ++i) field[i] = 0.8;
  auto out = convolve(field, dk, {0.0, 0.0}, ConvMethod::fft);
  for (std::size_t i = 0; i + dk.radius < 1000; ++i) CHECK(out[i] == 0.0);
  for (std::size_t i = 1050 + dk.radius; i < 2048; ++i) CHECK(out[i] == 0.0);
}
