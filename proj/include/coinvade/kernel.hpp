#pragma once

// Dispersal kernels: analytic families and tabulated densities, their moment
// generating functions, grid discretization, and the convolution engine used
// by both the time stepper and the wave-profile operator.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "coinvade/fft.hpp"

namespace coinvade {

struct GaussianKernel {
  double sigma;  // length scale, > 0
};

struct LaplaceKernel {
  double beta;  // decay rate, > 0; MGF finite only for |lambda| < beta
};

struct UniformKernel {
  double half_width;  // > 0
};

/// Symmetric density given as point masses at the listed offsets.
struct TabulatedKernel {
  std::vector<double> offsets;
  std::vector<double> weights;
};

/// A dispersal kernel: even, nonnegative, total mass one.
class KernelSpec {
 public:
  using Family = std::variant<GaussianKernel, LaplaceKernel, UniformKernel, TabulatedKernel>;

  static KernelSpec gaussian(double sigma) {
    if (!(sigma > 0)) throw std::invalid_argument("gaussian kernel: sigma must be > 0");
    return KernelSpec(GaussianKernel{sigma});
  }

  static KernelSpec laplace(double beta) {
    if (!(beta > 0)) throw std::invalid_argument("laplace kernel: beta must be > 0");
    return KernelSpec(LaplaceKernel{beta});
  }

  static KernelSpec uniform(double half_width) {
    if (!(half_width > 0)) throw std::invalid_argument("uniform kernel: half width must be > 0");
    return KernelSpec(UniformKernel{half_width});
  }

  /// Offsets and weights must be mirror-symmetric and the weights must sum to
  /// one within 1e-10.
  static KernelSpec tabulated(std::vector<double> offsets, std::vector<double> weights) {
    if (offsets.size() != weights.size() || offsets.empty())
      throw std::invalid_argument("tabulated kernel: offsets/weights size mismatch");
    double mass = 0.0;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      if (!(weights[i] >= 0)) throw std::invalid_argument("tabulated kernel: negative weight");
      mass += weights[i];
    }
    if (std::abs(mass - 1.0) > 1e-10)
      throw std::invalid_argument("tabulated kernel: weights sum to " + std::to_string(mass) +
                                  ", expected 1");
    // check even symmetry: every (o, w) needs a matching (-o, w)
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      bool found = false;
      for (std::size_t j = 0; j < offsets.size(); ++j) {
        if (std::abs(offsets[j] + offsets[i]) <= 1e-12 * std::max(1.0, std::abs(offsets[i])) &&
            std::abs(weights[j] - weights[i]) <= 1e-10) {
          found = true;
          break;
        }
      }
      if (!found) throw std::invalid_argument("tabulated kernel: not symmetric about 0");
    }
    return KernelSpec(TabulatedKernel{std::move(offsets), std::move(weights)});
  }

  const Family& family() const { return family_; }

  std::string family_name() const {
    if (std::holds_alternative<GaussianKernel>(family_)) return "gaussian";
    if (std::holds_alternative<LaplaceKernel>(family_)) return "laplace";
    if (std::holds_alternative<UniformKernel>(family_)) return "uniform";
    return "tabulated";
  }

  /// Density value (tabulated kernels have no density; throws for them).
  double density(double y) const {
    constexpr double inv_sqrt_2pi = 0.3989422804014326779;
    if (const auto* g = std::get_if<GaussianKernel>(&family_)) {
      const double z = y / g->sigma;
      return inv_sqrt_2pi / g->sigma * std::exp(-0.5 * z * z);
    }
    if (const auto* l = std::get_if<LaplaceKernel>(&family_))
      return 0.5 * l->beta * std::exp(-l->beta * std::abs(y));
    if (const auto* u = std::get_if<UniformKernel>(&family_))
      return std::abs(y) <= u->half_width ? 0.5 / u->half_width : 0.0;
    throw std::logic_error("tabulated kernel has no pointwise density");
  }

  /// Largest b such that the MGF is finite on (-b, b).
  double mgf_domain_bound() const {
    if (const auto* l = std::get_if<LaplaceKernel>(&family_)) return l->beta;
    return std::numeric_limits<double>::infinity();
  }

  /// The integral of e^{lambda y} against the kernel, by closed form
  /// (tabulated: exact finite sum). Throws "MGF divergent" outside the domain.
  double mgf(double lambda) const {
    if (const auto* g = std::get_if<GaussianKernel>(&family_)) {
      const double s = g->sigma * lambda;
      return std::exp(0.5 * s * s);
    }
    if (const auto* l = std::get_if<LaplaceKernel>(&family_)) {
      if (std::abs(lambda) >= l->beta)
        throw std::domain_error("MGF divergent: |lambda| >= beta for laplace kernel");
      const double b2 = l->beta * l->beta;
      return b2 / (b2 - lambda * lambda);
    }
    if (const auto* u = std::get_if<UniformKernel>(&family_)) {
      const double z = lambda * u->half_width;
      if (std::abs(z) < 1e-8) return 1.0 + z * z / 6.0;  // series limit at 0
      return std::sinh(z) / z;
    }
    const auto& t = std::get<TabulatedKernel>(family_);
    double s = 0.0;
    for (std::size_t i = 0; i < t.offsets.size(); ++i)
      s += t.weights[i] * std::exp(lambda * t.offsets[i]);
    return s;
  }

  /// A2 requires a finite MGF at every lambda; the laplace family fails that
  /// globally (its MGF has a pole at beta).
  bool finite_mgf_everywhere() const {
    return !std::holds_alternative<LaplaceKernel>(family_);
  }

 private:
  explicit KernelSpec(Family f) : family_(std::move(f)) {}
  Family family_;
};

inline double mgf(const KernelSpec& k, double lambda) { return k.mgf(lambda); }

/// Symmetric stencil on a uniform grid: weights at offsets -R..R, spacing dx,
/// nonnegative and summing to one after renormalization.
struct DiscreteKernel {
  double dx = 0.0;
  int radius = 0;
  std::vector<double> weights;  // size 2*radius+1, index j + radius
  std::string family;

  double weight(int j) const { return weights[static_cast<std::size_t>(j + radius)]; }

  /// MGF of the discrete measure: sum_j w_j e^{lambda j dx}.
  double mgf(double lambda) const {
    double s = 0.0;
    for (int j = -radius; j <= radius; ++j)
      s += weight(j) * std::exp(lambda * static_cast<double>(j) * dx);
    return s;
  }
};

/// Midpoint-rule discretization truncated at the smallest symmetric radius
/// whose omitted mass is below mass_tol, then renormalized to sum exactly one.
/// One side is computed and mirrored, so symmetry is exact by construction.
inline DiscreteKernel discretize(const KernelSpec& kernel, double dx, double mass_tol = 1e-10) {
  if (!(dx > 0)) throw std::invalid_argument("discretize: dx must be > 0");
  if (!(mass_tol > 0 && mass_tol < 1e-3))
    throw std::invalid_argument("discretize: mass_tol must lie in (0, 1e-3)");

  DiscreteKernel dk;
  dk.dx = dx;
  dk.family = kernel.family_name();

  std::vector<double> half;  // weights at offsets 0, dx, 2dx, ...

  if (const auto* tab = std::get_if<TabulatedKernel>(&kernel.family())) {
    // offsets must already sit on the grid; weights carry over unchanged
    int radius = 0;
    for (double o : tab->offsets) {
      const double jr = o / dx;
      const int j = static_cast<int>(std::llround(jr));
      if (std::abs(o - j * dx) > 1e-9 * std::max(1.0, std::abs(o)))
        throw std::invalid_argument("discretize: tabulated offset " + std::to_string(o) +
                                    " is not a multiple of dx");
      radius = std::max(radius, std::abs(j));
    }
    half.assign(static_cast<std::size_t>(radius) + 1, 0.0);
    for (std::size_t i = 0; i < tab->offsets.size(); ++i) {
      const int j = static_cast<int>(std::llround(tab->offsets[i] / dx));
      if (j >= 0) half[static_cast<std::size_t>(j)] += tab->weights[i];
    }
  } else {
    half.push_back(kernel.density(0.0) * dx);
    double sum = half[0];
    int last_nonzero = 0;
    for (int j = 1;; ++j) {
      const double w = kernel.density(j * dx) * dx;
      half.push_back(w);
      sum += 2.0 * w;
      if (w > 0.0) last_nonzero = j;
      if (1.0 - sum < mass_tol) break;
      // compact supports can exhaust their mass short of the tolerance
      if (j - last_nonzero > std::max(last_nonzero, 16)) {
        half.resize(static_cast<std::size_t>(last_nonzero) + 1);
        break;
      }
      if (j > (1 << 22))
        throw std::runtime_error("discretize: mass tolerance unreachable (kernel too spread)");
    }
  }

  const int radius = static_cast<int>(half.size()) - 1;
  dk.radius = radius;
  dk.weights.assign(2 * static_cast<std::size_t>(radius) + 1, 0.0);
  for (int j = 0; j <= radius; ++j) {
    dk.weights[static_cast<std::size_t>(radius + j)] = half[static_cast<std::size_t>(j)];
    dk.weights[static_cast<std::size_t>(radius - j)] = half[static_cast<std::size_t>(j)];
  }

  int carrying = 0;
  double total = 0.0;
  for (double w : dk.weights) {
    if (w > 0.0) ++carrying;
    total += w;
  }
  if (carrying < 5)
    throw std::invalid_argument("discretize: grid too coarse, fewer than 5 points carry mass");
  for (double& w : dk.weights) w /= total;
  return dk;
}

inline KernelSpec to_tabulated(const DiscreteKernel& dk) {
  std::vector<double> offsets, weights;
  offsets.reserve(dk.weights.size());
  for (int j = -dk.radius; j <= dk.radius; ++j) {
    offsets.push_back(j * dk.dx);
    weights.push_back(dk.weight(j));
  }
  return KernelSpec::tabulated(std::move(offsets), std::move(weights));
}

/// Constant values used for the field beyond the two ends of the grid.
struct BoundaryExtension {
  double left = 0.0;
  double right = 0.0;
};

enum class ConvMethod { automatic, direct, fft };

/// Reusable convolution engine for a fixed kernel and field length. The FFT
/// path precomputes the kernel spectrum once; `apply` is const and allocates
/// its scratch locally, so concurrent calls are safe.
class Convolver {
 public:
  Convolver(const DiscreteKernel& kernel, std::size_t field_len,
            ConvMethod method = ConvMethod::automatic)
      : kernel_(kernel), n_(field_len) {
    if (n_ < static_cast<std::size_t>(kernel_.radius))
      throw std::invalid_argument("convolve: field shorter than kernel radius");
    const std::size_t taps = 2 * static_cast<std::size_t>(kernel_.radius) + 1;
    if (method == ConvMethod::automatic)
      method = (taps <= 32 || n_ < 256) ? ConvMethod::direct : ConvMethod::fft;
    method_ = method;
    if (method_ == ConvMethod::fft) {
      const std::size_t r = static_cast<std::size_t>(kernel_.radius);
      fft_size_ = detail::next_pow2(n_ + 4 * r + 1);
      kernel_hat_.assign(fft_size_, {0.0, 0.0});
      for (std::size_t q = 0; q < taps; ++q) kernel_hat_[q] = kernel_.weights[q];
      detail::fft_inplace(kernel_hat_, false);
    }
  }

  std::size_t field_length() const { return n_; }
  ConvMethod method() const { return method_; }

  void apply(std::span<const double> field, BoundaryExtension bc, std::span<double> out) const {
    if (field.size() != n_ || out.size() != n_)
      throw std::invalid_argument("convolve: field length does not match engine");
    const int r = kernel_.radius;
    if (method_ == ConvMethod::direct) {
      // ext(q) = field value at grid index q, constant-extended
      auto ext = [&](long q) -> double {
        if (q < 0) return bc.left;
        if (q >= static_cast<long>(n_)) return bc.right;
        return field[static_cast<std::size_t>(q)];
      };
      for (std::size_t i = 0; i < n_; ++i) {
        double acc = 0.0;
        for (int j = -r; j <= r; ++j)
          acc += kernel_.weight(j) * ext(static_cast<long>(i) - j);
        out[i] = acc;
      }
      return;
    }

    std::vector<std::complex<double>> work(fft_size_, {0.0, 0.0});
    const std::size_t ru = static_cast<std::size_t>(r);
    for (std::size_t p = 0; p < ru; ++p) work[p] = bc.left;
    for (std::size_t i = 0; i < n_; ++i) work[ru + i] = field[i];
    for (std::size_t p = 0; p < ru; ++p) work[ru + n_ + p] = bc.right;
    detail::fft_inplace(work, false);
    for (std::size_t q = 0; q < fft_size_; ++q) work[q] *= kernel_hat_[q];
    detail::fft_inplace(work, true);
    for (std::size_t i = 0; i < n_; ++i) out[i] = work[2 * ru + i].real();

    // The transform's error floor is absolute (~eps * max), which exponential
    // front dynamics would amplify ahead of the true support. Cells whose
    // output falls under a relative floor are therefore recomputed by direct
    // summation, whose error is relative to the local value.
    auto ext = [&](long q) -> double {
      if (q < 0) return bc.left;
      if (q >= static_cast<long>(n_)) return bc.right;
      return field[static_cast<std::size_t>(q)];
    };
    double maxabs = 0.0;
    for (std::size_t i = 0; i < n_; ++i) maxabs = std::max(maxabs, std::abs(out[i]));
    const double floor = 1e-12 * maxabs;
    for (std::size_t i = 0; i < n_; ++i) {
      if (std::abs(out[i]) >= floor) continue;
      double acc = 0.0;
      for (int j = -r; j <= r; ++j) acc += kernel_.weight(j) * ext(static_cast<long>(i) - j);
      out[i] = acc;
    }

    // true convolution of nonnegative data is nonnegative; drop residual noise
    if (bc.left >= 0.0 && bc.right >= 0.0 &&
        std::all_of(field.begin(), field.end(), [](double v) { return v >= 0.0; })) {
      for (std::size_t i = 0; i < n_; ++i)
        if (out[i] < 0.0) out[i] = 0.0;
    }
  }

  std::vector<double> apply(std::span<const double> field, BoundaryExtension bc) const {
    std::vector<double> out(n_);
    apply(field, bc, out);
    return out;
  }

 private:
  DiscreteKernel kernel_;
  std::size_t n_;
  ConvMethod method_ = ConvMethod::direct;
  std::size_t fft_size_ = 0;
  std::vector<std::complex<double>> kernel_hat_;
};

/// Linear (non-circular) convolution against the stencil, with the field
/// continued by the given constant values beyond the grid.
inline std::vector<double> convolve(std::span<const double> field, const DiscreteKernel& kernel,
                                    BoundaryExtension bc,
                                    ConvMethod method = ConvMethod::automatic) {
  Convolver engine(kernel, field.size(), method);
  return engine.apply(field, bc);
}

}  // namespace coinvade
