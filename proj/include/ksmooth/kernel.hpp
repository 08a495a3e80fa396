#pragma once

#include "ksmooth/bandwidth.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string_view>

namespace ksmooth {

enum class KernelFamily { Gaussian, Epanechnikov };

std::string_view kernel_name(KernelFamily family);
KernelFamily parse_kernel(std::string_view name);

/// Normalized multivariate product kernel.
///
///   Gaussian:      (2 pi)^{-d/2} exp(-|u|^2 / 2)      (spherically symmetric)
///   Epanechnikov:  prod_j max(0, 0.75 (1 - u_j^2))
///
/// Both are products of even univariate factors, so integrating out any subset
/// of coordinates yields the same family in the remaining dimension.
class Kernel {
 public:
  Kernel(KernelFamily family, std::size_t dim);

  static Kernel gaussian(std::size_t dim) { return {KernelFamily::Gaussian, dim}; }
  static Kernel epanechnikov(std::size_t dim) { return {KernelFamily::Epanechnikov, dim}; }

  KernelFamily family() const { return family_; }
  std::size_t dim() const { return dim_; }

  double eval(std::span<const double> u) const;
  double value_at_zero() const { return normalization_; }

  /// k_m(0): the kernel with its first dim-m coordinates integrated out, at 0.
  double marginal_at_zero(std::size_t keep_last) const;

  /// The marginal kernel over the last `keep_last` coordinates.
  Kernel marginal(std::size_t keep_last) const;

  /// Multiplier such that eval(u) == normalization() * unnormalized(u).
  double normalization() const { return normalization_; }

  /// Squared radius beyond which the Gaussian profile is taken as exactly 0
  /// (exp(-q/2) would be subnormal).
  static constexpr double kGaussianCutoff = 1416.0;
  /// Unnormalized Gaussian exp(-q/2) from the squared norm q, for inner loops.
  static double gaussian_profile(double q) { return q > kGaussianCutoff ? 0.0 : std::exp(-0.5 * q); }

  /// Unnormalized Epanechnikov product prod_j (1 - u_j^2)_+ of a difference a - b.
  static double epanechnikov_profile(const double* a, const double* b, std::size_t p) {
    double v = 1.0;
    for (std::size_t k = 0; k < p; ++k) {
      const double u = a[k] - b[k];
      const double t = 1.0 - u * u;
      if (t <= 0.0) return 0.0;
      v *= t;
    }
    return v;
  }

  bool operator==(const Kernel&) const = default;

 private:
  KernelFamily family_;
  std::size_t dim_;
  double normalization_;
};

/// k(H^{-1} diff). For Scalar H this is exactly eval(diff / h).
double scaled_eval(const Kernel& kernel, const BandwidthMatrix& h, std::span<const double> diff);

/// Outcome of the numerical checks of the smoothness/symmetry conditions used by
/// the large-bandwidth limit results.
struct AssumptionReport {
  double value_at_zero = 0.0;
  bool value_at_zero_ok = false;  // finite and positive

  double gradient_at_zero_max = 0.0;  // central differences, step 1e-4
  bool gradient_at_zero_ok = false;   // max-norm < 1e-6

  /// Partial gradient in the trailing coordinates at (z1, 0) over a grid of z1
  /// (leading coordinate). Vacuous (0, ok) when dim == 1.
  double partial_gradient_max = 0.0;
  bool partial_gradient_ok = false;

  bool smooth_at_origin = false;  // second differences stable under step halving
  bool boundary_limited = false;  // kinks away from the origin (compact support)

  double odd_moment = 0.0;  // integral of z1 k(z1, 0) dz1
  bool odd_moment_ok = false;  // |odd_moment| < 1e-8

  bool all_passed() const {
    return value_at_zero_ok && gradient_at_zero_ok && partial_gradient_ok && smooth_at_origin && odd_moment_ok;
  }
};

using KernelFunction = std::function<double(std::span<const double>)>;

AssumptionReport verify_assumptions(const Kernel& kernel);
/// Same checks for an arbitrary kernel-like function on R^dim. `support_radius`
/// bounds the quadrature range of the odd-moment integral.
AssumptionReport verify_assumptions(const KernelFunction& k, std::size_t dim, double support_radius = 10.0);

}  // namespace ksmooth
