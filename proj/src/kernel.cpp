#include "ksmooth/kernel.hpp"

#include "ksmooth/error.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace ksmooth {

namespace {

constexpr double kFdStep = 1e-4;

double family_normalization(KernelFamily family, std::size_t dim) {
  const double d = static_cast<double>(dim);
  if (family == KernelFamily::Gaussian) return std::pow(2.0 * std::numbers::pi, -0.5 * d);
  return std::pow(0.75, d);
}

// Central-difference partial derivative of k at x along coordinate j.
double partial(const KernelFunction& k, std::vector<double> x, std::size_t j, double step) {
  const double x0 = x[j];
  x[j] = x0 + step;
  const double fp = k(x);
  x[j] = x0 - step;
  const double fm = k(x);
  return (fp - fm) / (2.0 * step);
}

double second_partial(const KernelFunction& k, std::vector<double> x, std::size_t j, double step) {
  const double f0 = k(x);
  const double x0 = x[j];
  x[j] = x0 + step;
  const double fp = k(x);
  x[j] = x0 - step;
  const double fm = k(x);
  return (fp - 2.0 * f0 + fm) / (step * step);
}

}  // namespace

std::string_view kernel_name(KernelFamily family) {
  return family == KernelFamily::Gaussian ? "gaussian" : "epanechnikov";
}

KernelFamily parse_kernel(std::string_view name) {
  if (name == "gaussian") return KernelFamily::Gaussian;
  if (name == "epanechnikov") return KernelFamily::Epanechnikov;
  throw Error(ErrorCode::InvalidConfig, "unknown kernel '" + std::string(name) + "'");
}

Kernel::Kernel(KernelFamily family, std::size_t dim)
    : family_(family), dim_(dim), normalization_(family_normalization(family, dim)) {
  if (dim == 0) throw Error(ErrorCode::DimensionMismatch, "kernel dimension must be positive");
}

double Kernel::eval(std::span<const double> u) const {
  if (u.size() != dim_) throw Error(ErrorCode::DimensionMismatch, "kernel argument has wrong length");
  if (family_ == KernelFamily::Gaussian) {
    double q = 0.0;
    for (double v : u) q += v * v;
    return normalization_ * gaussian_profile(q);
  }
  double v = 1.0;
  for (double x : u) v *= std::max(0.0, 0.75 * (1.0 - x * x));
  return v;
}

double Kernel::marginal_at_zero(std::size_t keep_last) const {
  if (keep_last < 1 || keep_last > dim_)
    throw Error(ErrorCode::DimensionMismatch, "marginal must keep between 1 and dim coordinates");
  if (keep_last == dim_) return normalization_;
  return family_normalization(family_, keep_last);
}

Kernel Kernel::marginal(std::size_t keep_last) const {
  if (keep_last < 1 || keep_last > dim_)
    throw Error(ErrorCode::DimensionMismatch, "marginal must keep between 1 and dim coordinates");
  return Kernel(family_, keep_last);
}

double scaled_eval(const Kernel& kernel, const BandwidthMatrix& h, std::span<const double> diff) {
  if (diff.size() != h.dim() || diff.size() != kernel.dim())
    throw Error(ErrorCode::DimensionMismatch, "scaled_eval: dimension mismatch");
  if (h.form() == Form::Scalar) {
    const double s = h.scalar_value();
    std::vector<double> u(diff.begin(), diff.end());
    for (double& v : u) v /= s;
    return kernel.eval(u);
  }
  const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(diff.data(), static_cast<Eigen::Index>(diff.size()));
  const Eigen::VectorXd u = h.solve(rhs);
  return kernel.eval(std::span<const double>(u.data(), diff.size()));
}

AssumptionReport verify_assumptions(const KernelFunction& k, std::size_t dim, double support_radius) {
  AssumptionReport r;
  const std::vector<double> origin(dim, 0.0);

  r.value_at_zero = k(origin);
  r.value_at_zero_ok = std::isfinite(r.value_at_zero) && r.value_at_zero > 0.0;

  for (std::size_t j = 0; j < dim; ++j)
    r.gradient_at_zero_max = std::max(r.gradient_at_zero_max, std::abs(partial(k, origin, j, kFdStep)));
  r.gradient_at_zero_ok = r.gradient_at_zero_max < 1e-6;

  // grad_2 k(z1, 0): trailing coordinates, leading coordinate swept over the support.
  if (dim > 1) {
    for (int s = -20; s <= 20; ++s) {
      std::vector<double> x(dim, 0.0);
      x[0] = support_radius * 0.9 * s / 20.0;
      for (std::size_t j = 1; j < dim; ++j)
        r.partial_gradient_max = std::max(r.partial_gradient_max, std::abs(partial(k, x, j, kFdStep)));
    }
  }
  r.partial_gradient_ok = r.partial_gradient_max < 1e-6;

  // Twice differentiable near 0: second differences agree across step halving.
  r.smooth_at_origin = true;
  for (std::size_t j = 0; j < dim; ++j) {
    const double a = second_partial(k, origin, j, 1e-2);
    const double b = second_partial(k, origin, j, 5e-3);
    const double scale = std::max({std::abs(a), std::abs(b), std::abs(r.value_at_zero)});
    if (!std::isfinite(a) || !std::isfinite(b) || std::abs(a - b) > 1e-3 * scale) r.smooth_at_origin = false;
  }

  // Kinks away from the origin: second differences along the leading axis jump.
  r.boundary_limited = false;
  {
    const int steps = 400;
    const double dx = support_radius / steps;
    double prev = std::nan("");
    for (int s = 1; s < steps; ++s) {
      std::vector<double> x(dim, 0.0);
      x[0] = s * dx;
      const double c2 = second_partial(k, x, 0, dx / 4.0);
      if (std::isfinite(prev)) {
        const double scale = std::max(std::abs(r.value_at_zero), 1e-300);
        if (std::abs(c2 - prev) > 50.0 * scale * dx) {
          r.boundary_limited = true;
          break;
        }
      }
      prev = c2;
    }
  }

  // Integral of z1 k(z1, 0): composite midpoint rule with nodes mirrored about 0,
  // so an even kernel cancels term by term.
  {
    const int half = 20000;
    const double dz = support_radius / half;
    double acc = 0.0;
    for (int s = 0; s < half; ++s) {
      const double z = (s + 0.5) * dz;
      std::vector<double> xp(dim, 0.0), xm(dim, 0.0);
      xp[0] = z;
      xm[0] = -z;
      acc += z * k(xp) - z * k(xm);
    }
    r.odd_moment = acc * dz;
  }
  r.odd_moment_ok = std::abs(r.odd_moment) < 1e-8;
  return r;
}

AssumptionReport verify_assumptions(const Kernel& kernel) {
  const double radius = kernel.family() == KernelFamily::Gaussian ? 10.0 : 1.5;
  return verify_assumptions([kernel](std::span<const double> u) { return kernel.eval(u); }, kernel.dim(), radius);
}

}  // namespace ksmooth
