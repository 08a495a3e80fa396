#include "oracles.hpp"

#include "ksmooth/error.hpp"
#include "ksmooth/kernel.hpp"
#include "ksmooth/random.hpp"

#include <doctest.h>

using namespace ksmooth;
using oracle::Mat;
using oracle::Vec;

namespace {

double eval(const Kernel& k, const Vec& u) { return k.eval(std::span<const double>(u.data(), static_cast<std::size_t>(u.size()))); }

}  // namespace

TEST_SUITE("kernel") {

TEST_CASE("values at the origin") {
  const double z2[2] = {0, 0};
  CHECK(Kernel::gaussian(2).eval(z2) == doctest::Approx(0.15915494309189535).epsilon(1e-15));
  const double z3[3] = {0, 0, 0};
  CHECK(Kernel::epanechnikov(3).eval(z3) == 0.421875);
  CHECK(Kernel::epanechnikov(3).value_at_zero() == 0.421875);
}

TEST_CASE("closed forms agree with the naive kernels") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index d = 1 + t % 4;
    const Vec u = oracle::random_matrix(rng, d, 1, -1.5, 1.5);
    CHECK(oracle::rel_err(eval(Kernel::gaussian(static_cast<std::size_t>(d)), u), oracle::gaussian(u)) < 1e-14);
    CHECK(eval(Kernel::epanechnikov(static_cast<std::size_t>(d)), u) ==
          doctest::Approx(oracle::epanechnikov(u)).epsilon(1e-14));
  }
}

TEST_CASE("gaussian is rotation invariant") {
  std::mt19937_64 rng(2);
  const Kernel k = Kernel::gaussian(3);
  for (int t = 0; t < 100; ++t) {
    const Eigen::HouseholderQR<Mat> qr(oracle::random_matrix(rng, 3, 3));
    const Mat r = qr.householderQ();
    const Vec u = oracle::random_matrix(rng, 3, 1, -2.0, 2.0);
    CHECK(std::abs(eval(k, u) - eval(k, r * u)) < 1e-14);
  }
}

TEST_CASE("scaled_eval") {
  const Kernel k1 = Kernel::gaussian(1);
  const double two[1] = {2.0};
  CHECK(scaled_eval(k1, BandwidthMatrix::scalar(2.0, 1), two) == doctest::Approx(0.24197072451914337).epsilon(1e-15));

  std::mt19937_64 rng(3);
  const Kernel k3 = Kernel::gaussian(3);
  const double zero[3] = {0, 0, 0};
  const auto h = BandwidthMatrix::from_matrix(oracle::random_regular(rng, 3));
  CHECK(scaled_eval(k3, h, zero) == k3.value_at_zero());

  const double diff[3] = {0.7, -1.2, 3.0};
  const auto huge = BandwidthMatrix::from_matrix(1e6 * oracle::random_spd(rng, 3));
  CHECK(std::abs(scaled_eval(k3, huge, diff) - k3.value_at_zero()) < 1e-9);

  // Scalar H: bit for bit the same as dividing by h.
  for (double s : {0.3, 1.7, 25.0}) {
    const double u[3] = {0.7 / s, -1.2 / s, 3.0 / s};
    CHECK(scaled_eval(k3, BandwidthMatrix::scalar(s, 3), diff) == k3.eval(u));
  }
}

TEST_CASE("marginal values at zero") {
  CHECK(Kernel::gaussian(3).marginal_at_zero(1) == doctest::Approx(0.3989422804014327).epsilon(1e-15));
  CHECK(Kernel::epanechnikov(2).marginal_at_zero(2) == 0.5625);
  CHECK(Kernel::gaussian(4).marginal_at_zero(4) == Kernel::gaussian(4).value_at_zero());
  CHECK(Kernel::epanechnikov(4).marginal_at_zero(4) == Kernel::epanechnikov(4).value_at_zero());

  // Trapezoid over [-8, 8] of k(z, 0).
  const Kernel k = Kernel::gaussian(2);
  const int steps = 16000;
  double s = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double u[2] = {-8.0 + 16.0 * i / steps, 0.0};
    s += (i == 0 || i == steps ? 0.5 : 1.0) * k.eval(u);
  }
  s *= 16.0 / steps;
  CHECK(std::abs(s - k.marginal_at_zero(1)) < 1e-6);

  CHECK_THROWS_AS(k.marginal_at_zero(0), Error);
  CHECK_THROWS_AS(k.marginal_at_zero(3), Error);
}

TEST_CASE("normalization by quadrature and importance sampling") {
  for (KernelFamily fam : {KernelFamily::Gaussian, KernelFamily::Epanechnikov}) {
    const double r = fam == KernelFamily::Gaussian ? 7.0 : 1.0;
    for (std::size_t d = 1; d <= 3; ++d) {
      const Kernel k(fam, d);
      const int m = d == 3 ? 80 : 400;
      const double h = 2.0 * r / m;
      double s = 0.0;
      std::vector<int> idx(d, 0);
      std::vector<double> u(d);
      while (true) {
        for (std::size_t j = 0; j < d; ++j) u[j] = -r + (idx[j] + 0.5) * h;
        s += k.eval(u);
        std::size_t j = 0;
        while (j < d && ++idx[j] == m) idx[j++] = 0;
        if (j == d) break;
      }
      CHECK(std::abs(s * std::pow(h, static_cast<double>(d)) - 1.0) < 0.01);
    }
    // d = 5: sample u uniformly on the support box (Epanechnikov) or from a wider normal (Gaussian).
    const std::size_t d = 5;
    const Kernel k(fam, d);
    Philox rng(99);
    const int draws = 200000;
    double s = 0.0;
    std::vector<double> u(d);
    for (int t = 0; t < draws; ++t) {
      double w = 1.0;
      for (std::size_t j = 0; j < d; ++j) {
        if (fam == KernelFamily::Gaussian) {
          const double sd = 1.5;
          u[j] = sd * rng.normal();
          w *= std::exp(-0.5 * u[j] * u[j] / (sd * sd)) / (sd * std::sqrt(2.0 * std::numbers::pi));
        } else {
          u[j] = 2.0 * rng.uniform() - 1.0;
          w *= 0.5;
        }
      }
      s += k.eval(u) / w;
    }
    CHECK(std::abs(s / draws - 1.0) < 0.01);
  }
}

TEST_CASE("assumption checks") {
  for (std::size_t d = 1; d <= 4; ++d) {
    const auto r = verify_assumptions(Kernel::gaussian(d));
    CHECK(r.all_passed());
    CHECK_FALSE(r.boundary_limited);
  }
  const auto e = verify_assumptions(Kernel::epanechnikov(1));
  CHECK(e.gradient_at_zero_ok);
  CHECK(e.value_at_zero_ok);
  CHECK(e.smooth_at_origin);
  CHECK(e.boundary_limited);
  CHECK(e.odd_moment_ok);

  const Kernel g = Kernel::gaussian(2);
  const auto shifted = verify_assumptions(
      [&](std::span<const double> u) {
        const double v[2] = {u[0] - 0.1, u[1]};
        return g.eval(v);
      },
      2);
  CHECK_FALSE(shifted.odd_moment_ok);
  CHECK_FALSE(shifted.gradient_at_zero_ok);
  // Direct quadrature of the shifted integrand: 0.1 * k_1(0).
  CHECK(shifted.odd_moment == doctest::Approx(0.1 * g.marginal_at_zero(1)).epsilon(1e-6));
}

TEST_CASE("names") {
  CHECK(parse_kernel("gaussian") == KernelFamily::Gaussian);
  CHECK(kernel_name(KernelFamily::Epanechnikov) == "epanechnikov");
  CHECK_THROWS_AS(parse_kernel("box"), Error);
}

}  // TEST_SUITE
