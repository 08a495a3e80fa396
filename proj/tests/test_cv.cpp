#include "oracles.hpp"

#include "ksmooth/cv.hpp"
#include "ksmooth/error.hpp"
#include "ksmooth/estimators.hpp"
#include "ksmooth/random.hpp"
#include "ksmooth/simulation.hpp"

#include <doctest.h>

using namespace ksmooth;
using oracle::Mat;
using oracle::Vec;

namespace {

Mat uniform_matrix(std::uint64_t seed, Eigen::Index rows, Eigen::Index cols) {
  Philox rng(seed);
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform();
  return m;
}

Dataset regression_data(std::uint64_t seed, Eigen::Index n, Eigen::Index d2, double noise = 0.3) {
  Mat v = uniform_matrix(seed, n, d2 + 1);
  Philox rng(seed ^ 0xabcdef);
  for (Eigen::Index i = 0; i < n; ++i) v(i, 0) = std::sin(4.0 * v(i, 1)) + noise * rng.normal();
  return Dataset::with_response(std::move(v), 0);
}

oracle::Family fam(KernelFamily f) {
  return f == KernelFamily::Gaussian ? oracle::Family::Gaussian : oracle::Family::Epanechnikov;
}

}  // namespace

TEST_SUITE("cv") {

TEST_CASE("lscv regression examples") {
  Mat v = uniform_matrix(1, 12, 3);
  v.col(0).setConstant(1.25);
  const Dataset c = Dataset::with_response(v, 0);
  // Zero up to the rounding of a weighted mean of equal values.
  CHECK(lscv_regression(c, Kernel::gaussian(2), BandwidthMatrix::scalar(0.3, 2)) < 1e-28);

  const Dataset data = regression_data(2, 20, 2);
  const Vec y = data.response();
  const double n = 20.0;
  double want = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double m = (y.sum() - y[i]) / (n - 1.0);
    want += (y[i] - m) * (y[i] - m);
  }
  want /= n;
  const double var = (y.array() - y.mean()).square().sum() / (n - 1.0);
  CHECK(oracle::rel_err(want, var * (n / (n - 1.0)) * (n / (n - 1.0)) * ((n - 1.0) / n)) < 1e-12);
  CHECK(oracle::rel_err(lscv_regression(data, Kernel::gaussian(2), BandwidthMatrix::scalar(1e8, 2)), want) < 1e-9);
}

TEST_CASE("lscv regression over a scalar grid matches refitting") {
  const Dataset data = regression_data(3, 20, 1);
  const Vec y = data.response();
  const Mat x = data.predictors();
  for (double h : {0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 1e6}) {
    const double got = lscv_regression(data, Kernel::gaussian(1), BandwidthMatrix::scalar(h, 1));
    const double want = oracle::lscv_regression(oracle::Family::Gaussian, x, y, h * Mat::Identity(1, 1));
    CHECK(oracle::rel_err(got, want) < 1e-12);
  }
}

TEST_CASE("degenerate points are excluded and the sentinel marks infeasibility") {
  Mat v(6, 2);
  v << 1, 0.0, 2, 0.1, 3, 0.2, 4, 10.0, 5, 10.1, 6, 10.2;
  const Dataset data = Dataset::with_response(v, 0);
  const Kernel k = Kernel::epanechnikov(1);
  // Two clusters far apart: each point still sees its cluster mates.
  const auto ok = lscv_regression_detail(data, k, BandwidthMatrix::scalar(0.5, 1));
  CHECK(ok.excluded == 0);
  // Too narrow: every leave-one-out denominator vanishes.
  const auto bad = lscv_regression_detail(data, k, BandwidthMatrix::scalar(0.01, 1));
  CHECK(bad.excluded == 6);
  CHECK(bad.value == kInfeasibleCriterion);
  CHECK(bad.infeasible());
}

TEST_CASE("pinned two-point conditional criteria") {
  // (y, x) = (0, 0), (1, 1), H = I. Leaving one point out leaves f(y | x) = phi(y - y_other).
  // Values from tests/pinned_constants.py.
  Mat v(2, 2);
  v << 0.0, 0.0, 1.0, 1.0;
  const Dataset data = Dataset::with_response(v, 0);
  const auto split = response_predictor_split(data);
  const auto h = BandwidthMatrix::scalar(1.0, 2);
  CHECK(lscv_conditional_density(data, split, Kernel::gaussian(2), h) ==
        doctest::Approx(-0.20184665726440855612).epsilon(1e-14));
  CHECK(lcv_conditional_density(data, split, Kernel::gaussian(2), h) ==
        doctest::Approx(1.4189385332046727418).epsilon(1e-14));
}

TEST_CASE("conditional criteria: invariances") {
  const Dataset data = regression_data(5, 15, 1);
  const auto split = response_predictor_split(data);
  std::mt19937_64 rng(8);
  const auto h = BandwidthMatrix::from_matrix(0.3 * oracle::random_spd(rng, 2), Form::FullSymmetric);
  const Kernel k = Kernel::gaussian(2);

  // Permuting rows.
  Mat perm = data.values();
  for (Eigen::Index i = 0; i < perm.rows() / 2; ++i) perm.row(i).swap(perm.row(perm.rows() - 1 - i));
  const Dataset shuffled = data.with_values(perm);
  CHECK(oracle::rel_err(lscv_conditional_density(shuffled, split, k, h), lscv_conditional_density(data, split, k, h)) <
        1e-12);
  CHECK(oracle::rel_err(lcv_conditional_density(shuffled, split, k, h), lcv_conditional_density(data, split, k, h)) <
        1e-12);

  // Shifting the response.
  Mat shifted = data.values();
  shifted.col(0).array() += 3.7;
  CHECK(oracle::rel_err(lcv_conditional_density(data.with_values(shifted), split, k, h),
                        lcv_conditional_density(data, split, k, h)) < 1e-12);
}

TEST_CASE("closed-form squared integral agrees with trapezoid quadrature") {
  const Mat v = uniform_matrix(9, 10, 2);
  const Dataset data = Dataset::with_response(v, 0);
  const auto h = BandwidthMatrix::diagonal(std::vector<double>{0.2, 0.3});
  const double got = lscv_conditional_density(data, response_predictor_split(data), Kernel::gaussian(2), h);
  // The oracle's integral is a 1e-6-accurate trapezoid at worst; here it is far better.
  CHECK(std::abs(got - oracle::lscv_conditional(oracle::Family::Gaussian, data.joint(), h.entries())) < 1e-6);
}

TEST_CASE("epanechnikov conditional lscv needs a single response") {
  const Mat v = uniform_matrix(10, 10, 3);
  const Dataset data(v, {}, {0, 1}, {2});
  const auto h = BandwidthMatrix::scalar(0.5, 3);
  try {
    lscv_conditional_density(data, response_predictor_split(data), Kernel::epanechnikov(3), h);
    FAIL("expected UnsupportedDimension");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsupportedDimension);
  }
}

TEST_CASE("property: every criterion matches its naive oracle") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> pick_n(5, 20);
  int cases = 0;
  for (int t = 0; t < 240; ++t) {
    const auto n = static_cast<Eigen::Index>(pick_n(rng));
    const Eigen::Index d = 2 + t % 2;  // joint dimension for the conditional criteria
    const KernelFamily family = t % 3 == 0 ? KernelFamily::Epanechnikov : KernelFamily::Gaussian;
    const Dataset data = regression_data(5000 + static_cast<std::uint64_t>(t), n, d - 1);
    const Kernel kj(family, static_cast<std::size_t>(d));
    const Kernel k2(family, static_cast<std::size_t>(d - 1));
    const double scale = family == KernelFamily::Gaussian ? 0.4 : 1.2;
    const Mat hj = t % 2 == 0 ? Mat(scale * oracle::random_spd(rng, d)) : Mat(scale * Mat::Identity(d, d));
    const Mat h2 = scale * oracle::random_spd(rng, d - 1);
    const auto bj = BandwidthMatrix::from_matrix(hj, t % 2 == 0 ? Form::FullSymmetric : Form::General);
    const auto b2 = BandwidthMatrix::from_matrix(h2, Form::FullSymmetric);
    const auto split = response_predictor_split(data);
    const auto of = fam(family);

    const auto lr = lscv_regression_detail(data, k2, b2);
    if (lr.excluded == 0) {
      CHECK(oracle::rel_err(lr.value, oracle::lscv_regression(of, data.predictors(), data.response(), h2)) < 1e-12);
      ++cases;
    }
    const auto lc = lcv_conditional_density_detail(data, split, kj, bj);
    const auto ls = lscv_conditional_density_detail(data, split, kj, bj);
    if (lc.excluded == 0) {
      CHECK(oracle::rel_err(lc.value, oracle::lcv_conditional(of, data.joint(), 1, hj)) < 1e-12);
      ++cases;
    }
    if (ls.excluded == 0) {
      // The Gaussian oracle integrates by trapezoid, exact to rounding on this grid.
      CHECK(std::abs(ls.value - oracle::lscv_conditional(of, data.joint(), hj)) < 1e-12 * (1.0 + std::abs(ls.value)));
      ++cases;
    }

    // Estimators at a random query point.
    const Vec q = oracle::random_matrix(rng, d, 1, 0.0, 1.0);
    const double m = nw_regression(data, k2, b2, std::span<const double>(q.data() + 1, static_cast<std::size_t>(d - 1))).value;
    const Vec q2 = q.tail(d - 1);
    const double mo = oracle::nw(of, data.predictors(), data.response(), h2, q2);
    if (std::isfinite(mo)) {
      CHECK(oracle::rel_err(m, mo) < 1e-12);
      ++cases;
    }
    const double f = kde(data, kj, bj, std::span<const double>(q.data(), static_cast<std::size_t>(d))).value;
    // kde runs over storage order (y, x...), which is the joint order here.
    CHECK(std::abs(f - oracle::kde(of, data.values(), hj, q)) <= 1e-12 * std::abs(f) + 1e-300);
    ++cases;
    const auto c = conditional_density(data, split, kj, bj, std::span<const double>(q.data(), 1),
                                       std::span<const double>(q.data() + 1, static_cast<std::size_t>(d - 1)));
    if (!c.degenerate && c.value > 0.0) {
      CHECK(oracle::rel_err(c.value, oracle::conditional(of, data.joint(), 1, hj, q)) < 1e-12);
      ++cases;
    }
  }
  CHECK(cases >= 200);
  MESSAGE("oracle cases compared: " << cases);
}

TEST_CASE("nelder-mead examples") {
  OptimizerConfig cfg;
  cfg.simplex_tolerance = 1e-14;
  const double start[2] = {0.0, 0.0};
  const auto r = nelder_mead(
      [](std::span<const double> v) { return (v[0] - 1) * (v[0] - 1) + (v[1] - 2) * (v[1] - 2); }, start, cfg);
  CHECK(std::abs(r.argmin[0] - 1.0) < 1e-4);
  CHECK(std::abs(r.argmin[1] - 2.0) < 1e-4);

  // Valley flattening toward +infinity in the first coordinate.
  const auto flat = nelder_mead(
      [](std::span<const double> v) { return std::exp(-v[0]) + (v[1] - 0.5) * (v[1] - 0.5); }, start, cfg);
  CHECK(flat.argmin[0] == cfg.upper_log_cap);

  // Determinism.
  const auto again = nelder_mead(
      [](std::span<const double> v) { return std::exp(-v[0]) + (v[1] - 0.5) * (v[1] - 0.5); }, start, cfg);
  CHECK(again.argmin == flat.argmin);
  CHECK(again.evaluations == flat.evaluations);

  // Budget.
  OptimizerConfig tight;
  tight.max_evaluations = 10;
  const auto cut = nelder_mead([](std::span<const double> v) { return std::cos(v[0]) + v[1] * v[1]; }, start, tight);
  CHECK(cut.evaluations <= 10 + 2);

  OptimizerConfig bad;
  bad.restarts = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("nelder-mead on a one-dimensional lscv beats a 60-point grid") {
  const Dataset data = generate(SimulationCase::make(CaseId::Case1), 150, 17);
  const Kernel k = Kernel::gaussian(3);
  auto f = [&](std::span<const double> t) { return lscv_regression(data, k, BandwidthMatrix::scalar(std::exp(t[0]), 3)); };
  double grid_min = kInfeasibleCriterion;
  for (int i = 0; i < 60; ++i) {
    const double t = std::log(0.01) + (std::log(10.0) - std::log(0.01)) * i / 59.0;
    grid_min = std::min(grid_min, f(std::span<const double>(&t, 1)));
  }
  OptimizerConfig cfg;
  double best = kInfeasibleCriterion;
  for (double s : {0.03, 0.3, 3.0}) {
    const double start = std::log(s);
    best = std::min(best, nelder_mead(f, std::span<const double>(&start, 1), cfg).value);
  }
  CHECK(best <= grid_min + 1e-9);
}

TEST_CASE("optimizer coordinates round trip") {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 50; ++t) {
    const auto d = static_cast<std::size_t>(1 + t % 4);
    const auto h = BandwidthMatrix::from_matrix(oracle::random_spd(rng, static_cast<Eigen::Index>(d)), Form::FullSymmetric);
    const auto theta = coordinates_from_bandwidth(h);
    const auto back = bandwidth_from_coordinates(Form::FullSymmetric, theta, d);
    CHECK((back.entries() - h.entries()).norm() < 1e-12 * h.entries().norm());
  }
  const std::vector<double> dg = {0.1, 2.0};
  const auto theta = coordinates_from_bandwidth(BandwidthMatrix::diagonal(dg));
  const auto dback = bandwidth_from_coordinates(Form::Diagonal, theta, 2);
  CHECK(dback.form() == Form::Diagonal);
  CHECK(dback(0, 0) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(dback(1, 1) == doctest::Approx(2.0).epsilon(1e-15));
  // Zero off-diagonal coordinates give back a diagonal matrix.
  const std::vector<double> full = {std::log(2.0), 0.0, std::log(0.5)};
  const auto h = bandwidth_from_coordinates(Form::FullSymmetric, full, 2);
  CHECK(h(0, 0) == doctest::Approx(0.25));
  CHECK(h(1, 1) == doctest::Approx(4.0));
  CHECK(std::abs(h(0, 1)) < 1e-15);
}

TEST_CASE("scalar selection agrees with a 200-point grid") {
  const Dataset data = regression_data(51, 50, 2);
  const Kernel k = Kernel::gaussian(2);
  const auto sel = select_bandwidth(data, Task::Regression, Criterion::LeastSquares, Form::Scalar, k, OptimizerConfig{});
  const double lo = std::log(1e-3), hi = std::log(1e3);
  const double step = (hi - lo) / 199.0;
  double best = kInfeasibleCriterion, arg = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double t = lo + step * i;
    const double v = lscv_regression(data, k, BandwidthMatrix::scalar(std::exp(t), 2));
    if (v < best) {
      best = v;
      arg = t;
    }
  }
  CHECK(std::abs(std::log(sel.bandwidth.scalar_value()) - arg) <= step);
  CHECK(sel.criterion <= best + 1e-12);
}

TEST_CASE("nested forms refine the criterion") {
  const Dataset data = regression_data(61, 80, 2);
  const Kernel k = Kernel::gaussian(2);
  const auto path = select_bandwidth_path(data, Task::Regression, Criterion::LeastSquares, Form::FullSymmetric, k,
                                          OptimizerConfig{});
  REQUIRE(path.size() == 3);
  CHECK(path[0].form == Form::Scalar);
  CHECK(path[1].form == Form::Diagonal);
  CHECK(path[2].form == Form::FullSymmetric);
  CHECK(path[1].criterion <= path[0].criterion + 1e-9);
  CHECK(path[2].criterion <= path[1].criterion + 1e-9);
  // Each entry equals the standalone selection of its form.
  const auto diag = select_bandwidth(data, Task::Regression, Criterion::LeastSquares, Form::Diagonal, k, OptimizerConfig{});
  CHECK(diag.bandwidth == path[1].bandwidth);
  CHECK(diag.criterion == path[1].criterion);
}

TEST_CASE("selection is deterministic and scale equivariant") {
  const Dataset data = regression_data(71, 60, 2);
  const Kernel k = Kernel::gaussian(2);
  OptimizerConfig cfg;
  cfg.simplex_tolerance = 1e-12;
  const auto a = select_bandwidth(data, Task::Regression, Criterion::LeastSquares, Form::Diagonal, k, cfg);
  const auto b = select_bandwidth(data, Task::Regression, Criterion::LeastSquares, Form::Diagonal, k, cfg);
  CHECK(a.bandwidth == b.bandwidth);
  CHECK(a.criterion == b.criterion);
  CHECK(a.evaluations == b.evaluations);

  Mat v = data.values();
  v.col(2) *= 7.0;
  const auto c = select_bandwidth(data.with_values(v), Task::Regression, Criterion::LeastSquares, Form::Diagonal, k, cfg);
  CHECK(oracle::rel_err(c.bandwidth(0, 0), a.bandwidth(0, 0)) < 1e-3);
  if (!a.divergent_flags[1]) CHECK(oracle::rel_err(c.bandwidth(1, 1), 7.0 * a.bandwidth(1, 1)) < 1e-3);
}

TEST_CASE("irrelevant predictor diverges and the cap is behaviourally infinite") {
  const Dataset data = generate(SimulationCase::make(CaseId::Case1), 300, 5);
  const Kernel k = Kernel::gaussian(3);
  const auto sel = select_bandwidth(data, Task::Regression, Criterion::LeastSquares, Form::Diagonal, k, OptimizerConfig{});
  CHECK_FALSE(sel.divergent_flags[0]);
  CHECK_FALSE(sel.divergent_flags[1]);
  CHECK(sel.excluded_points == 0);

  std::vector<double> at_cap = {sel.bandwidth(0, 0), sel.bandwidth(1, 1), 1e8};
  std::vector<double> beyond = {sel.bandwidth(0, 0), sel.bandwidth(1, 1), 1e9};
  const Mat q = draw_predictors(SimulationCase::make(CaseId::Case1), 50, 9);
  const auto p1 = nw_regression_batch(data, k, BandwidthMatrix::diagonal(at_cap), q);
  const auto p2 = nw_regression_batch(data, k, BandwidthMatrix::diagonal(beyond), q);
  for (std::size_t i = 0; i < p1.size(); ++i) CHECK(std::abs(p1[i].value - p2[i].value) < 1e-9);
}

TEST_CASE("perfectly informative predictor") {
  Mat v = uniform_matrix(81, 40, 2);
  v.col(0) = v.col(1);
  const Dataset data = Dataset::with_response(v, 0);
  const auto sel = select_bandwidth(data, Task::Regression, Criterion::LeastSquares, Form::Scalar, Kernel::gaussian(1),
                                    OptimizerConfig{});
  CHECK(sel.criterion < 1e-3);
}

TEST_CASE("conditional density selection runs for both criteria") {
  const Dataset data = regression_data(91, 60, 1);
  for (Criterion c : {Criterion::LeastSquares, Criterion::Likelihood}) {
    const auto sel = select_bandwidth(data, Task::ConditionalDensity, c, Form::Diagonal, Kernel::gaussian(2),
                                      OptimizerConfig{});
    CHECK(std::isfinite(sel.criterion));
    CHECK(sel.bandwidth.dim() == 2);
    CHECK(sel.criterion_kind == c);
  }
  CHECK_THROWS_AS(select_bandwidth(data, Task::Regression, Criterion::Likelihood, Form::Scalar, Kernel::gaussian(1),
                                   OptimizerConfig{}),
                  Error);
}

TEST_CASE("every start infeasible raises Degenerate") {
  // Epanechnikov on two far clusters of one point each plus a pair: tiny caps force empty neighbourhoods.
  Mat v(4, 2);
  v << 1, 0.0, 2, 100.0, 3, 200.0, 4, 300.0;
  OptimizerConfig cfg;
  cfg.upper_log_cap = std::log(10.0);
  cfg.initial_scales = {1.0};
  try {
    select_bandwidth(Dataset::with_response(v, 0), Task::Regression, Criterion::LeastSquares, Form::Scalar,
                     Kernel::epanechnikov(1), cfg);
    FAIL("expected Degenerate");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Degenerate);
  }
}

}  // TEST_SUITE
