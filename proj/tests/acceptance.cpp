// Acceptance checks, one PASS/FAIL line each.
//
//   ksmooth_acceptance                 all short checks
//   ksmooth_acceptance ID...           the named checks
//   ksmooth_acceptance --long          everything, including the multi-hour simulations
//   ksmooth_acceptance --list

#include "oracles.hpp"

#include "ksmooth/bandwidth.hpp"
#include "ksmooth/cv.hpp"
#include "ksmooth/estimators.hpp"
#include "ksmooth/random.hpp"
#include "ksmooth/simulation.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace ksmooth;
using oracle::Mat;
using oracle::Vec;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Check {
  std::string id;
  std::string title;
  bool slow = false;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::span<const double> as_span(const Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

Mat uniform_matrix(std::uint64_t seed, Eigen::Index rows, Eigen::Index cols) {
  Philox rng(seed);
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform();
  return m;
}

Dataset regression_data(std::uint64_t seed, Eigen::Index n, Eigen::Index d2) {
  Mat v = uniform_matrix(seed, n, d2 + 1);
  Philox rng(seed ^ 0xabcdef);
  for (Eigen::Index i = 0; i < n; ++i) v(i, 0) = std::sin(4.0 * v(i, 1)) + 0.3 * rng.normal();
  return Dataset::with_response(std::move(v), 0);
}

oracle::Family fam(KernelFamily f) {
  return f == KernelFamily::Gaussian ? oracle::Family::Gaussian : oracle::Family::Epanechnikov;
}

double diameter(const Mat& x) {
  double d = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = i + 1; j < x.rows(); ++j) d = std::max(d, (x.row(i) - x.row(j)).norm());
  return d;
}

constexpr std::size_t kTestPoints = 1000;

Outcome case1_band() {
  const auto r = estimate_mise(SimulationCase::make(CaseId::Case1), Form::Diagonal, 300, 50, kTestPoints, 7,
                               OptimizerConfig{});
  return {r.mise >= 0.02 && r.mise <= 0.10,
          fmt("MISE %.4f (sd %.4f, %zu kept) in [0.02, 0.10]", r.mise, r.sd, r.per_replication.size())};
}

Outcome case3_ordering() {
  int diag_wins = 0, full_wins = 0, both = 0;
  std::ostringstream cells;
  for (std::uint64_t m = 0; m < 10; ++m) {
    const auto reports = estimate_mise_nested(SimulationCase::make(CaseId::Case3), Form::FullSymmetric, 1000, 30,
                                              kTestPoints, derive_seed(1000, m), OptimizerConfig{});
    const double s = reports[0].mise, dg = reports[1].mise, f = reports[2].mise;
    diag_wins += dg < s;
    full_wins += f < dg;
    both += dg < s && f < dg;
    cells << fmt(" [%.3f %.3f %.3f]", s, dg, f);
    std::fprintf(stderr, "  macro %llu: scalar %.4f diagonal %.4f full %.4f\n", static_cast<unsigned long long>(m), s,
                 dg, f);
  }
  return {diag_wins >= 7 && full_wins >= 7,
          fmt("diag<scalar %d/10, full<diag %d/10 (both %d/10), need >= 7 each;", diag_wins, full_wins, both) +
              cells.str()};
}

Outcome rate() {
  std::vector<MiseReport> reports;
  for (std::size_t n : {100, 300, 1000, 3000}) {
    reports.push_back(
        estimate_mise(SimulationCase::make(CaseId::Case3), Form::Diagonal, n, 30, kTestPoints, 11, OptimizerConfig{}));
    std::fprintf(stderr, "  n %zu: MISE %.5f (%.0f s)\n", n, reports.back().mise, reports.back().runtime_seconds);
  }
  const RateFit fit = fit_rate(reports);
  return {fit.slope < -0.40, fmt("slope %.3f (R^2 %.3f) < -0.40; MISE %.4f %.4f %.4f %.4f", fit.slope,
                                 fit.r_squared, fit.mise_values[0], fit.mise_values[1], fit.mise_values[2],
                                 fit.mise_values[3])};
}

Outcome shrinkage() {
  int flagged[3] = {0, 0, 0};
  const Kernel k = Kernel::gaussian(3);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Dataset data = generate(SimulationCase::make(CaseId::Case1), 1000, seed);
    const auto s = select_bandwidth(data, Task::Regression, Criterion::LeastSquares, Form::Diagonal, k, OptimizerConfig{});
    for (int j = 0; j < 3; ++j) flagged[j] += s.divergent_flags[static_cast<std::size_t>(j)];
  }
  return {flagged[2] >= 12 && flagged[0] <= 2 && flagged[1] <= 2,
          fmt("flagged over 20 seeds: h1 %d, h2 %d, h3 %d (need h3 >= 12, h1 and h2 <= 2)", flagged[0], flagged[1],
              flagged[2])};
}

Outcome lemma1_limit() {
  const Mat x = uniform_matrix(77, 50, 3);
  const double h = 1e6 * diameter(x);
  const auto bw = BandwidthMatrix::scalar(h, 3);
  const Kernel k = Kernel::gaussian(3);
  const Dataset data = Dataset::unlabelled(x);
  double worst = 0.0;
  for (int q = 0; q < 10; ++q) {
    const Vec p = uniform_matrix(900 + static_cast<std::uint64_t>(q), 3, 1) * 2.0;
    worst = std::max(worst, std::abs(bw.abs_determinant() * kde(data, k, bw, as_span(p)).value - k.value_at_zero()));
  }
  return {worst < 1e-6, fmt("max |det(H) f(x) - k(0)| = %.3e < 1e-6", worst)};
}

Outcome nw_limit() {
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const auto d2 = static_cast<Eigen::Index>(1 + t % 4);
    const Dataset data = regression_data(300 + static_cast<std::uint64_t>(t), 10 + 5 * t, d2);
    const Mat x = data.predictors();
    const double h = 1e6 * std::max(diameter(x), 1e-12);
    std::vector<double> diag(static_cast<std::size_t>(d2));
    for (Eigen::Index j = 0; j < d2; ++j) diag[static_cast<std::size_t>(j)] = h * (1.0 + 0.5 * static_cast<double>(j));
    const auto bw = BandwidthMatrix::diagonal(diag);
    const Kernel k = Kernel::gaussian(static_cast<std::size_t>(d2));
    const double mean = data.response().mean();
    for (int q = 0; q < 5; ++q) {
      const Vec p = uniform_matrix(700 + static_cast<std::uint64_t>(q + 10 * t), d2, 1);
      worst = std::max(worst, oracle::rel_err(nw_regression(data, k, bw, as_span(p)).value, mean));
    }
  }
  return {worst < 1e-9, fmt("max relative gap to the sample mean %.3e < 1e-9 (20 datasets x 5 queries)", worst)};
}

Outcome equivariance() {
  std::mt19937_64 rng(31);
  double worst_kde = 0.0, worst_nw = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Eigen::Index d = 1 + t % 4;
    const Mat x = oracle::random_matrix(rng, 15, d);
    const Mat dmat = oracle::random_regular(rng, d);
    const Mat hm = 0.5 * oracle::random_regular(rng, d);
    const Vec q = oracle::random_matrix(rng, d, 1);
    const Kernel k = Kernel::gaussian(static_cast<std::size_t>(d));
    const auto h = BandwidthMatrix::from_matrix(hm);
    const auto dh = BandwidthMatrix::from_matrix(dmat * hm);
    const Mat xt = x * dmat.transpose();
    const Vec qt = dmat * q;
    const double raw = kde(Dataset::unlabelled(x), k, h, as_span(q)).value;
    const double tr = kde(Dataset::unlabelled(xt), k, dh, as_span(qt)).value;
    worst_kde = std::max(worst_kde, oracle::rel_err(tr, raw / std::abs(oracle::cofactor_det(dmat))));
    Mat reg(15, d + 1), regt(15, d + 1);
    const Vec y = oracle::random_matrix(rng, 15, 1);
    reg << y, x;
    regt << y, xt;
    const double m = nw_regression(Dataset::with_response(reg, 0), k, h, as_span(q)).value;
    const double mt = nw_regression(Dataset::with_response(regt, 0), k, dh, as_span(qt)).value;
    worst_nw = std::max(worst_nw, oracle::rel_err(mt, m));
  }
  return {worst_kde < 1e-12 && worst_nw < 1e-12,
          fmt("100 triples: kde max rel err %.2e, nw max rel err %.2e (< 1e-12)", worst_kde, worst_nw)};
}

Outcome schur() {
  std::mt19937_64 rng(12);
  double worst_xi = 0.0, worst_ups = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Eigen::Index d = 2 + t % 7;
    const Eigen::Index d1 = 1 + (t / 7) % (d - 1);
    const auto h = BandwidthMatrix::from_matrix(oracle::random_regular(rng, d));
    const BlockPartition split({static_cast<std::size_t>(d1), static_cast<std::size_t>(d - d1)});
    const auto s = schur_blocks(h, split);
    const double det_h = std::abs(oracle::cofactor_det(h.entries()));
    const double det_h11 = std::abs(oracle::cofactor_det(h.entries().topLeftCorner(d1, d1)));
    const double det_h22 = std::abs(oracle::cofactor_det(h.entries().bottomRightCorner(d - d1, d - d1)));
    worst_xi = std::max(worst_xi, oracle::rel_err(det_h * std::abs(oracle::cofactor_det(s.xi_inverse)), det_h22));
    worst_ups = std::max(worst_ups, oracle::rel_err(det_h11 * std::abs(oracle::cofactor_det(s.upsilon)), det_h));
  }
  return {worst_xi < 1e-10 && worst_ups < 1e-10,
          fmt("1000 matrices, d 2..8: |H||Xi^-1| vs |H22| %.2e, |H11||Ups| vs |H| %.2e (< 1e-10)", worst_xi, worst_ups)};
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> pick_n(5, 20);
  int cases = 0, failures = 0;
  double worst = 0.0;
  auto record = [&](double err) {
    ++cases;
    worst = std::max(worst, err);
    failures += !(err < 1e-12);
  };
  for (int t = 0; t < 240; ++t) {
    const auto n = static_cast<Eigen::Index>(pick_n(rng));
    const Eigen::Index d = 2 + t % 2;
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
    if (lr.excluded == 0)
      record(oracle::rel_err(lr.value, oracle::lscv_regression(of, data.predictors(), data.response(), h2)));
    const auto lc = lcv_conditional_density_detail(data, split, kj, bj);
    if (lc.excluded == 0) record(oracle::rel_err(lc.value, oracle::lcv_conditional(of, data.joint(), 1, hj)));
    const auto ls = lscv_conditional_density_detail(data, split, kj, bj);
    if (ls.excluded == 0)
      record(std::abs(ls.value - oracle::lscv_conditional(of, data.joint(), hj)) / (1.0 + std::abs(ls.value)));

    const Vec q = oracle::random_matrix(rng, d, 1, 0.0, 1.0);
    const Vec q2 = q.tail(d - 1);
    const double mo = oracle::nw(of, data.predictors(), data.response(), h2, q2);
    if (std::isfinite(mo)) record(oracle::rel_err(nw_regression(data, k2, b2, as_span(q2)).value, mo));
    const double f = kde(data, kj, bj, as_span(q)).value;
    const double fo = oracle::kde(of, data.values(), hj, q);
    record(f == fo ? 0.0 : std::abs(f - fo) / std::max(std::abs(fo), 1e-300));
    const auto c = conditional_density(data, split, kj, bj, std::span<const double>(q.data(), 1), as_span(q2));
    if (!c.degenerate && c.value > 0.0) record(oracle::rel_err(c.value, oracle::conditional(of, data.joint(), 1, hj, q)));
  }
  return {cases >= 200 && failures == 0,
          fmt("%d cases (need >= 200), %d above 1e-12, worst %.2e", cases, failures, worst)};
}

Outcome cv_grid() {
  int agree = 0;
  double worst_steps = 0.0;
  std::ostringstream misses;
  const double lo = std::log(1e-3), hi = std::log(1e3);
  const double step = (hi - lo) / 199.0;
  for (int t = 0; t < 20; ++t) {
    const auto d2 = static_cast<std::size_t>(1 + t % 3);
    const Dataset data = regression_data(8000 + static_cast<std::uint64_t>(t), 50, static_cast<Eigen::Index>(d2));
    const Kernel k = Kernel::gaussian(d2);
    const auto sel = select_bandwidth(data, Task::Regression, Criterion::LeastSquares, Form::Scalar, k, OptimizerConfig{});
    double best = kInfeasibleCriterion, arg = 0.0;
    std::size_t excluded = 0;
    for (int i = 0; i < 200; ++i) {
      const double th = lo + step * i;
      const auto v = lscv_regression_detail(data, k, BandwidthMatrix::scalar(std::exp(th), d2));
      if (v.value < best) {
        best = v.value;
        arg = th;
        excluded = v.excluded;
      }
    }
    const double steps = std::abs(std::log(sel.bandwidth.scalar_value()) - arg) / step;
    worst_steps = std::max(worst_steps, steps);
    if (steps <= 1.0) {
      ++agree;
    } else {
      misses << fmt(" [instance %d, d2=%zu: grid h %.3g with %zu/50 points excluded, cv %.4f; selected h %.3g, cv %.4f]", t,
                    d2, std::exp(arg), excluded, best, sel.bandwidth.scalar_value(), sel.criterion);
    }
  }
  return {agree == 20, fmt("%d/20 within one grid step (worst %.2f steps)", agree, worst_steps) + misses.str()};
}

Outcome conditional_normalization() {
  const Mat v = uniform_matrix(21, 80, 3);
  const Dataset data = Dataset::with_response(v, 0);
  const auto h = BandwidthMatrix::diagonal(std::vector<double>{0.1, 0.15, 0.2});
  const Kernel k = Kernel::gaussian(3);
  const auto split = response_predictor_split(data);
  double worst = 0.0;
  for (int q = 0; q < 20; ++q) {
    const double x2[2] = {0.05 * q + 0.025, 0.3 + 0.02 * q};
    // Trapezoid over the response range plus ten bandwidths on each side.
    const int steps = 4000;
    const double lo = -1.0, hi = 2.0, dy = (hi - lo) / steps;
    double s = 0.0;
    for (int i = 0; i <= steps; ++i) {
      const double y[1] = {lo + dy * i};
      s += (i == 0 || i == steps ? 0.5 : 1.0) * conditional_density(data, split, k, h, y, x2).value;
    }
    worst = std::max(worst, std::abs(s * dy - 1.0));
  }
  return {worst <= 0.02, fmt("20 conditioning points, max |integral - 1| = %.2e <= 0.02", worst)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Check> checks = {
      {"case1_band", "Case 1 MISE band (n=300, diagonal, 50 reps)", false, case1_band},
      {"case3_ordering", "Case 3 form ordering (n=1000, 10 x 30 reps)", true, case3_ordering},
      {"rate", "Case 3 effective-dimension rate (n=100..3000, 30 reps)", true, rate},
      {"shrinkage", "Irrelevant-variable shrinkage (Case 1, n=1000, seeds 1..20)", false, shrinkage},
      {"lemma1_limit", "Huge-bandwidth density limit", false, lemma1_limit},
      {"nw_limit", "Huge-bandwidth regression limit", false, nw_limit},
      {"equivariance", "Linear equivariance of kde and nw", false, equivariance},
      {"schur", "Block determinant identities", false, schur},
      {"oracle", "Oracle equivalence of estimators and criteria", false, oracle_equivalence},
      {"cv_grid", "Scalar selection vs 200-point grid", false, cv_grid},
      {"cond_normalization", "Conditional density normalization", false, conditional_normalization},
  };

  CLI::App app{"ksmooth acceptance checks"};
  std::vector<std::string> ids;
  bool include_slow = false, list = false;
  app.add_option("ids", ids, "checks to run");
  app.add_flag("--long", include_slow, "include the multi-hour simulation checks");
  app.add_flag("--list", list, "list check ids");
  CLI11_PARSE(app, argc, argv);

  if (list) {
    for (const auto& c : checks) std::printf("%-20s %s%s\n", c.id.c_str(), c.title.c_str(), c.slow ? " [long]" : "");
    return 0;
  }
  for (const auto& id : ids)
    if (std::none_of(checks.begin(), checks.end(), [&](const Check& c) { return c.id == id; })) {
      std::fprintf(stderr, "unknown check '%s'\n", id.c_str());
      return 2;
    }

  int failed = 0;
  for (const auto& c : checks) {
    const bool named = std::find(ids.begin(), ids.end(), c.id) != ids.end();
    if (!(named || (ids.empty() && (include_slow || !c.slow)))) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %-20s %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id.c_str(), c.title.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
