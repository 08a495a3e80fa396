#include "ksmooth/simulation.hpp"

#include "ksmooth/cv.hpp"
#include "ksmooth/error.hpp"
#include "ksmooth/estimators.hpp"
#include "ksmooth/kernel.hpp"
#include "ksmooth/parallel.hpp"
#include "ksmooth/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <optional>
#include <set>

namespace ksmooth {

namespace {

constexpr std::uint64_t kTestStream = 0x7e57;
constexpr std::uint64_t kRetryStream = 0x100000000ull;

}  // namespace

SimulationCase SimulationCase::make(CaseId id) {
  SimulationCase c;
  c.id = id;
  switch (id) {
    case CaseId::Case1:
      c.d_total = 3;
      c.d_effective = 2;
      c.index_matrix = Eigen::MatrixXd::Zero(2, 3);
      c.index_matrix(0, 0) = 1.0;
      c.index_matrix(1, 1) = 1.0;
      c.noise_sd = 0.5;
      c.noise_spec = "0.5 * N(0,1)";
      break;
    case CaseId::Case2:
      c.d_total = 10;
      c.d_effective = 2;
      c.index_matrix = Eigen::MatrixXd::Zero(2, 10);
      c.index_matrix(0, 0) = 1.0;
      c.index_matrix(0, 1) = 1.0;
      c.index_matrix(1, 2) = 1.0;
      c.noise_sd = std::sqrt(kCase2NoiseVariance);
      c.noise_spec = "N(0, Var[2 pi (X1+X2)/(1+X3)]/3)";
      break;
    case CaseId::Case3:
      c.d_total = 9;
      c.d_effective = 1;
      c.index_matrix = Eigen::MatrixXd::Zero(1, 9);
      c.index_matrix(0, 0) = 2.0;
      c.index_matrix(0, 1) = 2.0;
      c.index_matrix(0, 2) = 1.0;
      c.index_matrix(0, 3) = 1.0;
      c.noise_sd = 1.0;
      c.noise_spec = "N(0,1)";
      break;
  }
  return c;
}

SimulationCase SimulationCase::from_number(int number) {
  if (number < 1 || number > 3) throw Error(ErrorCode::InvalidConfig, "case must be 1, 2 or 3");
  return make(static_cast<CaseId>(number));
}

Eigen::MatrixXd draw_predictors(const SimulationCase& c, std::size_t n, std::uint64_t rng_seed) {
  Philox rng(rng_seed);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c.d_total));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.uniform();
  return x;
}

double true_regression(const SimulationCase& c, std::span<const double> x) {
  if (x.size() != c.d_total) throw Error(ErrorCode::DimensionMismatch, "predictor vector has the wrong length");
  constexpr double pi = std::numbers::pi;
  switch (c.id) {
    case CaseId::Case1: return std::sin(2.0 * pi * x[0]) + std::sin(pi * x[1]);
    case CaseId::Case2: return std::sin(2.0 * pi * (x[0] + x[1]) / (1.0 + x[2]));
    case CaseId::Case3: return 2.0 * (x[0] + x[1]) + x[2] + x[3];
  }
  return 0.0;
}

Dataset generate(const SimulationCase& c, std::size_t n, std::uint64_t seed) {
  if (n < 2) throw Error(ErrorCode::InsufficientData, "simulation needs n >= 2");
  Philox rng(seed);
  const auto p = static_cast<Eigen::Index>(c.d_total);
  Eigen::MatrixXd values(static_cast<Eigen::Index>(n), p + 1);
  std::vector<double> row(c.d_total);
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < p; ++j) row[static_cast<std::size_t>(j)] = values(i, j) = rng.uniform();
    values(i, p) = true_regression(c, row) + c.noise_sd * rng.normal();
  }
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
  names.emplace_back("y");
  std::vector<std::size_t> predictors(c.d_total);
  for (std::size_t j = 0; j < c.d_total; ++j) predictors[j] = j;
  return Dataset(std::move(values), std::move(names), {c.d_total}, std::move(predictors));
}

namespace {

using MultiChooser = std::function<std::vector<BandwidthMatrix>(const Dataset&)>;

std::vector<MiseReport> mise_multi(const SimulationCase& c, const std::vector<Form>& forms, std::size_t n,
                                   std::size_t replications, std::size_t test_points, std::uint64_t seed,
                                   const MultiChooser& choose) {
  if (replications < 1) throw Error(ErrorCode::InvalidConfig, "replications must be at least 1");
  if (test_points < 100) throw Error(ErrorCode::InvalidConfig, "test_points must be at least 100");
  const auto t0 = std::chrono::steady_clock::now();
  const Kernel kernel(KernelFamily::Gaussian, c.d_total);
  const std::size_t m = forms.size();

  struct Outcome {
    std::vector<double> ise;  // one per form, empty when skipped
    std::uint64_t seed = 0;
    bool retried = false;
  };
  std::vector<Outcome> outcomes(replications);
  parallel_for(replications, [&](std::size_t r) {
    Outcome& out = outcomes[r];
    for (int attempt = 0; attempt < 2; ++attempt) {
      const std::uint64_t s = derive_seed(seed, r + (attempt == 0 ? 0 : kRetryStream));
      const Dataset train = generate(c, n, s);
      std::vector<BandwidthMatrix> hs;
      try {
        hs = choose(train);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::Degenerate) throw;
        out.retried = true;
        continue;
      }
      if (hs.size() != m) throw Error(ErrorCode::DimensionMismatch, "bandwidth count does not match the forms");
      const Eigen::MatrixXd test = draw_predictors(c, test_points, derive_seed(s, kTestStream));
      std::vector<double> truth(test_points);
      for (Eigen::Index i = 0; i < test.rows(); ++i) {
        const Eigen::VectorXd x = test.row(i).transpose();
        truth[static_cast<std::size_t>(i)] = true_regression(c, {x.data(), c.d_total});
      }
      for (const auto& h : hs) {
        const auto pred = nw_regression_batch(train, kernel, h, test);
        double sum = 0.0;
        for (std::size_t i = 0; i < test_points; ++i) {
          const double e = pred[i].value - truth[i];
          sum += e * e;
        }
        out.ise.push_back(sum / static_cast<double>(test_points));
      }
      out.seed = s;
      return;
    }
  });

  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::vector<MiseReport> reports(m);
  for (std::size_t f = 0; f < m; ++f) {
    MiseReport& report = reports[f];
    report.case_id = c.number();
    report.n = n;
    report.form = forms[f];
    report.replications = replications;
    report.test_points = test_points;
    report.master_seed = seed;
    report.runtime_seconds = seconds;
    for (std::size_t r = 0; r < replications; ++r) {
      const Outcome& o = outcomes[r];
      report.retried += o.retried ? 1 : 0;
      if (o.ise.empty()) {
        ++report.skipped;
        continue;
      }
      report.per_replication.push_back(o.ise[f]);
      report.seeds.push_back(o.seed);
      report.indices.push_back(r);
    }
    const std::size_t kept = report.per_replication.size();
    if (kept > 0) {
      double sum = 0.0;
      for (double v : report.per_replication) sum += v;
      report.mise = sum / static_cast<double>(kept);
      if (kept > 1) {
        double ss = 0.0;
        for (double v : report.per_replication) ss += (v - report.mise) * (v - report.mise);
        report.sd = std::sqrt(ss / static_cast<double>(kept - 1));
      }
    }
  }
  return reports;
}

}  // namespace

MiseReport estimate_mise(const SimulationCase& c, Form form, std::size_t n, std::size_t replications,
                         std::size_t test_points, std::uint64_t seed, const OptimizerConfig& config) {
  config.validate();
  const Kernel kernel(KernelFamily::Gaussian, c.d_total);
  return estimate_mise_with(c, form, n, replications, test_points, seed, [&](const Dataset& data) {
    return select_bandwidth(data, Task::Regression, Criterion::LeastSquares, form, kernel, config).bandwidth;
  });
}

MiseReport estimate_mise_with(const SimulationCase& c, Form form, std::size_t n, std::size_t replications,
                              std::size_t test_points, std::uint64_t seed, const BandwidthChooser& choose) {
  return mise_multi(c, {form}, n, replications, test_points, seed, [&](const Dataset& data) {
    return std::vector<BandwidthMatrix>{choose(data)};
  }).front();
}

std::vector<MiseReport> estimate_mise_nested(const SimulationCase& c, Form finest, std::size_t n,
                                             std::size_t replications, std::size_t test_points, std::uint64_t seed,
                                             const OptimizerConfig& config) {
  config.validate();
  const Kernel kernel(KernelFamily::Gaussian, c.d_total);
  std::vector<Form> forms;
  for (Form f : {Form::Scalar, Form::Diagonal, Form::FullSymmetric}) {
    if (c.d_total == 1 && f == Form::Scalar && finest != Form::Scalar) continue;
    forms.push_back(f);
    if (f == finest) break;
  }
  return mise_multi(c, forms, n, replications, test_points, seed, [&](const Dataset& data) {
    std::vector<BandwidthMatrix> hs;
    for (auto& s : select_bandwidth_path(data, Task::Regression, Criterion::LeastSquares, finest, kernel, config))
      hs.push_back(s.bandwidth);
    return hs;
  });
}

void to_json(nlohmann::json& j, const MiseReport& r) {
  j = nlohmann::json{{"case", r.case_id},
                     {"n", r.n},
                     {"form", form_name(r.form)},
                     {"replications", r.replications},
                     {"kept", r.per_replication.size()},
                     {"retried", r.retried},
                     {"skipped", r.skipped},
                     {"test_points", r.test_points},
                     {"seed", r.master_seed},
                     {"mise", r.mise},
                     {"sd", r.sd},
                     {"per_replication", r.per_replication},
                     {"runtime_seconds", r.runtime_seconds}};
}

RateFit fit_rate(std::span<const std::size_t> n_values, std::span<const double> mise_values) {
  if (n_values.size() != mise_values.size())
    throw Error(ErrorCode::DimensionMismatch, "n and mise lists differ in length");
  const std::set<std::size_t> distinct(n_values.begin(), n_values.end());
  if (distinct.size() < 3) throw Error(ErrorCode::InsufficientData, "rate fit needs at least three distinct n");
  const auto m = static_cast<Eigen::Index>(n_values.size());
  Eigen::MatrixXd design(m, 2);
  Eigen::VectorXd target(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double v = mise_values[static_cast<std::size_t>(i)];
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::NonpositiveValue, "mise values must be positive");
    design(i, 0) = 1.0;
    design(i, 1) = std::log(static_cast<double>(n_values[static_cast<std::size_t>(i)]));
    target[i] = std::log(v);
  }
  const Eigen::Vector2d beta = design.colPivHouseholderQr().solve(target);
  const Eigen::VectorXd resid = target - design * beta;
  const double ss_tot = (target.array() - target.mean()).square().sum();
  RateFit fit;
  fit.n_values.assign(n_values.begin(), n_values.end());
  fit.mise_values.assign(mise_values.begin(), mise_values.end());
  fit.intercept = beta[0];
  fit.slope = beta[1];
  fit.r_squared = ss_tot > 0.0 ? std::clamp(1.0 - resid.squaredNorm() / ss_tot, 0.0, 1.0) : 1.0;
  return fit;
}

RateFit fit_rate(std::span<const MiseReport> reports) {
  if (reports.empty()) throw Error(ErrorCode::InsufficientData, "rate fit needs at least three distinct n");
  std::vector<std::size_t> ns;
  std::vector<double> mises;
  for (const auto& r : reports) {
    if (r.case_id != reports.front().case_id || r.form != reports.front().form)
      throw Error(ErrorCode::InvalidConfig, "rate fit needs reports of one case and form");
    ns.push_back(r.n);
    mises.push_back(r.mise);
  }
  return fit_rate(ns, mises);
}

void to_json(nlohmann::json& j, const RateFit& r) {
  j = nlohmann::json{{"n_values", r.n_values},
                     {"mise_values", r.mise_values},
                     {"slope", r.slope},
                     {"intercept", r.intercept},
                     {"r_squared", r.r_squared}};
}

}  // namespace ksmooth
