#include "ksmooth/cv.hpp"

#include "kernel_sums.hpp"
#include "ksmooth/error.hpp"
#include "ksmooth/estimators.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>
#include <cmath>
#include <numbers>
#include <optional>

namespace ksmooth {

namespace {

constexpr double kLogFloor = -690.7755278982137;  // ln(1e-300)

double log_gaussian_norm(std::size_t dim) { return -0.5 * static_cast<double>(dim) * std::log(2.0 * std::numbers::pi); }

CriterionValue infeasible(std::size_t n, std::size_t excluded) { return {kInfeasibleCriterion, excluded, n}; }

void check_split(const Dataset& data, const BlockPartition& split, const Kernel& kernel, const BandwidthMatrix& h) {
  if (data.response_dim() == 0) throw Error(ErrorCode::NoResponseColumn, "criterion needs a response block");
  if (split.sizes.size() != 2 || split.sizes[0] != data.response_dim() || split.sizes[1] != data.predictor_dim())
    throw Error(ErrorCode::IncompatibleSplit, "split must be (response count, predictor count)");
  if (kernel.dim() != split.total() || h.dim() != split.total())
    throw Error(ErrorCode::DimensionMismatch, "kernel and bandwidth must span the joint dimension");
  if (data.n() < 2) throw Error(ErrorCode::InsufficientData, "cross-validation needs at least two observations");
}

// Leave-one-out conditional density at each observation, with degeneracy flags.
struct LooConditional {
  Eigen::VectorXd value;        // f_{-i}(Y_i | X_2i)
  Eigen::VectorXd denominator;  // f2_{-i}(X_2i)
  std::vector<bool> degenerate;
  BandwidthMatrix h22;
};

LooConditional loo_conditional(const Dataset& data, const Kernel& kernel, const BandwidthMatrix& h) {
  const std::size_t d1 = data.response_dim();
  const std::size_t d2 = data.predictor_dim();
  const std::size_t n = data.n();
  BandwidthMatrix h22 = h.block(d1, d1, d2, d2);
  const Kernel k2 = kernel.marginal(d2);

  const auto joint = detail::loo_sums(detail::scale_points(data.joint(), h), kernel.family(), nullptr);
  const auto cond = detail::loo_sums(detail::scale_points(data.predictors(), h22), kernel.family(), nullptr);

  const double count = static_cast<double>(n - 1);
  const double log_ratio =
      std::log(kernel.normalization()) - std::log(k2.normalization()) + h22.log_abs_determinant() - h.log_abs_determinant();
  const double log_inv_den = -std::log(k2.normalization()) + h22.log_abs_determinant() + std::log(count);

  LooConditional out{Eigen::VectorXd(n), Eigen::VectorXd(n), std::vector<bool>(n), std::move(h22)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double ksum2 = k2.normalization() * cond.s0[ii];
    out.denominator[ii] = cond.s0[ii] * std::exp(-log_inv_den);
    out.degenerate[i] = !(ksum2 >= count * kDenominatorFloor);
    out.value[ii] = out.degenerate[i] ? 0.0 : (joint.s0[ii] / cond.s0[ii]) * std::exp(log_ratio);
  }
  return out;
}

// Unnormalized sum_{j,l} a_j a_l G_jl with a_i = 0, for every i, as diag(A G A^T).
Eigen::VectorXd quadratic_forms(const Eigen::MatrixXd& a, const Eigen::MatrixXd& g) {
  const Eigen::MatrixXd ag = a * g;
  return ag.cwiseProduct(a).rowwise().sum();
}

// int f_{-i}(y | X_2i)^2 dy for the Gaussian kernel, for all i.
//
// With Sigma = H H^T and P = Sigma^{-1}, each joint term as a function of y is
// phi_{Sigma22}(X_2i - X_2j) * phi_S(y - Y_j - B (X_2i - X_2j)) with S = P11^{-1},
// B = -P11^{-1} P12. The product of two such y-Gaussians integrates to
// phi_{2S}(g_j - g_l) with g_j = Y_j - B X_2j, which does not depend on i.
Eigen::VectorXd gaussian_squared_integrals(const Dataset& data, const BandwidthMatrix& h, const LooConditional& loo) {
  const auto d1 = static_cast<Eigen::Index>(data.response_dim());
  const auto d2 = static_cast<Eigen::Index>(data.predictor_dim());
  const auto d = d1 + d2;
  const std::size_t n = data.n();

  // Sigma22 = H2 H2^T with H2 the conditioning rows of H; factor via QR of H2^T.
  const Eigen::MatrixXd h2t = h.entries().bottomRows(d2).transpose();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr22(h2t);
  const Eigen::MatrixXd r22 = qr22.matrixQR().topRows(d2).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd c22 = r22.transpose();  // Sigma22 = C C^T

  // P11 = W1^T W1 with W1 the response columns of H^{-1}.
  const Eigen::MatrixXd w = h.inverse();
  const Eigen::MatrixXd w1 = w.leftCols(d1);
  const Eigen::MatrixXd w2 = w.rightCols(d2);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr1(w1);
  const Eigen::MatrixXd r1 = qr1.matrixQR().topRows(d1).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd b = -qr1.solve(w2);  // -P11^{-1} P12
  // 2S = 2 R1^{-1} R1^{-T}; factor D = sqrt(2) R1^{-1}.
  const Eigen::MatrixXd r1_inv = r1.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(d1, d1));
  const Eigen::MatrixXd dfac = std::sqrt(2.0) * r1_inv;
  (void)d;

  const BandwidthMatrix c_bw = BandwidthMatrix::from_matrix(c22);
  const BandwidthMatrix d_bw = BandwidthMatrix::from_matrix(dfac);

  const Eigen::MatrixXd x2 = data.predictors();
  const Eigen::MatrixXd y = data.responses();
  const Eigen::MatrixXd g = y - x2 * b.transpose();

  const Eigen::MatrixXd a = detail::kernel_matrix(detail::scale_points(x2, c_bw), KernelFamily::Gaussian);
  Eigen::MatrixXd gk = detail::kernel_matrix(detail::scale_points(g, d_bw), KernelFamily::Gaussian);
  gk.diagonal().setOnes();
  const Eigen::VectorXd t = quadratic_forms(a, gk);

  const double count = static_cast<double>(n - 1);
  // Normalizations: a carries (2pi)^{-d2/2}/|C|, gk carries (2pi)^{-d1/2}/|D|.
  const double log_scale = 2.0 * (log_gaussian_norm(static_cast<std::size_t>(d2)) - c_bw.log_abs_determinant()) +
                           log_gaussian_norm(static_cast<std::size_t>(d1)) - d_bw.log_abs_determinant() -
                           2.0 * std::log(count);
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (loo.degenerate[i]) {
      out[ii] = 0.0;
      continue;
    }
    out[ii] = t[ii] * std::exp(log_scale) / (loo.denominator[ii] * loo.denominator[ii]);
  }
  return out;
}

// int f_{-i}(y | X_2i)^2 dy for the Epanechnikov product kernel with d1 = 1.
// On each interval between support breakpoints the integrand is a polynomial of
// degree 4d, integrated exactly by 30-point Gauss-Legendre (d <= 14).
Eigen::VectorXd epanechnikov_squared_integrals(const Dataset& data, const Kernel& kernel, const BandwidthMatrix& h,
                                               const LooConditional& loo) {
  const auto d = static_cast<Eigen::Index>(h.dim());
  const std::size_t n = data.n();
  const Eigen::MatrixXd w = h.inverse();
  const Eigen::VectorXd w0 = w.col(0);
  const Eigen::MatrixXd wrest = w.rightCols(d - 1);
  const Eigen::VectorXd y = data.response();
  const Eigen::MatrixXd x2 = data.predictors();
  const double scale = kernel.normalization() / (h.abs_determinant() * static_cast<double>(n - 1));

  using Rule = boost::math::quadrature::gauss<double, 30>;
  const auto& abscissa = Rule::abscissa();
  const auto& weights = Rule::weights();

  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  Eigen::MatrixXd offsets(static_cast<Eigen::Index>(n), d);  // b_j: u = w0 y + b_j
  std::vector<double> lo(n), hi(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (loo.degenerate[i]) continue;
    std::vector<double> breaks;
    std::vector<std::size_t> active;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const auto jj = static_cast<Eigen::Index>(j);
      const Eigen::VectorXd delta = (x2.row(ii) - x2.row(jj)).transpose();
      const Eigen::VectorXd bj = wrest * delta - w0 * y[jj];
      offsets.row(jj) = bj.transpose();
      double a = -std::numeric_limits<double>::infinity();
      double c = std::numeric_limits<double>::infinity();
      bool empty = false;
      for (Eigen::Index k = 0; k < d; ++k) {
        if (w0[k] == 0.0) {
          if (std::abs(bj[k]) >= 1.0) empty = true;
          continue;
        }
        double e1 = (-1.0 - bj[k]) / w0[k];
        double e2 = (1.0 - bj[k]) / w0[k];
        if (e1 > e2) std::swap(e1, e2);
        a = std::max(a, e1);
        c = std::min(c, e2);
      }
      if (empty || !(a < c)) continue;
      lo[j] = a;
      hi[j] = c;
      active.push_back(j);
      breaks.push_back(a);
      breaks.push_back(c);
    }
    if (active.empty()) continue;
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    auto density_at = [&](double yv) {
      double s = 0.0;
      for (auto j : active) {
        if (yv <= lo[j] || yv >= hi[j]) continue;
        const auto jj = static_cast<Eigen::Index>(j);
        double v = 1.0;
        for (Eigen::Index k = 0; k < d; ++k) {
          const double u = w0[k] * yv + offsets(jj, k);
          v *= std::max(0.0, 1.0 - u * u);
        }
        s += v;
      }
      return s;
    };

    double integral = 0.0;
    for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
      const double a = breaks[s], c = breaks[s + 1];
      const double mid = 0.5 * (a + c), half = 0.5 * (c - a);
      double acc = 0.0;
      for (std::size_t q = 0; q < abscissa.size(); ++q) {
        const double x = abscissa[q];
        const double wq = weights[q];
        if (x == 0.0) {
          const double f = density_at(mid);
          acc += wq * f * f;
        } else {
          const double fp = density_at(mid + half * x);
          const double fm = density_at(mid - half * x);
          acc += wq * (fp * fp + fm * fm);
        }
      }
      integral += acc * half;
    }
    const double f2 = loo.denominator[ii];
    out[ii] = integral * scale * scale / (f2 * f2);
  }
  return out;
}

}  // namespace

std::string_view task_name(Task task) { return task == Task::Regression ? "regression" : "cond_density"; }

Task parse_task(std::string_view name) {
  if (name == "regression") return Task::Regression;
  if (name == "cond_density" || name == "conditional_density" || name == "cond-density") return Task::ConditionalDensity;
  throw Error(ErrorCode::InvalidConfig, "unknown task '" + std::string(name) + "'");
}

std::string_view criterion_name(Criterion criterion) {
  return criterion == Criterion::LeastSquares ? "lscv" : "lcv";
}

Criterion parse_criterion(std::string_view name) {
  if (name == "lscv" || name == "least_squares") return Criterion::LeastSquares;
  if (name == "lcv" || name == "likelihood") return Criterion::Likelihood;
  throw Error(ErrorCode::InvalidConfig, "unknown criterion '" + std::string(name) + "'");
}

CriterionValue lscv_regression_detail(const Dataset& data, const Kernel& kernel, const BandwidthMatrix& h) {
  const std::size_t n = data.n();
  if (n < 2) throw Error(ErrorCode::InsufficientData, "cross-validation needs at least two observations");
  if (h.dim() != data.predictor_dim() || kernel.dim() != h.dim())
    throw Error(ErrorCode::DimensionMismatch, "bandwidth and kernel must span the predictors");
  const Eigen::VectorXd y = data.response();
  const auto sums = detail::loo_sums(detail::scale_points(data.predictors(), h), kernel.family(), &y);

  const double floor = static_cast<double>(n - 1) * kDenominatorFloor;
  std::vector<double> residuals;
  residuals.reserve(n);
  std::size_t excluded = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (!(kernel.normalization() * sums.s0[ii] >= floor)) {
      ++excluded;
      continue;
    }
    const double r = y[ii] - sums.s1[ii] / sums.s0[ii];
    residuals.push_back(r * r);
  }
  CriterionValue out{0.0, excluded, n};
  if (out.infeasible()) return infeasible(n, excluded);
  out.value = detail::pairwise_sum(residuals) / static_cast<double>(residuals.size());
  return out;
}

double lscv_regression(const Dataset& data, const Kernel& kernel, const BandwidthMatrix& h) {
  return lscv_regression_detail(data, kernel, h).value;
}

CriterionValue lscv_conditional_density_detail(const Dataset& data, const BlockPartition& split, const Kernel& kernel,
                                               const BandwidthMatrix& h) {
  check_split(data, split, kernel, h);
  if (kernel.family() == KernelFamily::Epanechnikov && data.response_dim() != 1)
    throw Error(ErrorCode::UnsupportedDimension, "Epanechnikov conditional LSCV supports a single response only");
  const std::size_t n = data.n();
  const LooConditional loo = loo_conditional(data, kernel, h);
  std::size_t excluded = 0;
  for (bool b : loo.degenerate) excluded += b ? 1 : 0;
  if (2 * excluded >= n) return infeasible(n, excluded);

  const Eigen::VectorXd sq = kernel.family() == KernelFamily::Gaussian
                                 ? gaussian_squared_integrals(data, h, loo)
                                 : epanechnikov_squared_integrals(data, kernel, h, loo);
  std::vector<double> terms;
  terms.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (loo.degenerate[i]) continue;
    const auto ii = static_cast<Eigen::Index>(i);
    terms.push_back(sq[ii] - 2.0 * loo.value[ii]);
  }
  return {detail::pairwise_sum(terms) / static_cast<double>(terms.size()), excluded, n};
}

double lscv_conditional_density(const Dataset& data, const BlockPartition& split, const Kernel& kernel,
                                const BandwidthMatrix& h) {
  return lscv_conditional_density_detail(data, split, kernel, h).value;
}

CriterionValue lcv_conditional_density_detail(const Dataset& data, const BlockPartition& split, const Kernel& kernel,
                                              const BandwidthMatrix& h) {
  check_split(data, split, kernel, h);
  const std::size_t n = data.n();
  const LooConditional loo = loo_conditional(data, kernel, h);
  std::vector<double> terms(n);
  std::size_t excluded = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = loo.value[static_cast<Eigen::Index>(i)];
    if (loo.degenerate[i] || !(v > 0.0) || !std::isfinite(v)) {
      ++excluded;
      terms[i] = -kLogFloor;
    } else {
      terms[i] = -std::max(std::log(v), kLogFloor);
    }
  }
  return {detail::pairwise_sum(terms) / static_cast<double>(n), excluded, n};
}

double lcv_conditional_density(const Dataset& data, const BlockPartition& split, const Kernel& kernel,
                               const BandwidthMatrix& h) {
  return lcv_conditional_density_detail(data, split, kernel, h).value;
}

CriterionValue evaluate_criterion(const Dataset& data, Task task, Criterion criterion, const Kernel& kernel,
                                  const BandwidthMatrix& h) {
  if (task == Task::Regression) {
    if (criterion != Criterion::LeastSquares)
      throw Error(ErrorCode::InvalidConfig, "regression supports the least-squares criterion only");
    return lscv_regression_detail(data, kernel, h);
  }
  const BlockPartition split = response_predictor_split(data);
  return criterion == Criterion::LeastSquares ? lscv_conditional_density_detail(data, split, kernel, h)
                                              : lcv_conditional_density_detail(data, split, kernel, h);
}

BandwidthMatrix bandwidth_from_coordinates(Form form, std::span<const double> theta, std::size_t d) {
  std::vector<double> params(theta.size());
  switch (form) {
    case Form::Scalar:
    case Form::Diagonal:
      for (std::size_t k = 0; k < theta.size(); ++k) params[k] = std::exp(theta[k]);
      break;
    case Form::FullSymmetric: {
      if (theta.size() != d * (d + 1) / 2) throw Error(ErrorCode::DimensionMismatch, "wrong coordinate count");
      const auto dd = static_cast<Eigen::Index>(d);
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dd, dd);
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < dd; ++r) {
        m(r, r) = std::exp(theta[k + static_cast<std::size_t>(r)]);
        k += static_cast<std::size_t>(r) + 1;
      }
      k = 0;
      for (Eigen::Index r = 0; r < dd; ++r) {
        for (Eigen::Index c = 0; c < r; ++c) m(r, c) = theta[k + static_cast<std::size_t>(c)] * m(c, c);
        k += static_cast<std::size_t>(r) + 1;
      }
      // H = (M M^T)^{-1} = M^{-T} M^{-1}
      const Eigen::MatrixXd m_inv = m.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(dd, dd));
      Eigen::MatrixXd h = m_inv.transpose() * m_inv;
      h = 0.5 * (h + h.transpose()).eval();
      return BandwidthMatrix::from_matrix(h, Form::FullSymmetric);
    }
    case Form::General: throw Error(ErrorCode::InvalidConfig, "general form has no optimizer coordinates");
  }
  return BandwidthMatrix::build(form, params, d);
}

std::vector<double> coordinates_from_bandwidth(const BandwidthMatrix& h) {
  const auto& p = h.params();
  std::vector<double> theta(p.size());
  switch (h.form()) {
    case Form::Scalar:
    case Form::Diagonal:
      for (std::size_t k = 0; k < p.size(); ++k) theta[k] = std::log(p[k]);
      break;
    case Form::FullSymmetric: {
      Eigen::MatrixXd g = h.inverse();
      g = 0.5 * (g + g.transpose()).eval();
      const Eigen::LLT<Eigen::MatrixXd> llt(g);
      if (llt.info() != Eigen::Success)
        throw Error(ErrorCode::InvalidParametrization, "bandwidth inverse is not positive definite");
      const Eigen::MatrixXd m = llt.matrixL();
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < r; ++c) theta[k + static_cast<std::size_t>(c)] = m(r, c) / m(c, c);
        theta[k + static_cast<std::size_t>(r)] = std::log(m(r, r));
        k += static_cast<std::size_t>(r) + 1;
      }
      break;
    }
    case Form::General: throw Error(ErrorCode::InvalidConfig, "general form has no optimizer coordinates");
  }
  return theta;
}

std::vector<double> rule_of_thumb(std::span<const double> scales, std::size_t n) {
  const double p = static_cast<double>(scales.size());
  const double factor = 1.06 * std::pow(static_cast<double>(n), -1.0 / (p + 4.0));
  std::vector<double> out;
  for (double s : scales) out.push_back(factor * (s > 0.0 ? s : 1.0));
  return out;
}

namespace {

struct Candidate {
  std::vector<double> theta;
  double value = kInfeasibleCriterion;
  std::optional<BandwidthMatrix> h;
};

class Selector {
 public:
  Selector(const Dataset& data, Task task, Criterion criterion, const Kernel& kernel, const OptimizerConfig& config)
      : data_(data), task_(task), criterion_(criterion), kernel_(kernel), config_(config) {
    dim_ = task == Task::Regression ? data.predictor_dim() : data.d();
    if (task == Task::Regression && data.predictor_dim() == 0)
      throw Error(ErrorCode::IncompatibleSplit, "regression needs at least one predictor");
    if (kernel.dim() != dim_) throw Error(ErrorCode::DimensionMismatch, "kernel dimension does not match the task");
    scales_ = task == Task::Regression ? data.predictor_scales() : data.joint_scales();
    start_ = rule_of_thumb(scales_, data.n());
  }

  double objective(Form form, std::span<const double> theta) {
    try {
      const BandwidthMatrix h = bandwidth_from_coordinates(form, theta, dim_);
      return evaluate_criterion(data_, task_, criterion_, kernel_, h).value;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::SingularBandwidth || e.code() == ErrorCode::SingularBlock ||
          e.code() == ErrorCode::InvalidParametrization)
        return kInfeasibleCriterion;
      throw;
    }
  }

  std::pair<std::vector<double>, std::vector<double>> bounds(Form form) const {
    const std::size_t count = parameter_count(form, dim_);
    std::vector<double> lo(count, -config_.upper_log_cap), hi(count, config_.upper_log_cap);
    if (form == Form::FullSymmetric) {
      // Factor diagonals enter squared, so halve the log cap; column ratios get
      // the matching linear range.
      const double ratio = std::exp(0.5 * config_.upper_log_cap);
      std::fill(lo.begin(), lo.end(), -ratio);
      std::fill(hi.begin(), hi.end(), ratio);
      std::size_t k = 0;
      for (std::size_t r = 0; r < dim_; ++r) {
        lo[k + r] = -0.5 * config_.upper_log_cap;
        hi[k + r] = 0.5 * config_.upper_log_cap;
        k += r + 1;
      }
    }
    return {lo, hi};
  }

  // Runs `restarts` rounds from theta, each from the previous optimum.
  Candidate descend(Form form, std::vector<double> theta, const std::string& label) {
    const auto [lo, hi] = bounds(form);
    Candidate best;
    for (int round = 0; round < config_.restarts; ++round) {
      const auto r = nelder_mead([&](std::span<const double> t) { return objective(form, t); }, theta, config_, lo, hi);
      evaluations_ += r.evaluations;
      ++runs_;
      trace_.push_back({std::string(form_name(form)) + ": " + label, round, r.value, r.evaluations});
      theta = r.argmin;
      if (r.value <= best.value) {
        best.theta = r.argmin;
        best.value = r.value;
      }
    }
    if (form != Form::FullSymmetric && best.value < kInfeasibleCriterion) probe_cap(form, best);
    if (best.value < kInfeasibleCriterion) best.h = bandwidth_from_coordinates(form, best.theta, dim_);
    return best;
  }

  // On a flat arm toward infinity the simplex meets its tolerance well before
  // the cap. Each log-bandwidth moves to the cap when that strictly lowers the
  // criterion.
  void probe_cap(Form form, Candidate& best) {
    for (std::size_t j = 0; j < best.theta.size(); ++j) {
      if (best.theta[j] >= config_.upper_log_cap) continue;
      std::vector<double> trial = best.theta;
      trial[j] = config_.upper_log_cap;
      const double v = objective(form, trial);
      ++evaluations_;
      if (v < best.value) {
        best.theta = std::move(trial);
        best.value = v;
      }
    }
  }

  static bool better(const Candidate& a, const Candidate& b) {
    if (!a.h) return false;
    if (!b.h) return true;
    const double tol = 1e-12 * std::max(1.0, std::abs(b.value));
    if (std::abs(a.value - b.value) <= tol) return a.h->frobenius_norm() < b.h->frobenius_norm();
    return a.value < b.value;
  }

  Candidate select(Form form) {
    if (const auto it = done_.find(form); it != done_.end()) return it->second.candidate;
    Candidate best;
    auto consider = [&](Candidate c) {
      if (better(c, best)) best = std::move(c);
    };
    switch (form) {
      case Form::Scalar: {
        double log_geo = 0.0;
        for (double h : start_) log_geo += std::log(h);
        log_geo /= static_cast<double>(start_.size());
        for (double s : config_.initial_scales)
          consider(descend(form, {log_geo + std::log(s)}, "rule-of-thumb x" + format_scale(s)));
        break;
      }
      case Form::Diagonal: {
        const Candidate scalar = dim_ > 1 ? select(Form::Scalar) : Candidate{};
        for (double s : config_.initial_scales) {
          std::vector<double> theta;
          for (double h : start_) theta.push_back(std::log(s * h));
          consider(descend(form, theta, "rule-of-thumb x" + format_scale(s)));
        }
        if (scalar.h) consider(descend(form, std::vector<double>(dim_, scalar.theta[0]), "scalar optimum"));
        break;
      }
      case Form::FullSymmetric: {
        const Candidate diag = select(Form::Diagonal);
        if (!diag.h) break;
        best = to_full(diag);
        consider(descend(form, best.theta, "diagonal optimum"));
        break;
      }
      case Form::General: throw Error(ErrorCode::InvalidConfig, "cannot select a general bandwidth");
    }
    done_.emplace(form, Stage{best, evaluations_, runs_, trace_.size()});
    return best;
  }

  struct Stage {
    Candidate candidate;
    int evaluations = 0;
    int runs = 0;
    std::size_t trace_size = 0;
  };
  const std::map<Form, Stage>& stages() const { return done_; }

  Candidate to_full(const Candidate& diag) const {
    Candidate c;
    c.theta.assign(parameter_count(Form::FullSymmetric, dim_), 0.0);
    std::size_t k = 0;
    for (std::size_t r = 0; r < dim_; ++r) {
      c.theta[k + r] = -0.5 * diag.theta[r];
      k += r + 1;
    }
    c.value = diag.value;
    c.h = bandwidth_from_coordinates(Form::FullSymmetric, c.theta, dim_);
    return c;
  }

  static std::string format_scale(double s) {
    std::string str = std::to_string(s);
    str.erase(str.find_last_not_of('0') + 1);
    if (!str.empty() && str.back() == '.') str.pop_back();
    return str;
  }

  const std::vector<double>& scales() const { return scales_; }
  const std::vector<RestartTrace>& trace() const { return trace_; }

 private:
  const Dataset& data_;
  Task task_;
  Criterion criterion_;
  const Kernel& kernel_;
  const OptimizerConfig& config_;
  std::size_t dim_ = 0;
  std::vector<double> scales_;
  std::vector<double> start_;
  int evaluations_ = 0;
  int runs_ = 0;
  std::vector<RestartTrace> trace_;
  std::map<Form, Stage> done_;
};

}  // namespace

std::vector<CVSelection> select_bandwidth_path(const Dataset& data, Task task, Criterion criterion, Form form,
                                               const Kernel& kernel, const OptimizerConfig& config,
                                               double divergence_factor) {
  config.validate();
  if (data.n() < 3) throw Error(ErrorCode::InsufficientData, "cross-validation needs at least three observations");
  if (task == Task::Regression && criterion != Criterion::LeastSquares)
    throw Error(ErrorCode::InvalidConfig, "regression supports the least-squares criterion only");
  Selector selector(data, task, criterion, kernel, config);
  selector.select(form);

  std::vector<CVSelection> out;
  for (const auto& [stage_form, stage] : selector.stages()) {
    const Candidate& best = stage.candidate;
    if (!best.h) throw Error(ErrorCode::Degenerate, "every start ended with too many degenerate leave-one-out points");
    const CriterionValue at_best = evaluate_criterion(data, task, criterion, kernel, *best.h);
    if (2 * at_best.excluded >= data.n())
      throw Error(ErrorCode::Degenerate, "selected bandwidth leaves too many degenerate leave-one-out points");
    CVSelection s{*best.h, best.value, stage_form, task, criterion, stage.runs, stage.evaluations, {}, 0, {}, {}};
    s.divergent_flags = flag_divergent(*best.h, selector.scales(), divergence_factor);
    s.excluded_points = at_best.excluded;
    s.optimizer_coordinates = best.theta;
    s.trace.assign(selector.trace().begin(), selector.trace().begin() + static_cast<std::ptrdiff_t>(stage.trace_size));
    out.push_back(std::move(s));
  }
  return out;
}

CVSelection select_bandwidth(const Dataset& data, Task task, Criterion criterion, Form form, const Kernel& kernel,
                             const OptimizerConfig& config, double divergence_factor) {
  auto path = select_bandwidth_path(data, task, criterion, form, kernel, config, divergence_factor);
  return std::move(path.back());
}

void to_json(nlohmann::json& j, const CVSelection& s) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& t : s.trace)
    trace.push_back({{"start", t.start}, {"round", t.round}, {"value", t.value}, {"evaluations", t.evaluations}});
  std::vector<bool> flags(s.divergent_flags.begin(), s.divergent_flags.end());
  j = nlohmann::json{{"bandwidth", s.bandwidth},
                     {"criterion", s.criterion},
                     {"criterion_kind", criterion_name(s.criterion_kind)},
                     {"form", form_name(s.form)},
                     {"task", task_name(s.task)},
                     {"n_restarts_used", s.n_restarts_used},
                     {"evaluations", s.evaluations},
                     {"divergent_flags", flags},
                     {"effective_scales", effective_scales(s.bandwidth)},
                     {"excluded_points", s.excluded_points},
                     {"optimizer_coordinates", s.optimizer_coordinates},
                     {"trace", trace}};
}

}  // namespace ksmooth
