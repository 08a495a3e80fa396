#include "ksmooth/estimators.hpp"

#include "kernel_sums.hpp"
#include "ksmooth/error.hpp"
#include "ksmooth/parallel.hpp"

#include <cmath>

namespace ksmooth {

namespace {

constexpr std::size_t kNoSkip = static_cast<std::size_t>(-1);

// 1 / (count |H|), falling back to logs when the determinant over/underflows.
double inv_count_det(std::size_t count, const BandwidthMatrix& h) {
  const double c = static_cast<double>(count);
  const double denom = c * h.abs_determinant();
  if (std::isfinite(denom) && denom > 0.0) return 1.0 / denom;
  return std::exp(-std::log(c) - h.log_abs_determinant());
}

void require(bool ok, ErrorCode code, const char* what) {
  if (!ok) throw Error(code, what);
}

std::span<const double> row_span(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

// Precomputed state for density estimation on a fixed point set.
struct DensityModel {
  detail::Scaled z;
  const BandwidthMatrix* h;
  KernelFamily family;
  double norm;

  DensityModel(const Eigen::MatrixXd& points, const Kernel& kernel, const BandwidthMatrix& bw)
      : z(detail::scale_points(points, bw)), h(&bw), family(kernel.family()), norm(kernel.normalization()) {
    require(kernel.dim() == bw.dim(), ErrorCode::DimensionMismatch, "kernel and bandwidth dimensions differ");
  }

  std::size_t n() const { return static_cast<std::size_t>(z.rows()); }

  // Kernel sum (normalized) and density at a scaled query.
  std::pair<double, double> at(const double* zq, std::size_t skip = kNoSkip) const {
    const auto s = detail::query_sums(z, family, zq, nullptr, skip);
    const std::size_t count = skip == kNoSkip ? n() : n() - 1;
    const double ksum = norm * s.s0;
    return {ksum, ksum * inv_count_det(count, *h)};
  }
};

struct RegressionModel {
  DensityModel density;
  Eigen::VectorXd y;
  double mean_y;

  RegressionModel(const Dataset& data, const Kernel& kernel, const BandwidthMatrix& h)
      : density(data.predictors(), kernel, h), y(data.response()), mean_y(y.mean()) {}

  EstimateResult at(const double* zq, std::size_t skip = kNoSkip) const {
    const auto s = detail::query_sums(density.z, density.family, zq, y.data(), skip);
    const std::size_t count = skip == kNoSkip ? density.n() : density.n() - 1;
    EstimateResult r;
    const double ksum = density.norm * s.s0;
    r.denominator = ksum * inv_count_det(count, *density.h);
    if (!(ksum >= static_cast<double>(count) * kDenominatorFloor)) {
      r.degenerate = true;
      r.value = skip == kNoSkip ? mean_y : (mean_y * static_cast<double>(density.n()) - y[static_cast<Eigen::Index>(skip)]) /
                                               static_cast<double>(count);
    } else {
      r.value = s.s1 / s.s0;
    }
    return r;
  }
};

struct ConditionalModel {
  std::size_t d1, d2;
  BandwidthMatrix h22;
  DensityModel joint;
  DensityModel conditioning;
  Kernel response_kernel;
  const Dataset* data;
  const BandwidthMatrix* h;

  ConditionalModel(const Dataset& ds, const BlockPartition& split, const Kernel& kernel, const BandwidthMatrix& bw)
      : d1(check_split(ds, split, kernel, bw)),
        d2(ds.predictor_dim()),
        h22(bw.block(d1, d1, d2, d2)),
        joint(ds.joint(), kernel, bw),
        conditioning(ds.predictors(), kernel.marginal(d2), h22),
        response_kernel(kernel.family(), d1),
        data(&ds),
        h(&bw) {}

  static std::size_t check_split(const Dataset& ds, const BlockPartition& split, const Kernel& kernel,
                                 const BandwidthMatrix& bw) {
    require(ds.response_dim() > 0, ErrorCode::NoResponseColumn, "conditional density needs a response block");
    require(ds.predictor_dim() > 0, ErrorCode::IncompatibleSplit, "conditional density needs a conditioning block");
    require(split.sizes.size() == 2 && split.sizes[0] == ds.response_dim() && split.sizes[1] == ds.predictor_dim(),
            ErrorCode::IncompatibleSplit, "split must be (response count, predictor count)");
    require(kernel.dim() == split.total() && bw.dim() == split.total(), ErrorCode::DimensionMismatch,
            "kernel and bandwidth must span the joint dimension");
    return split.sizes[0];
  }

  // Marginal KDE of the response block at x1 (degenerate fallback).
  double response_marginal(std::span<const double> x1, std::size_t skip) const {
    const BandwidthMatrix h11 = h->block(0, 0, d1, d1);
    DensityModel m(data->responses(), response_kernel, h11);
    const Eigen::VectorXd zq = detail::scale_query(x1, h11);
    return m.at(zq.data(), skip).second;
  }

  EstimateResult at(std::span<const double> x, std::size_t skip = kNoSkip) const {
    const Eigen::VectorXd zj = detail::scale_query(x, *h);
    const Eigen::VectorXd z2 = detail::scale_query(x.subspan(d1), h22);
    const double numerator = joint.at(zj.data(), skip).second;
    const auto [ksum2, f2] = conditioning.at(z2.data(), skip);
    const std::size_t count = skip == kNoSkip ? joint.n() : joint.n() - 1;
    EstimateResult r;
    r.denominator = f2;
    if (!(ksum2 >= static_cast<double>(count) * kDenominatorFloor)) {
      r.degenerate = true;
      r.value = response_marginal(x.first(d1), skip);
    } else {
      r.value = numerator / f2;
    }
    return r;
  }
};

}  // namespace

BlockPartition response_predictor_split(const Dataset& data) {
  return BlockPartition({data.response_dim(), data.predictor_dim()}, {"response", "predictor"});
}

EstimateResult kde(const Dataset& data, const Kernel& kernel, const BandwidthMatrix& h, std::span<const double> x) {
  require(h.dim() == data.d(), ErrorCode::DimensionMismatch, "bandwidth must span all columns");
  const DensityModel model(data.values(), kernel, h);
  const Eigen::VectorXd zq = detail::scale_query(x, h);
  const auto [ksum, f] = model.at(zq.data());
  (void)ksum;
  return {f, f, false};
}

std::vector<EstimateResult> kde_batch(const Dataset& data, const Kernel& kernel, const BandwidthMatrix& h,
                                      const Eigen::MatrixXd& queries) {
  require(h.dim() == data.d() && static_cast<std::size_t>(queries.cols()) == data.d(), ErrorCode::DimensionMismatch,
          "queries and bandwidth must span all columns");
  const DensityModel model(data.values(), kernel, h);
  const detail::Scaled zq = detail::scale_points(queries, h);
  std::vector<EstimateResult> out(static_cast<std::size_t>(queries.rows()));
  parallel_for(out.size(), [&](std::size_t q) {
    const Eigen::VectorXd row = zq.row(static_cast<Eigen::Index>(q));
    const double f = model.at(row.data()).second;
    out[q] = {f, f, false};
  });
  return out;
}

EstimateResult nw_regression(const Dataset& data, const Kernel& kernel, const BandwidthMatrix& h,
                             std::span<const double> x2) {
  require(h.dim() == data.predictor_dim(), ErrorCode::DimensionMismatch, "bandwidth must span the predictors");
  const RegressionModel model(data, kernel, h);
  const Eigen::VectorXd zq = detail::scale_query(x2, h);
  return model.at(zq.data());
}

std::vector<EstimateResult> nw_regression_batch(const Dataset& data, const Kernel& kernel, const BandwidthMatrix& h,
                                                const Eigen::MatrixXd& queries) {
  require(h.dim() == data.predictor_dim() && static_cast<std::size_t>(queries.cols()) == data.predictor_dim(),
          ErrorCode::DimensionMismatch, "queries and bandwidth must span the predictors");
  const RegressionModel model(data, kernel, h);
  const detail::Scaled zq = detail::scale_points(queries, h);
  std::vector<EstimateResult> out(static_cast<std::size_t>(queries.rows()));
  parallel_for(out.size(), [&](std::size_t q) {
    const Eigen::VectorXd row = zq.row(static_cast<Eigen::Index>(q));
    out[q] = model.at(row.data());
  });
  return out;
}

EstimateResult conditional_density(const Dataset& data, const BlockPartition& split, const Kernel& kernel,
                                   const BandwidthMatrix& h, std::span<const double> x1, std::span<const double> x2) {
  const ConditionalModel model(data, split, kernel, h);
  require(x1.size() == model.d1 && x2.size() == model.d2, ErrorCode::DimensionMismatch,
          "query blocks do not match the split");
  std::vector<double> x(x1.begin(), x1.end());
  x.insert(x.end(), x2.begin(), x2.end());
  return model.at(x);
}

std::vector<EstimateResult> conditional_density_batch(const Dataset& data, const BlockPartition& split,
                                                      const Kernel& kernel, const BandwidthMatrix& h,
                                                      const Eigen::MatrixXd& queries) {
  const ConditionalModel model(data, split, kernel, h);
  require(static_cast<std::size_t>(queries.cols()) == model.d1 + model.d2, ErrorCode::DimensionMismatch,
          "query rows must have length d1 + d2");
  std::vector<EstimateResult> out(static_cast<std::size_t>(queries.rows()));
  parallel_for(out.size(), [&](std::size_t q) {
    const Eigen::VectorXd row = queries.row(static_cast<Eigen::Index>(q));
    out[q] = model.at(row_span(row));
  });
  return out;
}

EstimateResult loo_predict(const Dataset& data, const Kernel& kernel, const BandwidthMatrix& h, std::size_t i,
                           LooMode mode) {
  require(data.n() >= 2, ErrorCode::InsufficientData, "leave-one-out needs at least two observations");
  require(i < data.n(), ErrorCode::DimensionMismatch, "observation index out of range");
  const auto row = static_cast<Eigen::Index>(i);
  switch (mode) {
    case LooMode::Regression: {
      require(h.dim() == data.predictor_dim(), ErrorCode::DimensionMismatch, "bandwidth must span the predictors");
      const RegressionModel model(data, kernel, h);
      const Eigen::VectorXd zq = model.density.z.row(row);
      return model.at(zq.data(), i);
    }
    case LooMode::ConditionalDensityAtOwnPoint: {
      const ConditionalModel model(data, response_predictor_split(data), kernel, h);
      const Eigen::VectorXd x = data.joint().row(row);
      return model.at(row_span(x), i);
    }
    case LooMode::Density: {
      require(h.dim() == data.d(), ErrorCode::DimensionMismatch, "bandwidth must span all columns");
      const DensityModel model(data.values(), kernel, h);
      const Eigen::VectorXd zq = model.z.row(row);
      const double f = model.at(zq.data(), i).second;
      return {f, f, false};
    }
  }
  throw Error(ErrorCode::InvalidConfig, "unknown leave-one-out mode");
}

EstimateResult log_transformed_kde(const Dataset& data, const Kernel& kernel, const BandwidthMatrix& h,
                                   std::span<const double> x) {
  require((data.values().array() > 0.0).all(), ErrorCode::NonpositiveValue, "log-transformed KDE needs positive data");
  double jacobian = 1.0;
  std::vector<double> lx(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    require(x[j] > 0.0, ErrorCode::NonpositiveValue, "log-transformed KDE needs a positive query point");
    jacobian *= x[j];
    lx[j] = std::log(x[j]);
  }
  const Dataset logged = data.with_values(data.values().array().log().matrix());
  const EstimateResult r = kde(logged, kernel, h, lx);
  const double value = (1.0 / jacobian) * r.value;
  return {value, value, false};
}

}  // namespace ksmooth
