#include "kernel_sums.hpp"

#include "ksmooth/error.hpp"

#include <algorithm>

namespace ksmooth::detail {

namespace {

// Unnormalized kernel weights between query zq and points [begin, end), written to w.
void weights_against(const Scaled& z, KernelFamily family, const double* zq, Eigen::Index begin,
                     Eigen::Index end, double* w) {
  const Eigen::Index count = end - begin;
  const Eigen::Index p = z.cols();
  if (family == KernelFamily::Gaussian) {
    std::fill(w, w + count, 0.0);
    for (Eigen::Index k = 0; k < p; ++k) {
      const double a = zq[k];
      const double* col = z.col(k).data() + begin;
      for (Eigen::Index j = 0; j < count; ++j) {
        const double diff = a - col[j];
        w[j] += diff * diff;
      }
    }
    Eigen::Map<Eigen::ArrayXd> q(w, count);
    q = (q > Kernel::kGaussianCutoff).select(0.0, (-0.5 * q.min(Kernel::kGaussianCutoff)).exp());
  } else {
    std::fill(w, w + count, 1.0);
    for (Eigen::Index k = 0; k < p; ++k) {
      const double a = zq[k];
      const double* col = z.col(k).data() + begin;
      for (Eigen::Index j = 0; j < count; ++j) {
        const double diff = a - col[j];
        w[j] *= std::max(0.0, 1.0 - diff * diff);
      }
    }
  }
}

}  // namespace

Scaled scale_points(const Eigen::MatrixXd& points, const BandwidthMatrix& h) {
  if (static_cast<std::size_t>(points.cols()) != h.dim())
    throw Error(ErrorCode::DimensionMismatch, "points and bandwidth dimensions differ");
  if (h.form() == Form::Scalar) return points / h.scalar_value();
  // Row by row so a batch scales each point exactly as scale_query does.
  Scaled out(points.rows(), points.cols());
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    out.row(i) = h.solve(Eigen::VectorXd(points.row(i).transpose())).transpose();
  return out;
}

Eigen::VectorXd scale_query(std::span<const double> x, const BandwidthMatrix& h) {
  if (x.size() != h.dim()) throw Error(ErrorCode::DimensionMismatch, "query and bandwidth dimensions differ");
  const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
  if (h.form() == Form::Scalar) return v / h.scalar_value();
  return h.solve(Eigen::VectorXd(v));
}

QuerySums query_sums(const Scaled& z, KernelFamily family, const double* zq, const double* y, std::size_t skip) {
  const Eigen::Index n = z.rows();
  std::vector<double> w(static_cast<std::size_t>(n));
  weights_against(z, family, zq, 0, n, w.data());
  QuerySums out;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (static_cast<std::size_t>(j) == skip) continue;
    out.s0 += w[static_cast<std::size_t>(j)];
    if (y) out.s1 += y[j] * w[static_cast<std::size_t>(j)];
  }
  return out;
}

LooSums loo_sums(const Scaled& z, KernelFamily family, const Eigen::VectorXd* y) {
  const Eigen::Index n = z.rows();
  const Eigen::Index p = z.cols();
  LooSums out;
  out.s0 = Eigen::VectorXd::Zero(n);
  if (y) out.s1 = Eigen::VectorXd::Zero(n);
  std::vector<double> w(static_cast<std::size_t>(n));
  std::vector<double> zi(static_cast<std::size_t>(p));
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    for (Eigen::Index k = 0; k < p; ++k) zi[static_cast<std::size_t>(k)] = z(i, k);
    const Eigen::Index count = n - i - 1;
    weights_against(z, family, zi.data(), i + 1, n, w.data());
    const Eigen::Map<const Eigen::VectorXd> wi(w.data(), count);
    const double si0 = wi.sum();
    if (y) {
      out.s1.segment(i + 1, count) += (*y)[i] * wi;
      out.s1[i] += wi.dot(y->segment(i + 1, count));
    }
    out.s0.segment(i + 1, count) += wi;
    out.s0[i] += si0;
  }
  return out;
}

Eigen::MatrixXd kernel_matrix(const Scaled& z, KernelFamily family) {
  const Eigen::Index n = z.rows();
  const Eigen::Index p = z.cols();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> w(static_cast<std::size_t>(n));
  std::vector<double> zi(static_cast<std::size_t>(p));
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    for (Eigen::Index c = 0; c < p; ++c) zi[static_cast<std::size_t>(c)] = z(i, c);
    weights_against(z, family, zi.data(), i + 1, n, w.data());
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = w[static_cast<std::size_t>(j - i - 1)];
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace ksmooth::detail
