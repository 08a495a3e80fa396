#pragma once

// Shared inner loops for the estimators and the cross-validation criteria.
//
// Points are mapped once through the bandwidth factorization, z_i = H^{-1} x_i,
// so every kernel argument H^{-1}(x - X_i) becomes a plain difference z - z_i.
// Sums are unnormalized: callers multiply by Kernel::normalization().

#include "ksmooth/bandwidth.hpp"
#include "ksmooth/kernel.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace ksmooth::detail {

/// n x p, column k contiguous over points.
using Scaled = Eigen::MatrixXd;

/// Rows of `points` mapped through H^{-1}. Scalar H divides exactly by h.
Scaled scale_points(const Eigen::MatrixXd& points, const BandwidthMatrix& h);
Eigen::VectorXd scale_query(std::span<const double> x, const BandwidthMatrix& h);

struct QuerySums {
  double s0 = 0.0;  // sum_i k(z - z_i)
  double s1 = 0.0;  // sum_i y_i k(z - z_i)
};

/// Sums over all points except `skip` (pass npos to keep all).
QuerySums query_sums(const Scaled& z, KernelFamily family, const double* zq, const double* y,
                     std::size_t skip = static_cast<std::size_t>(-1));

struct LooSums {
  Eigen::VectorXd s0;  // sum_{j != i} k(z_i - z_j)
  Eigen::VectorXd s1;  // sum_{j != i} y_j k(z_i - z_j), empty without y
};

/// All leave-one-out sums in one symmetric pass. Accumulation order is fixed,
/// so results are reproducible bit for bit.
LooSums loo_sums(const Scaled& z, KernelFamily family, const Eigen::VectorXd* y);

/// Full n x n matrix of unnormalized kernel values with a zero diagonal.
Eigen::MatrixXd kernel_matrix(const Scaled& z, KernelFamily family);

/// Pairwise (tree) summation in index order.
double pairwise_sum(std::span<const double> values);

}  // namespace ksmooth::detail
