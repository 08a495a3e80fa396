#pragma once

#include "ksmooth/bandwidth.hpp"
#include "ksmooth/dataset.hpp"
#include "ksmooth/kernel.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace ksmooth {

/// Kernel-sum floor per summed observation. A ratio estimator whose denominator
/// kernel sum falls below count * kDenominatorFloor is reported as degenerate.
inline constexpr double kDenominatorFloor = 1e-300;

struct EstimateResult {
  double value = 0.0;
  /// Denominator density used by ratio estimators (f2 hat); for kde the density itself.
  double denominator = 0.0;
  bool degenerate = false;
};

/// (n |H|)^{-1} sum_i k(H^{-1}(x - X_i)) over all columns in storage order.
EstimateResult kde(const Dataset& data, const Kernel& kernel, const BandwidthMatrix& h, std::span<const double> x);
std::vector<EstimateResult> kde_batch(const Dataset& data, const Kernel& kernel, const BandwidthMatrix& h,
                                      const Eigen::MatrixXd& queries);

/// Nadaraya-Watson (local constant) regression of the first response column on
/// the predictors. `h` is d2 x d2 over the predictor block; numerator and
/// denominator share kernel and bandwidth. A degenerate denominator falls back
/// to the sample mean of Y.
EstimateResult nw_regression(const Dataset& data, const Kernel& kernel, const BandwidthMatrix& h,
                             std::span<const double> x2);
std::vector<EstimateResult> nw_regression_batch(const Dataset& data, const Kernel& kernel, const BandwidthMatrix& h,
                                                const Eigen::MatrixXd& queries);

/// f(x1, x2) / f2(x2) on the joint ordering (responses, predictors).
///
/// The numerator uses `kernel` and `h` (dimension d1 + d2); the denominator uses
/// the analytic marginal of `kernel` over the conditioning coordinates with the
/// H22 block of `h`. A degenerate denominator falls back to the marginal KDE of
/// the response block (H11 block, marginal kernel).
EstimateResult conditional_density(const Dataset& data, const BlockPartition& split, const Kernel& kernel,
                                   const BandwidthMatrix& h, std::span<const double> x1, std::span<const double> x2);
/// Queries are rows (x1, x2) of length d1 + d2.
std::vector<EstimateResult> conditional_density_batch(const Dataset& data, const BlockPartition& split,
                                                      const Kernel& kernel, const BandwidthMatrix& h,
                                                      const Eigen::MatrixXd& queries);

enum class LooMode { Regression, ConditionalDensityAtOwnPoint, Density };

/// Estimator at observation i's coordinates with observation i removed from the sums.
/// Bandwidth dimension follows the mode: predictors (Regression), joint
/// (ConditionalDensityAtOwnPoint) or all columns (Density).
EstimateResult loo_predict(const Dataset& data, const Kernel& kernel, const BandwidthMatrix& h, std::size_t i,
                           LooMode mode);

/// KDE of strictly positive data in log coordinates, mapped back to the original scale:
/// (n |H|)^{-1} sum_i (prod_j x_j)^{-1} k(H^{-1}(ln x - ln X_i)).
EstimateResult log_transformed_kde(const Dataset& data, const Kernel& kernel, const BandwidthMatrix& h,
                                   std::span<const double> x);

/// Split (d1 = response count, d2 = predictor count) for ratio estimators.
BlockPartition response_predictor_split(const Dataset& data);

}  // namespace ksmooth
