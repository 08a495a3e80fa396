#pragma once

#include "ksmooth/bandwidth.hpp"
#include "ksmooth/dataset.hpp"
#include "ksmooth/kernel.hpp"
#include "ksmooth/nelder_mead.hpp"

#include <nlohmann/json_fwd.hpp>

#include <limits>
#include <string>
#include <vector>

namespace ksmooth {

/// Criterion value reported for infeasible bandwidths (too many degenerate
/// leave-one-out points). Finite, so the simplex can still order vertices.
inline constexpr double kInfeasibleCriterion = std::numeric_limits<double>::max();

enum class Task { Regression, ConditionalDensity };
enum class Criterion { LeastSquares, Likelihood };

std::string_view task_name(Task task);
Task parse_task(std::string_view name);
std::string_view criterion_name(Criterion criterion);
Criterion parse_criterion(std::string_view name);

struct CriterionValue {
  double value = 0.0;
  std::size_t excluded = 0;  // leave-one-out points with a degenerate (or nonpositive) estimate
  std::size_t n = 0;

  /// At least half of the points excluded.
  bool infeasible() const { return 2 * excluded >= n; }
};

/// (1/n') sum_i (Y_i - m_{-i}(X_2i))^2 over the n' non-degenerate points;
/// kInfeasibleCriterion when n' <= n/2. `h` spans the predictors.
CriterionValue lscv_regression_detail(const Dataset& data, const Kernel& kernel, const BandwidthMatrix& h);
double lscv_regression(const Dataset& data, const Kernel& kernel, const BandwidthMatrix& h);

/// Least-squares CV for the conditional density,
///   (1/n') sum_i [ int f_{-i}(y | X_2i)^2 dy - 2 f_{-i}(Y_i | X_2i) ],
/// over non-degenerate points. Gaussian kernels use the closed-form convolution
/// of Gaussians; Epanechnikov integrates exactly piecewise (d1 = 1 only).
CriterionValue lscv_conditional_density_detail(const Dataset& data, const BlockPartition& split, const Kernel& kernel,
                                               const BandwidthMatrix& h);
double lscv_conditional_density(const Dataset& data, const BlockPartition& split, const Kernel& kernel,
                                const BandwidthMatrix& h);

/// Likelihood CV, -(1/n) sum_i ln f_{-i}(Y_i | X_2i). Degenerate or nonpositive
/// leave-one-out values contribute -ln(1e-300) and are counted as excluded.
CriterionValue lcv_conditional_density_detail(const Dataset& data, const BlockPartition& split, const Kernel& kernel,
                                              const BandwidthMatrix& h);
double lcv_conditional_density(const Dataset& data, const BlockPartition& split, const Kernel& kernel,
                               const BandwidthMatrix& h);

/// One optimizer run inside a selection.
struct RestartTrace {
  std::string start;  // e.g. "rule-of-thumb x0.25", "scalar optimum", "diagonal optimum"
  int round = 0;
  double value = 0.0;
  int evaluations = 0;
};

struct CVSelection {
  BandwidthMatrix bandwidth;
  double criterion = 0.0;
  Form form = Form::Diagonal;
  Task task = Task::Regression;
  Criterion criterion_kind = Criterion::LeastSquares;
  int n_restarts_used = 0;
  int evaluations = 0;
  std::vector<bool> divergent_flags;
  std::size_t excluded_points = 0;
  std::vector<double> optimizer_coordinates;
  std::vector<RestartTrace> trace;
};

void to_json(nlohmann::json& j, const CVSelection& s);

/// Map from optimizer coordinates to a bandwidth of the given form.
///   Scalar:   theta = ln h
///   Diagonal: theta_j = ln h_j
///   Full:     H^{-1} = M M^T with M lower triangular, coordinates in row order,
///             theta_jj = ln M_jj and M_jk = theta_jk * M_kk for k < j (entries
///             relative to their column's diagonal). A single-index structure
///             (one small direction, the rest flat) is then an O(1) move from a
///             diagonal start.
BandwidthMatrix bandwidth_from_coordinates(Form form, std::span<const double> theta, std::size_t d);
std::vector<double> coordinates_from_bandwidth(const BandwidthMatrix& h);

/// Per-variable rule-of-thumb start 1.06 * scale_j * n^{-1/(p+4)}.
std::vector<double> rule_of_thumb(std::span<const double> scales, std::size_t n);

/// Cross-validated bandwidth for `task`. Regression bandwidths span the
/// predictors; conditional-density bandwidths span (responses, predictors).
/// Throws Degenerate when no start yields a feasible optimum.
CVSelection select_bandwidth(const Dataset& data, Task task, Criterion criterion, Form form, const Kernel& kernel,
                             const OptimizerConfig& config, double divergence_factor = 1000.0);

/// The nested searches behind a selection of `form`: Scalar, then Diagonal
/// (warm-started from Scalar), then FullSymmetric (from Diagonal), stopping at
/// `form` (Scalar is skipped for one-dimensional Diagonal searches). Each entry
/// equals what select_bandwidth returns for its form.
std::vector<CVSelection> select_bandwidth_path(const Dataset& data, Task task, Criterion criterion, Form form,
                                               const Kernel& kernel, const OptimizerConfig& config,
                                               double divergence_factor = 1000.0);

/// Criterion for a task/criterion pair at a fixed bandwidth.
CriterionValue evaluate_criterion(const Dataset& data, Task task, Criterion criterion, const Kernel& kernel,
                                  const BandwidthMatrix& h);

}  // namespace ksmooth
