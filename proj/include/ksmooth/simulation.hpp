#pragma once

#include "ksmooth/bandwidth.hpp"
#include "ksmooth/dataset.hpp"
#include "ksmooth/nelder_mead.hpp"

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ksmooth {

enum class CaseId { Case1 = 1, Case2 = 2, Case3 = 3 };

/// Var[2 pi (X1 + X2) / (1 + X3)] / 3 for independent U[0,1] inputs,
/// (4 pi^2 / 3) (7/12 - ln^2 2). Regenerate with tools/case2_noise_variance.py.
inline constexpr double kCase2NoiseVariance = 1.3538507377134198;

struct SimulationCase {
  CaseId id = CaseId::Case1;
  std::size_t d_total = 0;      // predictor count
  std::size_t d_effective = 0;  // rank of the index matrix
  Eigen::MatrixXd index_matrix;  // d_effective x d_total
  double noise_sd = 1.0;
  std::string noise_spec;

  static SimulationCase make(CaseId id);
  static SimulationCase from_number(int number);
  int number() const { return static_cast<int>(id); }
};

/// n rows of U[0,1]^{d_total} from `rng_seed`'s stream.
Eigen::MatrixXd draw_predictors(const SimulationCase& c, std::size_t n, std::uint64_t rng_seed);

/// Columns x1..x{d_total} then y; y is the response.
Dataset generate(const SimulationCase& c, std::size_t n, std::uint64_t seed);

/// Noiseless regression function.
double true_regression(const SimulationCase& c, std::span<const double> x);

struct MiseReport {
  int case_id = 1;
  std::size_t n = 0;
  Form form = Form::Diagonal;
  std::size_t replications = 0;  // requested
  double mise = 0.0;
  double sd = 0.0;
  std::vector<double> per_replication;
  std::vector<std::uint64_t> seeds;  // training seed of each kept replication
  std::vector<std::size_t> indices;  // replication index of each kept entry
  std::size_t retried = 0;
  std::size_t skipped = 0;
  std::size_t test_points = 0;
  std::uint64_t master_seed = 0;
  double runtime_seconds = 0.0;
};

void to_json(nlohmann::json& j, const MiseReport& r);

/// Bandwidth for one training set (regression on the predictors).
using BandwidthChooser = std::function<BandwidthMatrix(const Dataset&)>;

/// Monte-Carlo MISE of Nadaraya-Watson regression with a Gaussian kernel and
/// LSCV-selected bandwidths of the given form. Replication r trains on
/// generate(c, n, derive_seed(seed, r)); a Degenerate selection is retried once
/// on a fresh seed and then skipped.
MiseReport estimate_mise(const SimulationCase& c, Form form, std::size_t n, std::size_t replications,
                         std::size_t test_points, std::uint64_t seed, const OptimizerConfig& config);

/// Same protocol with a caller-supplied bandwidth choice.
MiseReport estimate_mise_with(const SimulationCase& c, Form form, std::size_t n, std::size_t replications,
                              std::size_t test_points, std::uint64_t seed, const BandwidthChooser& choose);

/// One MISE report per form of the nested search ending at `finest` (Scalar,
/// Diagonal, FullSymmetric). All forms share training and test draws, and each
/// report equals estimate_mise for its form with the same arguments, except
/// that a Degenerate selection at any stage skips the replication for all forms.
std::vector<MiseReport> estimate_mise_nested(const SimulationCase& c, Form finest, std::size_t n,
                                             std::size_t replications, std::size_t test_points, std::uint64_t seed,
                                             const OptimizerConfig& config);

struct RateFit {
  std::vector<std::size_t> n_values;
  std::vector<double> mise_values;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

void to_json(nlohmann::json& j, const RateFit& r);

/// OLS of ln(mise) on ln(n). Needs at least three distinct n.
RateFit fit_rate(std::span<const MiseReport> reports);
RateFit fit_rate(std::span<const std::size_t> n_values, std::span<const double> mise_values);

}  // namespace ksmooth
