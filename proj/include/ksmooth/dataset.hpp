#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace ksmooth {

/// Immutable n x d observation matrix with response/predictor column roles.
///
/// Column scales (sample standard deviations) are computed once at
/// construction. Ratio estimators work on the joint ordering
/// (responses..., predictors...), independent of storage order.
class Dataset {
 public:
  Dataset(Eigen::MatrixXd values, std::vector<std::string> names, std::vector<std::size_t> responses,
          std::vector<std::size_t> predictors);

  /// All columns are predictors except `response_index` (when given).
  static Dataset with_response(Eigen::MatrixXd values, std::size_t response_index);
  /// Every column a predictor, no response (plain density estimation).
  static Dataset unlabelled(Eigen::MatrixXd values);

  std::size_t n() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t d() const { return static_cast<std::size_t>(values_.cols()); }
  const Eigen::MatrixXd& values() const { return values_; }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::size_t>& response_indices() const { return responses_; }
  const std::vector<std::size_t>& predictor_indices() const { return predictors_; }
  const std::vector<double>& column_scales() const { return scales_; }

  std::size_t response_dim() const { return responses_.size(); }
  std::size_t predictor_dim() const { return predictors_.size(); }

  Eigen::MatrixXd columns(std::span<const std::size_t> idx) const;
  Eigen::MatrixXd predictors() const { return columns(predictors_); }
  Eigen::MatrixXd responses() const { return columns(responses_); }
  /// Responses followed by predictors.
  Eigen::MatrixXd joint() const;
  /// First response column; throws NoResponseColumn when there is none.
  Eigen::VectorXd response() const;

  std::vector<double> predictor_scales() const;
  std::vector<double> joint_scales() const;

  /// Copy without row i (same roles).
  Dataset without_row(std::size_t i) const;
  /// Same roles, new values (must have the same column count).
  Dataset with_values(Eigen::MatrixXd values) const;

 private:
  Eigen::MatrixXd values_;
  std::vector<std::string> names_;
  std::vector<std::size_t> responses_;
  std::vector<std::size_t> predictors_;
  std::vector<double> scales_;
};

/// Sample standard deviation (n-1 denominator); 0 for fewer than two values.
double sample_sd(const Eigen::Ref<const Eigen::VectorXd>& v);

}  // namespace ksmooth
