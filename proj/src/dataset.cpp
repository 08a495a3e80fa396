#include "ksmooth/dataset.hpp"

#include "ksmooth/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ksmooth {

double sample_sd(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

Dataset::Dataset(Eigen::MatrixXd values, std::vector<std::string> names, std::vector<std::size_t> responses,
                 std::vector<std::size_t> predictors)
    : values_(std::move(values)),
      names_(std::move(names)),
      responses_(std::move(responses)),
      predictors_(std::move(predictors)) {
  if (values_.rows() < 1 || values_.cols() < 1) throw Error(ErrorCode::InsufficientData, "dataset is empty");
  if (!values_.allFinite()) throw Error(ErrorCode::ParseError, "dataset contains non-finite values");
  if (names_.empty()) {
    for (std::size_t j = 0; j < d(); ++j) names_.push_back("x" + std::to_string(j + 1));
  }
  if (names_.size() != d()) throw Error(ErrorCode::DimensionMismatch, "one name per column required");

  std::vector<bool> seen(d(), false);
  for (auto idx : {&responses_, &predictors_}) {
    for (auto j : *idx) {
      if (j >= d()) throw Error(ErrorCode::DimensionMismatch, "role index out of range");
      if (seen[j]) throw Error(ErrorCode::IncompatibleSplit, "response and predictor roles overlap");
      seen[j] = true;
    }
  }
  scales_.resize(d());
  for (std::size_t j = 0; j < d(); ++j) scales_[j] = sample_sd(values_.col(static_cast<Eigen::Index>(j)));
}

Dataset Dataset::with_response(Eigen::MatrixXd values, std::size_t response_index) {
  const auto d = static_cast<std::size_t>(values.cols());
  std::vector<std::size_t> predictors;
  for (std::size_t j = 0; j < d; ++j)
    if (j != response_index) predictors.push_back(j);
  return Dataset(std::move(values), {}, {response_index}, std::move(predictors));
}

Dataset Dataset::unlabelled(Eigen::MatrixXd values) {
  std::vector<std::size_t> predictors(static_cast<std::size_t>(values.cols()));
  std::iota(predictors.begin(), predictors.end(), std::size_t{0});
  return Dataset(std::move(values), {}, {}, std::move(predictors));
}

Eigen::MatrixXd Dataset::columns(std::span<const std::size_t> idx) const {
  Eigen::MatrixXd out(values_.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k)
    out.col(static_cast<Eigen::Index>(k)) = values_.col(static_cast<Eigen::Index>(idx[k]));
  return out;
}

Eigen::MatrixXd Dataset::joint() const {
  std::vector<std::size_t> idx(responses_);
  idx.insert(idx.end(), predictors_.begin(), predictors_.end());
  return columns(idx);
}

Eigen::VectorXd Dataset::response() const {
  if (responses_.empty()) throw Error(ErrorCode::NoResponseColumn, "dataset has no response column");
  return values_.col(static_cast<Eigen::Index>(responses_.front()));
}

std::vector<double> Dataset::predictor_scales() const {
  std::vector<double> out;
  for (auto j : predictors_) out.push_back(scales_[j]);
  return out;
}

std::vector<double> Dataset::joint_scales() const {
  std::vector<double> out;
  for (auto j : responses_) out.push_back(scales_[j]);
  for (auto j : predictors_) out.push_back(scales_[j]);
  return out;
}

Dataset Dataset::without_row(std::size_t i) const {
  if (i >= n()) throw Error(ErrorCode::DimensionMismatch, "row index out of range");
  if (n() < 2) throw Error(ErrorCode::InsufficientData, "cannot remove the only row");
  Eigen::MatrixXd v(values_.rows() - 1, values_.cols());
  const auto ii = static_cast<Eigen::Index>(i);
  v.topRows(ii) = values_.topRows(ii);
  v.bottomRows(values_.rows() - ii - 1) = values_.bottomRows(values_.rows() - ii - 1);
  return Dataset(std::move(v), names_, responses_, predictors_);
}

Dataset Dataset::with_values(Eigen::MatrixXd values) const {
  if (static_cast<std::size_t>(values.cols()) != d())
    throw Error(ErrorCode::DimensionMismatch, "replacement values have a different column count");
  return Dataset(std::move(values), names_, responses_, predictors_);
}

}  // namespace ksmooth
