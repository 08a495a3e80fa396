#pragma once

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ksmooth {

/// Parametrization family of a bandwidth matrix. `General` is only reachable
/// through BandwidthMatrix::from_matrix and carries no structural constraint
/// beyond regularity.
enum class Form { Scalar, Diagonal, FullSymmetric, General };

std::string_view form_name(Form form);
Form parse_form(std::string_view name);

/// Number of free parameters of `form` in dimension `d`.
std::size_t parameter_count(Form form, std::size_t d);

/// A regular d x d bandwidth matrix with a declared parametrization.
///
/// FullSymmetric parameters are the lower triangle of a Cholesky-style factor L
/// in row order (L00, L10, L11, L20, L21, L22, ...) with strictly positive
/// diagonal, so H = L L^T is positive definite by construction.
///
/// Entries may be arbitrarily large; only (near) singularity is rejected. The
/// singularity floor compares |det H| against the Hadamard bound prod_j |row_j|,
/// which is invariant under per-axis rescaling and therefore unaffected by a
/// single coordinate diverging.
class BandwidthMatrix {
 public:
  static BandwidthMatrix build(Form form, std::span<const double> params, std::size_t d);
  static BandwidthMatrix scalar(double h, std::size_t d);
  static BandwidthMatrix diagonal(std::span<const double> h);

  /// Wraps an explicit matrix. With `form` other than General the matrix is
  /// validated against that form's invariants and its parameters recovered.
  static BandwidthMatrix from_matrix(const Eigen::MatrixXd& entries, Form form = Form::General);

  std::size_t dim() const { return static_cast<std::size_t>(entries_.rows()); }
  Form form() const { return form_; }
  const Eigen::MatrixXd& entries() const { return entries_; }
  double operator()(std::size_t i, std::size_t j) const {
    return entries_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

  /// Parameters such that build(form(), params(), dim()) reproduces this matrix.
  const std::vector<double>& params() const { return params_; }

  double abs_determinant() const { return abs_det_; }
  double log_abs_determinant() const { return log_abs_det_; }

  /// H^{-1} v.
  Eigen::VectorXd solve(const Eigen::VectorXd& v) const;
  /// H^{-1} M, column by column.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& m) const;
  Eigen::MatrixXd inverse() const;

  /// Scalar form value h; only meaningful when form() == Scalar.
  double scalar_value() const { return entries_(0, 0); }

  /// Sub-block [r0, r0+rows) x [c0, c0+cols) as a General bandwidth (must be regular).
  BandwidthMatrix block(std::size_t r0, std::size_t c0, std::size_t rows, std::size_t cols) const;

  /// Frobenius norm of the entries (used for tie-breaking between selections).
  double frobenius_norm() const { return entries_.norm(); }

  bool operator==(const BandwidthMatrix& other) const {
    return form_ == other.form_ && entries_ == other.entries_;
  }

 private:
  BandwidthMatrix(Eigen::MatrixXd entries, Form form, std::vector<double> params);

  Eigen::MatrixXd entries_;
  Form form_;
  std::vector<double> params_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  double abs_det_ = 0.0;
  double log_abs_det_ = 0.0;
};

/// Blocks of a partitioned variable vector, e.g. (response, predictor) or
/// (relevant, irrelevant).
struct BlockPartition {
  std::vector<std::size_t> sizes;
  std::vector<std::string> labels;

  BlockPartition() = default;
  BlockPartition(std::vector<std::size_t> sizes, std::vector<std::string> labels = {});

  std::size_t total() const;
  std::size_t offset(std::size_t block) const;
};

/// Schur-complement view of a two-block bandwidth matrix
///   H = [H11 H12; H21 H22],
///   upsilon    = H22 - H21 H11^{-1} H12,
///   xi_inverse = H11^{-1} + H11^{-1} H12 upsilon^{-1} H21 H11^{-1},
/// and the four blocks of H^{-1} assembled from them.
struct SchurDecomposition {
  Eigen::MatrixXd upsilon;
  Eigen::MatrixXd xi_inverse;
  Eigen::MatrixXd inv11, inv12, inv21, inv22;

  Eigen::MatrixXd assembled_inverse() const;
};

SchurDecomposition schur_blocks(const BandwidthMatrix& h, const BlockPartition& split);

/// Marks variable j when its effective bandwidth scale exceeds factor * data_scale[j].
/// Scalar: h; Diagonal: H_jj; otherwise the Euclidean norm of row j.
std::vector<bool> flag_divergent(const BandwidthMatrix& h, std::span<const double> data_scale,
                                 double factor = 1000.0);

/// Per-variable effective scale used by flag_divergent.
std::vector<double> effective_scales(const BandwidthMatrix& h);

void to_json(nlohmann::json& j, const BandwidthMatrix& h);
BandwidthMatrix bandwidth_from_json(const nlohmann::json& j);

}  // namespace ksmooth
