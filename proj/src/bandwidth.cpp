#include "ksmooth/bandwidth.hpp"

#include "ksmooth/error.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <numeric>

namespace ksmooth {

namespace {

// log(1e-12): minimum ratio |det H| / prod_j |row_j| accepted as regular.
constexpr double kLogSingularityFloor = -27.631021115928547;

std::string dims_message(const char* what, std::size_t got, std::size_t want) {
  return std::string(what) + ": got " + std::to_string(got) + ", expected " + std::to_string(want);
}

}  // namespace

std::string_view form_name(Form form) {
  switch (form) {
    case Form::Scalar: return "scalar";
    case Form::Diagonal: return "diagonal";
    case Form::FullSymmetric: return "full";
    case Form::General: return "general";
  }
  return "general";
}

Form parse_form(std::string_view name) {
  if (name == "scalar" || name == "s") return Form::Scalar;
  if (name == "diagonal" || name == "diag" || name == "d") return Form::Diagonal;
  if (name == "full" || name == "symmetric" || name == "full_symmetric" || name == "c")
    return Form::FullSymmetric;
  if (name == "general") return Form::General;
  throw Error(ErrorCode::InvalidConfig, "unknown bandwidth form '" + std::string(name) + "'");
}

std::size_t parameter_count(Form form, std::size_t d) {
  switch (form) {
    case Form::Scalar: return 1;
    case Form::Diagonal: return d;
    case Form::FullSymmetric: return d * (d + 1) / 2;
    case Form::General: return d * d;
  }
  return 0;
}

BandwidthMatrix::BandwidthMatrix(Eigen::MatrixXd entries, Form form, std::vector<double> params)
    : entries_(std::move(entries)), form_(form), params_(std::move(params)) {
  const auto d = entries_.rows();
  if (d == 0 || entries_.cols() != d)
    throw Error(ErrorCode::DimensionMismatch, "bandwidth matrix must be square and nonempty");
  if (!entries_.allFinite())
    throw Error(ErrorCode::SingularBandwidth, "bandwidth matrix has non-finite entries");

  lu_.compute(entries_);
  const Eigen::MatrixXd& lu = lu_.matrixLU();
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double u = std::abs(lu(i, i));
    if (u == 0.0) throw Error(ErrorCode::SingularBandwidth, "bandwidth matrix is singular");
    log_det += std::log(u);
  }
  double log_hadamard = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) log_hadamard += std::log(entries_.row(i).norm());
  if (log_det - log_hadamard < kLogSingularityFloor)
    throw Error(ErrorCode::SingularBandwidth, "bandwidth matrix is singular within relative floor");

  log_abs_det_ = log_det;
  abs_det_ = std::abs(lu_.determinant());
  if (!std::isfinite(abs_det_) || abs_det_ == 0.0) abs_det_ = std::exp(log_det);
}

BandwidthMatrix BandwidthMatrix::build(Form form, std::span<const double> params, std::size_t d) {
  if (d == 0) throw Error(ErrorCode::DimensionMismatch, "bandwidth dimension must be positive");
  const std::size_t expected = parameter_count(form, d);
  if (params.size() != expected)
    throw Error(ErrorCode::DimensionMismatch, dims_message("parameter count", params.size(), expected));
  for (double p : params)
    if (!std::isfinite(p)) throw Error(ErrorCode::InvalidParametrization, "non-finite parameter");

  const auto n = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  switch (form) {
    case Form::Scalar:
      if (!(params[0] > 0.0)) throw Error(ErrorCode::InvalidParametrization, "scalar bandwidth must be positive");
      h.diagonal().setConstant(params[0]);
      break;
    case Form::Diagonal:
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!(params[j] > 0.0))
          throw Error(ErrorCode::InvalidParametrization, "diagonal bandwidth entries must be positive");
        h(j, j) = params[j];
      }
      break;
    case Form::FullSymmetric: {
      Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c <= r; ++c) l(r, c) = params[k++];
      for (Eigen::Index j = 0; j < n; ++j)
        if (!(l(j, j) > 0.0))
          throw Error(ErrorCode::InvalidParametrization, "factor diagonal must be positive");
      h = l * l.transpose();
      // Exact symmetry regardless of summation order in the product.
      for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < r; ++c) h(c, r) = h(r, c);
      break;
    }
    case Form::General:
      for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c) h(r, c) = params[static_cast<std::size_t>(r * n + c)];
      break;
  }
  return BandwidthMatrix(std::move(h), form, std::vector<double>(params.begin(), params.end()));
}

BandwidthMatrix BandwidthMatrix::scalar(double h, std::size_t d) {
  const double p[1] = {h};
  return build(Form::Scalar, p, d);
}

BandwidthMatrix BandwidthMatrix::diagonal(std::span<const double> h) {
  return build(Form::Diagonal, h, h.size());
}

BandwidthMatrix BandwidthMatrix::from_matrix(const Eigen::MatrixXd& entries, Form form) {
  const auto n = entries.rows();
  if (n == 0 || entries.cols() != n)
    throw Error(ErrorCode::DimensionMismatch, "bandwidth matrix must be square and nonempty");
  std::vector<double> params;
  switch (form) {
    case Form::Scalar: {
      const double h = entries(0, 0);
      if (!(h > 0.0) || entries != Eigen::MatrixXd::Identity(n, n) * h)
        throw Error(ErrorCode::InvalidParametrization, "matrix is not a positive multiple of the identity");
      params = {h};
      break;
    }
    case Form::Diagonal: {
      for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < n; ++c)
          if (r != c && entries(r, c) != 0.0)
            throw Error(ErrorCode::InvalidParametrization, "diagonal form has nonzero off-diagonal entry");
        if (!(entries(r, r) > 0.0))
          throw Error(ErrorCode::InvalidParametrization, "diagonal bandwidth entries must be positive");
        params.push_back(entries(r, r));
      }
      break;
    }
    case Form::FullSymmetric: {
      for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < r; ++c)
          if (entries(r, c) != entries(c, r))
            throw Error(ErrorCode::InvalidParametrization, "full form requires a symmetric matrix");
      Eigen::LLT<Eigen::MatrixXd> llt(entries);
      if (llt.info() != Eigen::Success)
        throw Error(ErrorCode::InvalidParametrization, "full form requires a positive definite matrix");
      const Eigen::MatrixXd l = llt.matrixL();
      for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c <= r; ++c) params.push_back(l(r, c));
      break;
    }
    case Form::General:
      for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < n; ++c) params.push_back(entries(r, c));
      break;
  }
  return BandwidthMatrix(entries, form, std::move(params));
}

Eigen::VectorXd BandwidthMatrix::solve(const Eigen::VectorXd& v) const {
  if (v.size() != entries_.rows())
    throw Error(ErrorCode::DimensionMismatch, dims_message("vector length", static_cast<std::size_t>(v.size()), dim()));
  return lu_.solve(v);
}

Eigen::MatrixXd BandwidthMatrix::solve(const Eigen::MatrixXd& m) const {
  if (m.rows() != entries_.rows())
    throw Error(ErrorCode::DimensionMismatch, dims_message("matrix rows", static_cast<std::size_t>(m.rows()), dim()));
  return lu_.solve(m);
}

Eigen::MatrixXd BandwidthMatrix::inverse() const { return lu_.inverse(); }

BandwidthMatrix BandwidthMatrix::block(std::size_t r0, std::size_t c0, std::size_t rows,
                                       std::size_t cols) const {
  if (r0 + rows > dim() || c0 + cols > dim())
    throw Error(ErrorCode::DimensionMismatch, "block exceeds bandwidth dimension");
  const Eigen::MatrixXd sub = entries_.block(static_cast<Eigen::Index>(r0), static_cast<Eigen::Index>(c0),
                                             static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  // Diagonal blocks of structured forms keep their structure.
  if (r0 == c0 && rows == cols) {
    if (form_ == Form::Scalar) return scalar(sub(0, 0), rows);
    if (form_ == Form::Diagonal) return from_matrix(sub, Form::Diagonal);
  }
  return from_matrix(sub, Form::General);
}

BlockPartition::BlockPartition(std::vector<std::size_t> s, std::vector<std::string> l)
    : sizes(std::move(s)), labels(std::move(l)) {
  if (sizes.empty()) throw Error(ErrorCode::IncompatibleSplit, "block partition needs at least one block");
  for (auto v : sizes)
    if (v == 0) throw Error(ErrorCode::IncompatibleSplit, "block sizes must be positive");
  if (!labels.empty() && labels.size() != sizes.size())
    throw Error(ErrorCode::IncompatibleSplit, "one label per block required");
}

std::size_t BlockPartition::total() const { return std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}); }

std::size_t BlockPartition::offset(std::size_t block) const {
  return std::accumulate(sizes.begin(), sizes.begin() + static_cast<std::ptrdiff_t>(block), std::size_t{0});
}

Eigen::MatrixXd SchurDecomposition::assembled_inverse() const {
  const auto d1 = inv11.rows();
  const auto d2 = inv22.rows();
  Eigen::MatrixXd out(d1 + d2, d1 + d2);
  out.topLeftCorner(d1, d1) = inv11;
  out.topRightCorner(d1, d2) = inv12;
  out.bottomLeftCorner(d2, d1) = inv21;
  out.bottomRightCorner(d2, d2) = inv22;
  return out;
}

SchurDecomposition schur_blocks(const BandwidthMatrix& h, const BlockPartition& split) {
  if (split.sizes.size() != 2)
    throw Error(ErrorCode::IncompatibleSplit, "schur_blocks needs a two-block partition");
  if (split.total() != h.dim())
    throw Error(ErrorCode::IncompatibleSplit, dims_message("partition total", split.total(), h.dim()));

  const auto d1 = static_cast<Eigen::Index>(split.sizes[0]);
  const auto d2 = static_cast<Eigen::Index>(split.sizes[1]);
  const Eigen::MatrixXd& m = h.entries();
  const Eigen::MatrixXd h11 = m.topLeftCorner(d1, d1);
  const Eigen::MatrixXd h12 = m.topRightCorner(d1, d2);
  const Eigen::MatrixXd h21 = m.bottomLeftCorner(d2, d1);
  const Eigen::MatrixXd h22 = m.bottomRightCorner(d2, d2);

  Eigen::FullPivLU<Eigen::MatrixXd> lu11(h11);
  if (!lu11.isInvertible()) throw Error(ErrorCode::SingularBlock, "leading block H11 is singular");

  SchurDecomposition out;
  out.upsilon = h22 - h21 * lu11.solve(h12);
  // The blocks of H^{-1} come from the pivoted factorization of H itself, which
  // stays accurate when H11 is badly conditioned but H is not.
  const Eigen::MatrixXd inv = h.inverse();
  out.inv11 = inv.topLeftCorner(d1, d1);
  out.inv12 = inv.topRightCorner(d1, d2);
  out.inv21 = inv.bottomLeftCorner(d2, d1);
  out.inv22 = inv.bottomRightCorner(d2, d2);
  out.xi_inverse = out.inv11;
  return out;
}

std::vector<double> effective_scales(const BandwidthMatrix& h) {
  std::vector<double> out(h.dim());
  const Eigen::MatrixXd& m = h.entries();
  for (std::size_t j = 0; j < h.dim(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    switch (h.form()) {
      case Form::Scalar:
      case Form::Diagonal: out[j] = m(jj, jj); break;
      default: out[j] = m.row(jj).norm(); break;
    }
  }
  return out;
}

std::vector<bool> flag_divergent(const BandwidthMatrix& h, std::span<const double> data_scale, double factor) {
  if (data_scale.size() != h.dim())
    throw Error(ErrorCode::DimensionMismatch, dims_message("scale vector length", data_scale.size(), h.dim()));
  const auto scales = effective_scales(h);
  std::vector<bool> flags(h.dim());
  for (std::size_t j = 0; j < h.dim(); ++j) {
    const double s = data_scale[j] > 0.0 ? data_scale[j] : 1e-300;
    flags[j] = scales[j] > factor * s;
  }
  return flags;
}

void to_json(nlohmann::json& j, const BandwidthMatrix& h) {
  std::vector<double> entries;
  entries.reserve(h.dim() * h.dim());
  for (std::size_t r = 0; r < h.dim(); ++r)
    for (std::size_t c = 0; c < h.dim(); ++c) entries.push_back(h(r, c));
  j = nlohmann::json{{"dim", h.dim()}, {"form", form_name(h.form())}, {"entries", entries}};
}

BandwidthMatrix bandwidth_from_json(const nlohmann::json& j) {
  try {
    const auto d = j.at("dim").get<std::size_t>();
    const auto form = parse_form(j.at("form").get<std::string>());
    const auto entries = j.at("entries").get<std::vector<double>>();
    if (entries.size() != d * d)
      throw Error(ErrorCode::DimensionMismatch, dims_message("entries length", entries.size(), d * d));
    Eigen::MatrixXd m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c < d; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = entries[r * d + c];
    return BandwidthMatrix::from_matrix(m, form);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("bandwidth JSON: ") + e.what());
  }
}

}  // namespace ksmooth
