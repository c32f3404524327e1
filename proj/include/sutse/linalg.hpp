#pragma once

// Small dense/sparse helpers shared by the filter, the builders and the
// theory checks.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sutse/error.hpp"

namespace sutse {

using Index = Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using IndexList = std::vector<Index>;

namespace linalg {

inline void symmetrize(MatrixXd& m) {
  m = 0.5 * (m + m.transpose()).eval();
}

inline double frobenius(const MatrixXd& m) { return m.norm(); }

inline bool is_symmetric(const MatrixXd& m, double rel_tol = 1e-12) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

inline double min_eigenvalue(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Throws InputError unless `m` is square, symmetric and PSD to the given
/// tolerances.
inline void require_psd(const MatrixXd& m, const std::string& name, double eig_tol = 1e-10) {
  if (m.rows() != m.cols())
    throw InputError(name + " must be square, got " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()));
  if (!m.allFinite()) throw InputError(name + " has non-finite entries");
  if (!is_symmetric(m)) throw InputError(name + " is not symmetric");
  if (m.size() > 0 && min_eigenvalue(m) < -eig_tol)
    throw InputError(name + " is not positive semidefinite");
}

inline bool is_pd(const MatrixXd& m) {
  if (m.rows() != m.cols() || !m.allFinite()) return false;
  Eigen::LLT<MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

/// Factor B with B B^T = m for a PSD matrix, via the symmetric eigendecomposition
/// (Cholesky rejects singular PSD matrices).
inline MatrixXd psd_factor(const MatrixXd& m) {
  if (m.size() == 0) return m;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
  VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

/// Columns of R from Sigma = R Q R^T, keeping eigenvalues above `tol`.
inline MatrixXd noise_loading(const MatrixXd& sigma, double tol = 1e-12) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sigma);
  std::vector<Index> keep;
  for (Index i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()(i) > tol) keep.push_back(i);
  MatrixXd r(sigma.rows(), static_cast<Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) r.col(static_cast<Index>(c)) = es.eigenvectors().col(keep[c]);
  return r;
}

inline Index numerical_rank(const MatrixXd& m, double rel_tol = 1e-9) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  Index rank = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > rel_tol * s(0)) ++rank;
  return rank;
}

inline double spectral_radius(const MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<MatrixXd> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline MatrixXd select(const MatrixXd& m, const IndexList& rows, const IndexList& cols) {
  MatrixXd out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out(static_cast<Index>(i), static_cast<Index>(j)) = m(rows[i], cols[j]);
  return out;
}

inline MatrixXd select_rows(const MatrixXd& m, const IndexList& rows) {
  MatrixXd out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

inline VectorXd select(const VectorXd& v, const IndexList& idx) {
  VectorXd out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Index>(i)) = v(idx[i]);
  return out;
}

inline MatrixXd block_diagonal(const std::vector<MatrixXd>& blocks) {
  Index rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  MatrixXd out = MatrixXd::Zero(rows, cols);
  Index r = 0, c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

/// A left operand that is multiplied either densely or through a sparse copy,
/// whichever is cheaper. SUTSE transition and design matrices are
/// block-diagonal and mostly zero, so the sparse route dominates at scale.
class Operand {
public:
  Operand() = default;
  explicit Operand(const MatrixXd& m, double density_threshold = 0.25) : dense_(m) {
    const Index nnz = (m.array() != 0.0).count();
    if (m.size() > 16 && static_cast<double>(nnz) < density_threshold * static_cast<double>(m.size())) {
      sparse_ = m.sparseView();
      sparse_->makeCompressed();
    }
  }

  const MatrixXd& dense() const { return dense_; }
  bool is_sparse() const { return sparse_.has_value(); }

  /// this * x
  template <typename Derived>
  MatrixXd mul(const Eigen::MatrixBase<Derived>& x) const {
    if (sparse_) return *sparse_ * x;
    return dense_ * x;
  }

  /// x * this^T
  template <typename Derived>
  MatrixXd mul_right_transposed(const Eigen::MatrixBase<Derived>& x) const {
    if (sparse_) return x * sparse_->transpose();
    return x * dense_.transpose();
  }

  /// this * S * this^T for symmetric S; the result is symmetrised. The sparse
  /// route reads S as row-major (valid by symmetry) so both products are
  /// contiguous row updates.
  MatrixXd sandwich(const MatrixXd& S) const {
    MatrixXd out;
    if (sparse_) {
      using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
      const Eigen::Map<const RowMajor> s_rm(S.data(), S.rows(), S.cols());
      const RowMajor left = *sparse_ * s_rm;          // this * S
      const MatrixXd left_cm = left;                  // same values, column-major
      const Eigen::Map<const RowMajor> left_t(left_cm.data(), left_cm.cols(), left_cm.rows());
      const RowMajor full = *sparse_ * left_t;        // this * (this * S)^T
      out = full;
    } else {
      out.noalias() = dense_ * S * dense_.transpose();
    }
    symmetrize(out);
    return out;
  }

private:
  MatrixXd dense_;
  std::optional<Eigen::SparseMatrix<double, Eigen::RowMajor>> sparse_;
};

}  // namespace linalg
}  // namespace sutse
