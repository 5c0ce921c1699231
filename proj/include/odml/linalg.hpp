#pragma once

// Dense symmetric linear algebra shared by the metric layers: a cyclic
// Jacobi eigensolver, the principal square root, PSD projection, PCA and
// l2 normalization. Everything here is a pure function templated on the
// scalar type.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "odml/errors.hpp"

namespace odml {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

namespace detail {
inline std::size_t& eigen_counter() {
  thread_local std::size_t count = 0;
  return count;
}
}  // namespace detail

/// Number of symmetric eigendecompositions run on the calling thread.
inline std::size_t eigendecomposition_count() { return detail::eigen_counter(); }

/// Square symmetric matrix. Construction symmetrizes its input as
/// (m + m^T) / 2, which leaves an already symmetric matrix bit-identical.
template <typename Scalar>
class SymMatrix {
 public:
  using Dense = MatrixX<Scalar>;

  SymMatrix() = default;

  template <typename Derived>
  explicit SymMatrix(const Eigen::MatrixBase<Derived>& m) {
    if (m.rows() != m.cols() || m.rows() < 1) {
      throw DimError("SymMatrix requires a non-empty square matrix");
    }
    a_ = (m + m.transpose()) / Scalar(2);
  }

  static SymMatrix identity(Index dim) { return SymMatrix(Dense::Identity(dim, dim)); }

  static SymMatrix diagonal(const VectorX<Scalar>& values) {
    return SymMatrix(Dense(values.asDiagonal()));
  }

  Index dim() const { return a_.rows(); }
  const Dense& dense() const { return a_; }
  operator const Dense&() const { return a_; }
  Scalar operator()(Index i, Index j) const { return a_(i, j); }
  Scalar trace() const { return a_.trace(); }

  friend bool operator==(const SymMatrix& a, const SymMatrix& b) {
    return a.dim() == b.dim() && a.a_ == b.a_;
  }

 private:
  Dense a_;
};

/// Eigenvalues sorted descending with matching orthonormal columns.
template <typename Scalar>
struct EigenPair {
  VectorX<Scalar> values;
  MatrixX<Scalar> vectors;

  Scalar min_value() const { return values(values.size() - 1); }
  Scalar max_value() const { return values(0); }
};

struct JacobiOptions {
  int max_sweeps = 100;
  double tolerance = 1e-12;  // off-diagonal Frobenius norm relative to ||m||_F
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps over every (p, q) pair annihilating the off-diagonal entry with a
/// plane rotation until the off-diagonal mass drops below
/// `tolerance * ||m||_F`. Eigenvector signs are fixed so that the entry of
/// largest magnitude in each column is positive.
template <typename Scalar>
EigenPair<Scalar> sym_eigen(const SymMatrix<Scalar>& m, const JacobiOptions& opts = {}) {
  ++detail::eigen_counter();
  const Index n = m.dim();
  MatrixX<Scalar> a = m.dense();
  MatrixX<Scalar> v = MatrixX<Scalar>::Identity(n, n);

  const Scalar scale = a.norm();
  const Scalar threshold = Scalar(opts.tolerance) * scale;
  auto off_diagonal = [&]() {
    Scalar sum = 0;
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i)
        if (i != j) sum += a(i, j) * a(i, j);
    return std::sqrt(sum);
  };

  bool converged = scale == Scalar(0) || off_diagonal() <= threshold;
  for (int sweep = 0; sweep < opts.max_sweeps && !converged; ++sweep) {
    for (Index p = 0; p + 1 < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        if (a(p, q) == Scalar(0)) continue;
        Eigen::JacobiRotation<Scalar> rot;
        rot.makeJacobi(a, p, q);
        a.applyOnTheLeft(p, q, rot.adjoint());
        a.applyOnTheRight(p, q, rot);
        a(p, q) = a(q, p) = Scalar(0);
        v.applyOnTheRight(p, q, rot);
      }
    }
    converged = off_diagonal() <= threshold;
  }
  if (!converged) {
    throw NonConvergence("Jacobi eigensolver did not converge in " +
                         std::to_string(opts.max_sweeps) + " sweeps");
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(),
                   [&](Index i, Index j) { return a(i, i) > a(j, j); });

  EigenPair<Scalar> out{VectorX<Scalar>(n), MatrixX<Scalar>(n, n)};
  for (Index k = 0; k < n; ++k) {
    const Index src = order[static_cast<std::size_t>(k)];
    out.values(k) = a(src, src);
    auto col = v.col(src);
    Index arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    out.vectors.col(k) = col(arg) < Scalar(0) ? VectorX<Scalar>(-col) : VectorX<Scalar>(col);
  }
  return out;
}

/// V * diag(f(lambda)) * V^T for an elementwise map f over the eigenvalues.
template <typename Scalar, typename F>
SymMatrix<Scalar> spectral_map(const EigenPair<Scalar>& eig, F f) {
  const VectorX<Scalar> mapped = eig.values.unaryExpr(f);
  return SymMatrix<Scalar>(eig.vectors * mapped.asDiagonal() * eig.vectors.transpose());
}

template <typename Scalar>
SymMatrix<Scalar> sqrt_from_eigen(const EigenPair<Scalar>& eig, Scalar floor = 0) {
  return spectral_map(eig, [floor](Scalar l) { return std::sqrt(std::max(l, floor)); });
}

/// Symmetric principal square root with eigenvalues sqrt(max(lambda, floor)).
/// Since the root L is symmetric, L^T L == L * L reproduces the floored m.
template <typename Scalar>
SymMatrix<Scalar> principal_sqrt(const SymMatrix<Scalar>& m, Scalar floor = 0) {
  return sqrt_from_eigen(sym_eigen(m), floor);
}

/// Clamps every eigenvalue below `floor` up to `floor`. Returns `m` itself
/// when it already satisfies the floor.
template <typename Scalar>
SymMatrix<Scalar> psd_project(const SymMatrix<Scalar>& m, Scalar floor = Scalar(1e-10)) {
  const EigenPair<Scalar> eig = sym_eigen(m);
  if (eig.min_value() >= floor) return m;
  return spectral_map(eig, [floor](Scalar l) { return std::max(l, floor); });
}

template <typename Scalar>
struct PcaResult {
  MatrixX<Scalar> projected;   // rows x target_dim
  MatrixX<Scalar> basis;       // cols x target_dim, orthonormal columns
  VectorX<Scalar> mean;        // column means of the fitted data
  VectorX<Scalar> variances;   // covariance eigenvalues, descending, length cols

  MatrixX<Scalar> transform(const MatrixX<Scalar>& rows) const {
    return (rows.rowwise() - mean.transpose()) * basis;
  }
};

/// PCA over the rows of `data`: projects the mean-centered rows onto the
/// leading `target_dim` eigenvectors of the sample covariance.
template <typename Scalar>
PcaResult<Scalar> pca_fit_transform(const MatrixX<Scalar>& data, Index target_dim) {
  const Index rows = data.rows();
  const Index cols = data.cols();
  if (target_dim < 1 || target_dim > std::min(rows, cols)) {
    throw DimError("PCA target dimension " + std::to_string(target_dim) +
                   " outside [1, min(rows, cols) = " +
                   std::to_string(std::min(rows, cols)) + "]");
  }
  PcaResult<Scalar> out;
  out.mean = data.colwise().mean().transpose();
  const MatrixX<Scalar> centered = data.rowwise() - out.mean.transpose();
  const Scalar denom = rows > 1 ? Scalar(rows - 1) : Scalar(1);
  const SymMatrix<Scalar> cov(MatrixX<Scalar>(centered.transpose() * centered / denom));
  const EigenPair<Scalar> eig = sym_eigen(cov);
  out.variances = eig.values;
  out.basis = eig.vectors.leftCols(target_dim);
  out.projected = centered * out.basis;
  return out;
}

/// Unit-l2 copy of v; the zero vector maps to itself.
template <typename Derived>
typename Derived::PlainObject l2_normalize(const Eigen::MatrixBase<Derived>& v) {
  const auto norm = v.norm();
  if (norm == 0) return v;
  return v / norm;
}

template <typename Scalar>
MatrixX<Scalar> l2_normalize_rows(const MatrixX<Scalar>& rows) {
  MatrixX<Scalar> out(rows.rows(), rows.cols());
  for (Index i = 0; i < rows.rows(); ++i) out.row(i) = l2_normalize(rows.row(i));
  return out;
}

template <typename Scalar>
Scalar relative_frobenius(const MatrixX<Scalar>& a, const MatrixX<Scalar>& b) {
  const Scalar denom = b.norm();
  return denom == Scalar(0) ? a.norm() : (a - b).norm() / denom;
}

}  // namespace odml
