#ifndef PARSIMAX_LINALG_HPP
#define PARSIMAX_LINALG_HPP

// Dense symmetric kernels: Cholesky, symmetric eigendecomposition, SPD solve
// and positive-definiteness certification.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "parsimax/error.hpp"

namespace parsimax {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Square real matrix kept exactly symmetric. Construction replaces the
/// input by (m + m')/2, so accumulation-order asymmetry is absorbed once.
class SymMatrix {
 public:
  explicit SymMatrix(const Matrix& m) {
    if (m.rows() != m.cols()) {
      throw Error(ErrorKind::dimension_mismatch,
                  "SymMatrix: matrix is " + std::to_string(m.rows()) + "x" +
                      std::to_string(m.cols()) + ", expected square");
    }
    if (m.rows() < 1) throw Error(ErrorKind::dimension_mismatch, "SymMatrix: order must be >= 1");
    m_ = 0.5 * (m + m.transpose());
  }

  static SymMatrix identity(Eigen::Index order) { return SymMatrix(Matrix::Identity(order, order)); }

  Eigen::Index order() const noexcept { return m_.rows(); }
  const Matrix& matrix() const noexcept { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
  double max_abs() const { return m_.cwiseAbs().maxCoeff(); }

  friend SymMatrix operator*(double s, const SymMatrix& a) { return SymMatrix(s * a.m_); }

 private:
  Matrix m_;
};

/// Lower-triangular L with positive diagonal and L L' equal to the source.
class CholeskyFactor {
 public:
  explicit CholeskyFactor(Matrix lower) : lower_(std::move(lower)) {}

  const Matrix& lower() const noexcept { return lower_; }
  Eigen::Index order() const noexcept { return lower_.rows(); }
  Matrix reconstruct() const { return lower_ * lower_.transpose(); }

  /// Solves (L L') x = rhs by forward then backward substitution.
  Matrix solve(const Matrix& rhs) const {
    const auto lower = lower_.triangularView<Eigen::Lower>();
    Matrix y = lower.solve(rhs);
    return lower.transpose().solve(y);
  }

 private:
  Matrix lower_;
};

enum class PDStatus { positive_definite, positive_semidefinite, indefinite };

inline std::string_view to_string(PDStatus s) {
  switch (s) {
    case PDStatus::positive_definite: return "positive_definite";
    case PDStatus::positive_semidefinite: return "positive_semidefinite";
    case PDStatus::indefinite: return "indefinite";
  }
  return "unknown";
}

struct PDCertificate {
  PDStatus status = PDStatus::indefinite;
  double min_eigenvalue = 0.0;
  double tolerance_used = 0.0;

  bool positive_definite() const noexcept { return status == PDStatus::positive_definite; }
};

struct SymEigen {
  Vector values;   // descending
  Matrix vectors;  // orthonormal columns, column k pairs with values(k)
};

/// Cholesky factorization; std::nullopt when a pivot falls to or below
/// order * eps * max|m|.
inline std::optional<CholeskyFactor> try_cholesky(const SymMatrix& m) {
  const Eigen::Index n = m.order();
  const Matrix& a = m.matrix();
  const double tol = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * m.max_abs();
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > tol)) return std::nullopt;
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return CholeskyFactor(std::move(l));
}

inline CholeskyFactor cholesky(const SymMatrix& m) {
  auto f = try_cholesky(m);
  if (!f) throw Error(ErrorKind::not_positive_definite, "cholesky: matrix is not positive definite");
  return std::move(*f);
}

inline SymEigen sym_eigen(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m.matrix(), Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::convergence_failure, "sym_eigen: iteration did not converge");
  }
  // Eigen returns ascending order.
  const Eigen::Index n = m.order();
  SymEigen out{Vector(n), Matrix(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = solver.eigenvalues()(n - 1 - k);
    out.vectors.col(k) = solver.eigenvectors().col(n - 1 - k);
  }
  return out;
}

inline Vector sym_eigenvalues(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m.matrix(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::convergence_failure, "sym_eigen: iteration did not converge");
  }
  return solver.eigenvalues().reverse();
}

inline Matrix solve_spd(const SymMatrix& m, const Matrix& rhs) {
  if (rhs.rows() != m.order()) {
    throw Error(ErrorKind::dimension_mismatch, "solve_spd: right-hand side has " +
                                                   std::to_string(rhs.rows()) + " rows, expected " +
                                                   std::to_string(m.order()));
  }
  auto f = try_cholesky(m);
  if (!f) throw Error(ErrorKind::not_positive_definite, "solve_spd: matrix is not positive definite");
  return f->solve(rhs);
}

/// Verdict from the smallest eigenvalue against order * eps * max|lambda|.
inline PDCertificate certify_pd(const SymMatrix& m) {
  const Vector lambda = sym_eigenvalues(m);
  const double max_abs = lambda.cwiseAbs().maxCoeff();
  PDCertificate cert;
  cert.min_eigenvalue = lambda.minCoeff();
  cert.tolerance_used =
      static_cast<double>(m.order()) * std::numeric_limits<double>::epsilon() * max_abs;
  if (cert.min_eigenvalue > cert.tolerance_used) {
    cert.status = PDStatus::positive_definite;
  } else if (cert.min_eigenvalue >= -cert.tolerance_used) {
    cert.status = PDStatus::positive_semidefinite;
  } else {
    cert.status = PDStatus::indefinite;
  }
  return cert;
}

}  // namespace parsimax

#endif  // PARSIMAX_LINALG_HPP
