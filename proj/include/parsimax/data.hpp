#ifndef PARSIMAX_DATA_HPP
#define PARSIMAX_DATA_HPP

// Observed samples, exact finite populations and the second-moment blocks
// shared by the regression and covariance code.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "parsimax/error.hpp"
#include "parsimax/linalg.hpp"

namespace parsimax {

/// Observed sample: response y, protected regressors Z (n x p) and key
/// regressors X (n x h). Requires n > p + h and finite entries.
///
/// The library does not add an intercept; callers normally put the constant
/// column in Z.
class Dataset {
 public:
  Dataset(Vector y, Matrix z, Matrix x) : y_(std::move(y)), z_(std::move(z)), x_(std::move(x)) {
    if (z_.rows() != y_.size() || x_.rows() != y_.size()) {
      throw Error(ErrorKind::dimension_mismatch,
                  "Dataset: y, Z and X must have the same number of rows");
    }
    if (z_.cols() < 1) throw Error(ErrorKind::dimension_mismatch, "Dataset: p must be >= 1");
    if (x_.cols() < 1) throw Error(ErrorKind::dimension_mismatch, "Dataset: h must be >= 1");
    if (n() <= p() + h()) {
      throw Error(ErrorKind::too_few_rows, "Dataset: need n > p + h, got n=" + std::to_string(n()) +
                                               ", p=" + std::to_string(p()) +
                                               ", h=" + std::to_string(h()));
    }
    if (!y_.allFinite() || !z_.allFinite() || !x_.allFinite()) {
      throw Error(ErrorKind::invalid_argument, "Dataset: non-finite entry");
    }
  }

  Eigen::Index n() const noexcept { return y_.size(); }
  Eigen::Index p() const noexcept { return z_.cols(); }
  Eigen::Index h() const noexcept { return x_.cols(); }

  const Vector& y() const noexcept { return y_; }
  const Matrix& z() const noexcept { return z_; }
  const Matrix& x() const noexcept { return x_; }

  /// Stacked design [Z X], rows X_t' = [z_t', x_t'].
  Matrix design() const {
    Matrix d(n(), p() + h());
    d << z_, x_;
    return d;
  }

  /// Design of the i-th parsimonious regression, [Z x_i].
  Matrix parsimonious_design(Eigen::Index i) const {
    Matrix d(n(), p() + 1);
    d << z_, x_.col(i);
    return d;
  }

 private:
  Vector y_;
  Matrix z_;
  Matrix x_;
};

struct Atom {
  Vector z;
  Vector x;
  double sigma2 = 0.0;  // conditional second moment of the error at (z, x)
  double prob = 0.0;
};

/// Discrete joint distribution of (z, x, E[eps^2 | z, x]). Every expectation
/// used by the covariance formulas is an exact finite sum over the atoms.
class FinitePopulation {
 public:
  explicit FinitePopulation(std::vector<Atom> atoms);

  Eigen::Index p() const noexcept { return p_; }
  Eigen::Index h() const noexcept { return h_; }
  const std::vector<Atom>& atoms() const noexcept { return atoms_; }

 private:
  std::vector<Atom> atoms_;
  Eigen::Index p_ = 0;
  Eigen::Index h_ = 0;
};

/// One family of second moments split into the z/x blocks. The per-regressor
/// symbols are views: gamma_iz = zx.col(i), gamma_ii = xx(i, i).
struct SecondMoments {
  Matrix zz;  // p x p
  Matrix zx;  // p x h
  Matrix xx;  // h x h

  Eigen::Index p() const noexcept { return zz.rows(); }
  Eigen::Index h() const noexcept { return xx.rows(); }

  SymMatrix zz_sym() const { return SymMatrix(zz); }
  SymMatrix xx_sym() const { return SymMatrix(xx); }

  /// Full (p+h) x (p+h) matrix [[zz, zx], [zx', xx]].
  SymMatrix assembled() const {
    const Eigen::Index p_ = p(), h_ = h();
    Matrix m(p_ + h_, p_ + h_);
    m.topLeftCorner(p_, p_) = zz;
    m.topRightCorner(p_, h_) = zx;
    m.bottomLeftCorner(h_, p_) = zx.transpose();
    m.bottomRightCorner(h_, h_) = xx;
    return SymMatrix(m);
  }

  /// Block for the pair (i, j) of parsimonious regressors:
  /// E[w X_it X_jt'] with X_it = [z_t', x_it]'.
  Matrix pair_block(Eigen::Index i, Eigen::Index j) const {
    const Eigen::Index p_ = p();
    Matrix b(p_ + 1, p_ + 1);
    b.topLeftCorner(p_, p_) = zz;
    b.topRightCorner(p_, 1) = zx.col(j);
    b.bottomLeftCorner(1, p_) = zx.col(i).transpose();
    b(p_, p_) = xx(i, j);
    return b;
  }

  static SecondMoments from_assembled(const Matrix& full, Eigen::Index p) {
    const Eigen::Index h = full.rows() - p;
    return SecondMoments{full.topLeftCorner(p, p), full.topRightCorner(p, h),
                         full.bottomRightCorner(h, h)};
  }
};

/// The two moment families: gamma = E[X X'], lambda = E[eps^2 X X'].
struct MomentSet {
  SecondMoments gamma;
  SecondMoments lambda;
};

namespace detail {

constexpr Eigen::Index kPairwiseBlock = 64;

// Pairwise summation of sum_t w_t r_t r_t' over rows [begin, end).
inline Matrix pairwise_gram(const Matrix& rows, const Vector& w, Eigen::Index begin,
                            Eigen::Index end) {
  const Eigen::Index len = end - begin;
  if (len <= kPairwiseBlock) {
    const auto block = rows.middleRows(begin, len);
    return block.transpose() * w.segment(begin, len).asDiagonal() * block;
  }
  const Eigen::Index mid = begin + len / 2;
  return pairwise_gram(rows, w, begin, mid) + pairwise_gram(rows, w, mid, end);
}

}  // namespace detail

/// sum_t w_t r_t r_t' over the rows of `rows`, accumulated pairwise.
inline Matrix weighted_gram(const Matrix& rows, const Vector& weights) {
  if (weights.size() != rows.rows()) {
    throw Error(ErrorKind::dimension_mismatch,
                "weighted_gram: " + std::to_string(weights.size()) + " weights for " +
                    std::to_string(rows.rows()) + " rows");
  }
  if (rows.rows() == 0) return Matrix::Zero(rows.cols(), rows.cols());
  return detail::pairwise_gram(rows, weights, 0, rows.rows());
}

/// n^{-1} sum_t w_t X_t X_t' split into blocks. Unit weights give the
/// Gamma-hat family; squared residuals give a Lambda family.
inline SecondMoments sample_moments(const Dataset& d, const Vector& weights) {
  if (weights.size() != d.n()) {
    throw Error(ErrorKind::dimension_mismatch,
                "sample_moments: " + std::to_string(weights.size()) + " weights for n=" +
                    std::to_string(d.n()));
  }
  const Matrix full = weighted_gram(d.design(), weights) / static_cast<double>(d.n());
  return SecondMoments::from_assembled(full, d.p());
}

inline SecondMoments sample_moments(const Dataset& d) {
  return sample_moments(d, Vector::Ones(d.n()));
}

inline MomentSet population_moments(const FinitePopulation& pop) {
  const auto& atoms = pop.atoms();
  const Eigen::Index k = pop.p() + pop.h();
  Matrix rows(static_cast<Eigen::Index>(atoms.size()), k);
  Vector prob(rows.rows());
  Vector weighted(rows.rows());
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    const auto t = static_cast<Eigen::Index>(a);
    rows.row(t) << atoms[a].z.transpose(), atoms[a].x.transpose();
    prob(t) = atoms[a].prob;
    weighted(t) = atoms[a].prob * atoms[a].sigma2;
  }
  return MomentSet{SecondMoments::from_assembled(weighted_gram(rows, prob), pop.p()),
                   SecondMoments::from_assembled(weighted_gram(rows, weighted), pop.p())};
}

inline FinitePopulation::FinitePopulation(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw Error(ErrorKind::invalid_argument, "FinitePopulation: no atoms");
  p_ = atoms_.front().z.size();
  h_ = atoms_.front().x.size();
  if (p_ < 1 || h_ < 1) {
    throw Error(ErrorKind::dimension_mismatch, "FinitePopulation: p and h must be >= 1");
  }
  double total = 0.0;
  for (std::size_t a = 0; a < atoms_.size(); ++a) {
    const Atom& atom = atoms_[a];
    if (atom.z.size() != p_ || atom.x.size() != h_) {
      throw Error(ErrorKind::dimension_mismatch, "FinitePopulation: atom has inconsistent dimensions", a);
    }
    if (!(atom.prob > 0.0) || !std::isfinite(atom.prob)) {
      throw Error(ErrorKind::invalid_argument, "FinitePopulation: atom probability must be positive", a);
    }
    if (!(atom.sigma2 >= 0.0) || !std::isfinite(atom.sigma2)) {
      throw Error(ErrorKind::invalid_argument, "FinitePopulation: sigma2 must be nonnegative", a);
    }
    if (!atom.z.allFinite() || !atom.x.allFinite()) {
      throw Error(ErrorKind::invalid_argument, "FinitePopulation: non-finite atom", a);
    }
    total += atom.prob;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw Error(ErrorKind::invalid_argument,
                "FinitePopulation: probabilities sum to " + std::to_string(total));
  }
  if (!certify_pd(population_moments(*this).gamma.assembled()).positive_definite()) {
    throw Error(ErrorKind::not_positive_definite,
                "FinitePopulation: E[X X'] is not positive definite");
  }
}

}  // namespace parsimax

#endif  // PARSIMAX_DATA_HPP
