#ifndef PARSIMAX_REGRESSION_HPP
#define PARSIMAX_REGRESSION_HPP

// OLS through the normal equations: the restricted fit under the null,
// the h parsimonious fits and the full fit.

#include <string>
#include <vector>

#include "parsimax/data.hpp"
#include "parsimax/error.hpp"
#include "parsimax/linalg.hpp"

namespace parsimax {

struct OlsFit {
  Vector coefficients;
  Vector residuals;
  Eigen::Index regressor_count = 0;

  double rss() const { return residuals.squaredNorm(); }
};

namespace detail {

// Fit from a precomputed scaled Gram n^{-1} W'W and cross moment n^{-1} W'y.
inline OlsFit ols_from_gram(const Matrix& design, const Vector& y, const Matrix& gram,
                            const Vector& cross) {
  const SymMatrix g(gram);
  if (!certify_pd(g).positive_definite()) {
    throw Error(ErrorKind::rank_deficient, "ols: design is not of full column rank");
  }
  OlsFit fit;
  fit.coefficients = solve_spd(g, cross);
  fit.residuals = y - design * fit.coefficients;
  fit.regressor_count = design.cols();
  return fit;
}

}  // namespace detail

inline OlsFit ols(const Matrix& design, const Vector& y) {
  if (design.rows() != y.size()) {
    throw Error(ErrorKind::dimension_mismatch, "ols: design has " + std::to_string(design.rows()) +
                                                   " rows but y has " + std::to_string(y.size()));
  }
  if (design.cols() < 1 || design.rows() < design.cols()) {
    throw Error(ErrorKind::rank_deficient, "ols: fewer rows than regressors");
  }
  const double inv_n = 1.0 / static_cast<double>(design.rows());
  const Matrix gram = weighted_gram(design, Vector::Ones(design.rows())) * inv_n;
  const Vector cross = design.transpose() * y * inv_n;
  return detail::ols_from_gram(design, y, gram, cross);
}

/// Regresses y on [Z x_i] for every i. Fit i holds p+1 coefficients, the
/// last being beta_hat_i. The Gram of [Z X] is formed once and sliced.
inline std::vector<OlsFit> parsimonious_fits(const Dataset& d) {
  const Eigen::Index p = d.p();
  const Matrix full = d.design();
  const double inv_n = 1.0 / static_cast<double>(d.n());
  const Matrix gram = weighted_gram(full, Vector::Ones(d.n())) * inv_n;
  const Vector cross = full.transpose() * d.y() * inv_n;

  std::vector<OlsFit> fits;
  fits.reserve(static_cast<std::size_t>(d.h()));
  for (Eigen::Index i = 0; i < d.h(); ++i) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(p));
    for (Eigen::Index k = 0; k < p; ++k) idx[static_cast<std::size_t>(k)] = k;
    idx.push_back(p + i);
    const Matrix sub_gram = gram(idx, idx);
    const Vector sub_cross = cross(idx);
    try {
      fits.push_back(detail::ols_from_gram(d.parsimonious_design(i), d.y(), sub_gram, sub_cross));
    } catch (const Error& e) {
      throw Error(e.kind(), "parsimonious regression " + std::to_string(i) + ": " + e.what(),
                  static_cast<std::size_t>(i));
    }
  }
  return fits;
}

inline Vector parsimonious_betas(const std::vector<OlsFit>& fits) {
  Vector b(static_cast<Eigen::Index>(fits.size()));
  for (std::size_t i = 0; i < fits.size(); ++i) {
    b(static_cast<Eigen::Index>(i)) = fits[i].coefficients(fits[i].coefficients.size() - 1);
  }
  return b;
}

/// y on Z only; residuals are the common restricted residuals u_tilde.
inline OlsFit restricted_fit(const Dataset& d) { return ols(d.z(), d.y()); }

/// y on [Z X]; coefficients ordered (a_hat, b_hat).
inline OlsFit full_fit(const Dataset& d) { return ols(d.design(), d.y()); }

}  // namespace parsimax

#endif  // PARSIMAX_REGRESSION_HPP
