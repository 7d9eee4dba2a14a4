#ifndef PARSIMAX_COVARIANCE_HPP
#define PARSIMAX_COVARIANCE_HPP

// Asymptotic covariance V of sqrt(n) * beta_hat across the parsimonious
// regressions, in its blockwise form V_ij = g_i Lambda_ij g_j' and in the
// closed form
//
//   V = D^{-1} (Omega_zx' Omega_zz Omega_zx + Lambda_xx
//               - Lambda_zx' Lambda_zz^{-1} Lambda_zx) D^{-1},
//
// plus the two sample estimators built from them.
//
// The selection matrix R is never formed: picking the (p+1)-th row and
// column of each Sigma_ij block is the same as contracting Lambda_ij with
// g_i, the last row of Gamma_ii^{-1}.

#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "parsimax/data.hpp"
#include "parsimax/error.hpp"
#include "parsimax/linalg.hpp"
#include "parsimax/regression.hpp"

namespace parsimax {

enum class CovarianceMethod {
  ghm_blockwise,
  restricted_closed_form,
  restricted_blockwise,
  population_closed_form,
  population_blockwise,
  homoscedastic,
};

inline std::string_view to_string(CovarianceMethod m) {
  switch (m) {
    case CovarianceMethod::ghm_blockwise: return "ghm_blockwise";
    case CovarianceMethod::restricted_closed_form: return "restricted_closed_form";
    case CovarianceMethod::restricted_blockwise: return "restricted_blockwise";
    case CovarianceMethod::population_closed_form: return "population_closed_form";
    case CovarianceMethod::population_blockwise: return "population_blockwise";
    case CovarianceMethod::homoscedastic: return "homoscedastic";
  }
  return "unknown";
}

struct CovarianceEstimate {
  SymMatrix v;
  CovarianceMethod method;
  PDCertificate certificate;
};

inline CovarianceEstimate certified(SymMatrix v, CovarianceMethod method) {
  const PDCertificate cert = certify_pd(v);
  return CovarianceEstimate{std::move(v), method, cert};
}

/// Omega_zx = [Gamma_zx; Lambda_zx] (2p x h); column i is omega_iz.
/// Omega_zz = [[G L G, -G], [-G, L^{-1}]] with G = Gamma_zz^{-1}, L = Lambda_zz.
struct OmegaPair {
  Matrix omega_zx;
  SymMatrix omega_zz;
};

/// d_ii = gamma_ii - gamma_iz' Gamma_zz^{-1} gamma_iz.
struct DMatrix {
  Vector diag;
};

namespace detail {

inline Matrix inverse_spd(const SymMatrix& m, std::string_view name) {
  try {
    return solve_spd(m, Matrix::Identity(m.order(), m.order()));
  } catch (const Error&) {
    throw Error(ErrorKind::not_positive_definite, std::string(name) + " is not positive definite");
  }
}

inline Matrix solve_named(const SymMatrix& m, const Matrix& rhs, std::string_view name) {
  try {
    return solve_spd(m, rhs);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::not_positive_definite) throw;
    throw Error(ErrorKind::not_positive_definite, std::string(name) + " is not positive definite");
  }
}

}  // namespace detail

/// [[B' A B, B'], [B, A^{-1}]] for positive definite A. Positive
/// semidefinite for any conformable B; [x1; -A B x1] lies in its kernel.
inline SymMatrix lemma1_matrix(const SymMatrix& a, const Matrix& b) {
  if (b.rows() != a.order()) {
    throw Error(ErrorKind::dimension_mismatch, "lemma1_matrix: B must have as many rows as A");
  }
  const Eigen::Index k = a.order(), m = b.cols();
  const Matrix a_inv = detail::inverse_spd(a, "lemma1_matrix: A");
  Matrix out(m + k, m + k);
  out.topLeftCorner(m, m) = b.transpose() * a.matrix() * b;
  out.topRightCorner(m, k) = b.transpose();
  out.bottomLeftCorner(k, m) = b;
  out.bottomRightCorner(k, k) = a_inv;
  return SymMatrix(out);
}

inline OmegaPair build_omega(const MomentSet& mom) {
  const Eigen::Index p = mom.gamma.p(), h = mom.gamma.h();
  const SymMatrix gamma_zz = mom.gamma.zz_sym();
  const SymMatrix lambda_zz = mom.lambda.zz_sym();
  const Matrix g_inv = detail::inverse_spd(gamma_zz, "Gamma_zz");
  if (!try_cholesky(lambda_zz)) {
    throw Error(ErrorKind::not_positive_definite, "Lambda_zz is not positive definite");
  }
  Matrix omega_zx(2 * p, h);
  omega_zx << mom.gamma.zx, mom.lambda.zx;
  // [[G^-1 L G^-1, -G^-1], [-G^-1, L^-1]] with G = Gamma_zz, L = Lambda_zz.
  return OmegaPair{std::move(omega_zx), lemma1_matrix(lambda_zz, -g_inv)};
}

/// Omega_zx' Omega_zz Omega_zx.
inline Matrix omega_term(const OmegaPair& omega) {
  return omega.omega_zx.transpose() * omega.omega_zz.matrix() * omega.omega_zx;
}

inline DMatrix build_d(const SecondMoments& gamma) {
  const Matrix k = detail::solve_named(gamma.zz_sym(), gamma.zx, "Gamma_zz");
  DMatrix d{Vector(gamma.h())};
  const double eps = std::numeric_limits<double>::epsilon();
  for (Eigen::Index i = 0; i < gamma.h(); ++i) {
    const double gii = gamma.xx(i, i);
    const double dii = gii - gamma.zx.col(i).dot(k.col(i));
    if (!(dii > static_cast<double>(gamma.p() + 1) * eps * std::abs(gii))) {
      throw Error(ErrorKind::non_positive_dii,
                  "d_" + std::to_string(i) + " is not positive; regressor " + std::to_string(i) +
                      " is collinear with Z",
                  static_cast<std::size_t>(i));
    }
    d.diag(i) = dii;
  }
  return d;
}

/// Rows g_i = [-gamma_iz' Gamma_zz^{-1} / d_ii, 1 / d_ii] (h x (p+1)),
/// the last rows of Gamma_ii^{-1} by partitioned inversion. One Gamma_zz
/// solve is shared across i.
inline Matrix selector_rows(const SecondMoments& gamma) {
  const Eigen::Index p = gamma.p(), h = gamma.h();
  const Matrix k = detail::solve_named(gamma.zz_sym(), gamma.zx, "Gamma_zz");
  const DMatrix d = build_d(gamma);
  Matrix g(h, p + 1);
  for (Eigen::Index i = 0; i < h; ++i) {
    g.row(i).head(p) = -k.col(i).transpose() / d.diag(i);
    g(i, p) = 1.0 / d.diag(i);
  }
  return g;
}

/// g_i as the last row of an explicitly inverted Gamma_ii.
inline Vector selector_row_by_inverse(const SecondMoments& gamma, Eigen::Index i) {
  const Eigen::Index p = gamma.p();
  const Matrix inv =
      detail::inverse_spd(SymMatrix(gamma.pair_block(i, i)), "Gamma_" + std::to_string(i) + std::to_string(i));
  return inv.row(p).transpose();
}

/// Lambda_xx - Lambda_zx' Lambda_zz^{-1} Lambda_zx, the Schur complement of
/// Lambda_zz in the assembled Lambda.
inline SymMatrix schur_xx(const SecondMoments& lambda) {
  const Matrix k = detail::solve_named(lambda.zz_sym(), lambda.zx, "Lambda_zz");
  return SymMatrix(lambda.xx - lambda.zx.transpose() * k);
}

inline CovarianceEstimate v_closed_form(const MomentSet& mom,
                                        CovarianceMethod method = CovarianceMethod::population_closed_form) {
  if (mom.gamma.p() != mom.lambda.p() || mom.gamma.h() != mom.lambda.h()) {
    throw Error(ErrorKind::dimension_mismatch, "v_closed_form: Gamma and Lambda shapes differ");
  }
  const OmegaPair omega = build_omega(mom);
  const DMatrix d = build_d(mom.gamma);
  const Matrix middle = omega_term(omega) + schur_xx(mom.lambda).matrix();
  const Vector d_inv = d.diag.cwiseInverse();
  return certified(SymMatrix(d_inv.asDiagonal() * middle * d_inv.asDiagonal()), method);
}

inline CovarianceEstimate v_blockwise(const MomentSet& mom,
                                      CovarianceMethod method = CovarianceMethod::population_blockwise) {
  if (mom.gamma.p() != mom.lambda.p() || mom.gamma.h() != mom.lambda.h()) {
    throw Error(ErrorKind::dimension_mismatch, "v_blockwise: Gamma and Lambda shapes differ");
  }
  Matrix g;
  try {
    g = selector_rows(mom.gamma);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::non_positive_dii) throw;
    throw Error(ErrorKind::not_positive_definite,
                "Gamma_ii is not positive definite for regressor " + std::to_string(*e.index()),
                e.index());
  }
  const Eigen::Index h = mom.gamma.h();
  Matrix v(h, h);
  for (Eigen::Index i = 0; i < h; ++i) {
    for (Eigen::Index j = 0; j < h; ++j) {
      v(i, j) = g.row(i) * mom.lambda.pair_block(i, j) * g.row(j).transpose();
    }
  }
  return certified(SymMatrix(v), method);
}

/// sigma2 D^{-1} (Gamma_xx - Gamma_zx' Gamma_zz^{-1} Gamma_zx) D^{-1}, the
/// value of V when Lambda = sigma2 * Gamma.
inline CovarianceEstimate v_homoscedastic(const SecondMoments& gamma, double sigma2) {
  if (!(sigma2 > 0.0)) throw Error(ErrorKind::invalid_argument, "v_homoscedastic: sigma2 must be positive");
  const DMatrix d = build_d(gamma);
  const Vector d_inv = d.diag.cwiseInverse();
  const Matrix core = d_inv.asDiagonal() * schur_xx(gamma).matrix() * d_inv.asDiagonal();
  return certified(SymMatrix(sigma2 * core), CovarianceMethod::homoscedastic);
}

namespace detail {

// a_it = g_i X_it for every t and i: the projected regressors whose
// weighted cross products give the blockwise V entries.
inline Matrix projected_regressors(const Dataset& d, const Matrix& g) {
  const Eigen::Index p = d.p();
  Matrix a = d.z() * g.leftCols(p).transpose();
  for (Eigen::Index i = 0; i < d.h(); ++i) a.col(i) += g(i, p) * d.x().col(i);
  return a;
}

}  // namespace detail

/// Estimator with per-regression residuals:
/// entry (i, j) = g_i Lambda_hat_ij g_j', Lambda_hat_ij = n^{-1} sum_t u_it^2 X_it X_jt'.
/// Lambda_hat_ij != Lambda_hat_ji' in general, so the raw matrix is not
/// symmetric; it is symmetrized on construction and may be indefinite.
inline CovarianceEstimate estimate_v_ghm(const Dataset& d) {
  const std::vector<OlsFit> fits = parsimonious_fits(d);
  const Matrix g = selector_rows(sample_moments(d));
  const Matrix a = detail::projected_regressors(d, g);
  Matrix weighted(d.n(), d.h());
  for (Eigen::Index i = 0; i < d.h(); ++i) {
    weighted.col(i) = fits[static_cast<std::size_t>(i)].residuals.array().square() * a.col(i).array();
  }
  const Matrix v = weighted.transpose() * a / static_cast<double>(d.n());
  return certified(SymMatrix(v), CovarianceMethod::ghm_blockwise);
}

/// Sample moments for the restricted estimator: Gamma_hat with unit weights,
/// Lambda_tilde weighted by the squared restricted residuals.
inline MomentSet restricted_moments(const Dataset& d) {
  const OlsFit fit = restricted_fit(d);
  return MomentSet{sample_moments(d), sample_moments(d, fit.residuals.array().square().matrix())};
}

/// Estimator with the common restricted residuals, evaluated in closed form.
/// Positive definite whenever n^{-1} sum_t u_t^2 X_t X_t' is.
inline CovarianceEstimate estimate_v_restricted(const Dataset& d) {
  return v_closed_form(restricted_moments(d), CovarianceMethod::restricted_closed_form);
}

inline CovarianceEstimate estimate_v_restricted_blockwise(const Dataset& d) {
  return v_blockwise(restricted_moments(d), CovarianceMethod::restricted_blockwise);
}

}  // namespace parsimax

#endif  // PARSIMAX_COVARIANCE_HPP
