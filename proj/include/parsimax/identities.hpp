#ifndef PARSIMAX_IDENTITIES_HPP
#define PARSIMAX_IDENTITIES_HPP

// Built-in population suite checking the covariance identities on exact
// moments: closed form against blockwise, the homoscedastic collapse, and
// the partitioned-inverse selector rows against explicit inversion.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "parsimax/covariance.hpp"
#include "parsimax/data.hpp"
#include "parsimax/harness.hpp"

namespace parsimax {

struct IdentityCase {
  Eigen::Index p = 0;
  Eigen::Index h = 0;
  double closed_vs_blockwise = 0.0;  // max |entry difference|
  double homoscedastic_gap = 0.0;    // max |v_closed_form(G, s2 G) - v_homoscedastic(G, s2)|
  double omega_term_homoscedastic = 0.0;  // max |Omega term| when Lambda = s2 Gamma
  double selector_gap = 0.0;         // max |g_i(formula) - g_i(inverse)|
  bool closed_form_pd = false;
  bool lambda_pd = false;
};

struct IdentityReport {
  std::vector<IdentityCase> cases;
  double tolerance = 1e-10;

  double max_closed_vs_blockwise() const {
    double m = 0.0;
    for (const auto& c : cases) m = std::max(m, c.closed_vs_blockwise);
    return m;
  }
  double max_homoscedastic_gap() const {
    double m = 0.0;
    for (const auto& c : cases) m = std::max({m, c.homoscedastic_gap, c.omega_term_homoscedastic});
    return m;
  }
  double max_selector_gap() const {
    double m = 0.0;
    for (const auto& c : cases) m = std::max(m, c.selector_gap);
    return m;
  }
  bool passed() const {
    bool pd = std::all_of(cases.begin(), cases.end(),
                          [](const IdentityCase& c) { return !c.lambda_pd || c.closed_form_pd; });
    return pd && max_closed_vs_blockwise() < tolerance && max_homoscedastic_gap() < tolerance &&
           max_selector_gap() < tolerance;
  }
};

inline IdentityCase check_identities(const FinitePopulation& pop, double sigma2 = 2.0) {
  IdentityCase c;
  c.p = pop.p();
  c.h = pop.h();
  const MomentSet mom = population_moments(pop);
  const CovarianceEstimate closed = v_closed_form(mom);
  const CovarianceEstimate block = v_blockwise(mom);
  c.closed_vs_blockwise = (closed.v.matrix() - block.v.matrix()).cwiseAbs().maxCoeff();
  c.closed_form_pd = closed.certificate.positive_definite();
  c.lambda_pd = certify_pd(mom.lambda.assembled()).positive_definite();

  const SecondMoments scaled{sigma2 * mom.gamma.zz, sigma2 * mom.gamma.zx, sigma2 * mom.gamma.xx};
  const MomentSet homo{mom.gamma, scaled};
  c.homoscedastic_gap =
      (v_closed_form(homo).v.matrix() - v_homoscedastic(mom.gamma, sigma2).v.matrix()).cwiseAbs().maxCoeff();
  c.omega_term_homoscedastic = omega_term(build_omega(homo)).cwiseAbs().maxCoeff();

  const Matrix g = selector_rows(mom.gamma);
  for (Eigen::Index i = 0; i < pop.h(); ++i) {
    const Vector by_inverse = selector_row_by_inverse(mom.gamma, i);
    c.selector_gap = std::max(c.selector_gap, (g.row(i).transpose() - by_inverse).cwiseAbs().maxCoeff());
  }
  return c;
}

/// (p, h) over {1, 2, 3} x {1, 2, 5, 10}, one heteroscedastic population each.
inline IdentityReport run_identity_suite(std::uint64_t seed = 0) {
  IdentityReport report;
  for (Eigen::Index p : {1, 2, 3}) {
    for (Eigen::Index h : {1, 2, 5, 10}) {
      const auto pop = random_population(p, h, derive_seed(seed, static_cast<std::uint64_t>(10 * p + h)));
      report.cases.push_back(check_identities(pop));
    }
  }
  return report;
}

}  // namespace parsimax

#endif  // PARSIMAX_IDENTITIES_HPP
