#ifndef PARSIMAX_HARNESS_HPP
#define PARSIMAX_HARNESS_HPP

// Monte Carlo experiments: data generating processes, size and power of the
// max test, convergence of the covariance estimators, a census of
// finite-sample positive definiteness and the robust Wald baseline.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "parsimax/covariance.hpp"
#include "parsimax/data.hpp"
#include "parsimax/error.hpp"
#include "parsimax/linalg.hpp"
#include "parsimax/maxtest.hpp"
#include "parsimax/parallel.hpp"
#include "parsimax/regression.hpp"
#include "parsimax/rng.hpp"

namespace parsimax {

// ---------------------------------------------------------------------------
// Data generating processes

/// Gaussian regressors, iid over t. Within a row, the non-constant columns
/// of Z followed by X form a stationary AR(1) across columns with
/// correlation rho^|k - l|.
struct IidGaussian {
  double rho = 0.0;
};

/// Each regressor series is a stationary AR(1) over t with coefficient phi
/// and unit variance; innovations are cross-correlated as in IidGaussian.
struct Ar1Gaussian {
  double phi = 0.5;
  double rho = 0.0;
};

/// Rows (z_t, x_t) drawn iid from a finite population; the error at an
/// atom has variance sigma2 of that atom, so the error model is unused.
struct PopulationRegressors {
  std::shared_ptr<const FinitePopulation> population;
};

using RegressorModel = std::variant<IidGaussian, Ar1Gaussian, PopulationRegressors>;

struct Homoscedastic {
  double sigma = 1.0;
};

/// eps_t = sqrt(intercept + sum_i coefficients[i] * x_it^2) * e_t. An empty
/// coefficient list means (0.5, 0, ..., 0).
struct HeteroscedasticScale {
  double intercept = 0.5;
  std::vector<double> coefficients;
};

using ErrorModel = std::variant<Homoscedastic, HeteroscedasticScale>;

/// y_t = z_t' a + x_t' b + eps_t. Z always carries the constant in column 0
/// for the Gaussian regressor models. Empty a or b mean zero vectors.
struct DgpConfig {
  Eigen::Index n = 200;
  Eigen::Index p = 2;
  Eigen::Index h = 10;
  RegressorModel regressors = IidGaussian{};
  ErrorModel errors = Homoscedastic{};
  std::vector<double> a;
  std::vector<double> b;
  std::uint64_t seed = 0;
};

namespace detail {

inline Vector coefficient_vector(const std::vector<double>& v, Eigen::Index len, const char* name) {
  if (v.empty()) return Vector::Zero(len);
  if (static_cast<Eigen::Index>(v.size()) != len) {
    throw Error(ErrorKind::dimension_mismatch,
                std::string("DgpConfig: ") + name + " has " + std::to_string(v.size()) +
                    " entries, expected " + std::to_string(len));
  }
  return Eigen::Map<const Vector>(v.data(), len);
}

inline Vector hetero_coefficients(const HeteroscedasticScale& e, Eigen::Index h) {
  if (e.coefficients.empty()) {
    Vector c = Vector::Zero(h);
    c(0) = 0.5;
    return c;
  }
  return coefficient_vector(e.coefficients, h, "heteroscedastic coefficients");
}

inline void check_unit_interval(double v, const char* name) {
  if (!(std::abs(v) < 1.0)) {
    throw Error(ErrorKind::invalid_argument, std::string("DgpConfig: |") + name + "| must be < 1");
  }
}

// Row of k standard normals with corr(w_k, w_l) = rho^|k - l|.
inline void correlated_row(Engine& engine, std::normal_distribution<double>& normal, double rho,
                           Eigen::Ref<Vector> out) {
  const double s = std::sqrt(1.0 - rho * rho);
  for (Eigen::Index k = 0; k < out.size(); ++k) {
    const double e = normal(engine);
    out(k) = k == 0 ? e : rho * out(k - 1) + s * e;
  }
}

}  // namespace detail

inline void validate(const DgpConfig& cfg) {
  if (auto* m = std::get_if<IidGaussian>(&cfg.regressors)) detail::check_unit_interval(m->rho, "rho");
  if (auto* m = std::get_if<Ar1Gaussian>(&cfg.regressors)) {
    detail::check_unit_interval(m->rho, "rho");
    detail::check_unit_interval(m->phi, "phi");
  }
  if (auto* m = std::get_if<PopulationRegressors>(&cfg.regressors)) {
    if (!m->population) throw Error(ErrorKind::invalid_argument, "DgpConfig: population is null");
    if (m->population->p() != cfg.p || m->population->h() != cfg.h) {
      throw Error(ErrorKind::dimension_mismatch, "DgpConfig: population dimensions differ from p, h");
    }
  }
  if (auto* e = std::get_if<Homoscedastic>(&cfg.errors)) {
    if (!(e->sigma >= 0.0)) throw Error(ErrorKind::invalid_argument, "DgpConfig: sigma must be >= 0");
  }
  if (auto* e = std::get_if<HeteroscedasticScale>(&cfg.errors)) {
    const Vector c = detail::hetero_coefficients(*e, cfg.h);
    if (!(e->intercept > 0.0) || (c.array() < 0.0).any()) {
      throw Error(ErrorKind::invalid_argument,
                  "DgpConfig: heteroscedastic scale needs intercept > 0 and coefficients >= 0");
    }
  }
  detail::coefficient_vector(cfg.a, cfg.p, "a");
  detail::coefficient_vector(cfg.b, cfg.h, "b");
}

inline Dataset generate(const DgpConfig& cfg) {
  validate(cfg);
  const Eigen::Index n = cfg.n, p = cfg.p, h = cfg.h;
  Engine engine = make_engine(cfg.seed, kDataStream);
  std::normal_distribution<double> normal;
  Matrix z(n, p), x(n, h);
  Vector sigma2_atom;  // population model only

  if (auto* pop = std::get_if<PopulationRegressors>(&cfg.regressors)) {
    const auto& atoms = pop->population->atoms();
    std::vector<double> probs;
    probs.reserve(atoms.size());
    for (const Atom& a : atoms) probs.push_back(a.prob);
    std::discrete_distribution<std::size_t> pick(probs.begin(), probs.end());
    sigma2_atom.resize(n);
    for (Eigen::Index t = 0; t < n; ++t) {
      const Atom& a = atoms[pick(engine)];
      z.row(t) = a.z.transpose();
      x.row(t) = a.x.transpose();
      sigma2_atom(t) = a.sigma2;
    }
  } else {
    const Eigen::Index k = p - 1 + h;
    Matrix w(n, k);
    Vector row(k);
    if (auto* m = std::get_if<IidGaussian>(&cfg.regressors)) {
      for (Eigen::Index t = 0; t < n; ++t) {
        detail::correlated_row(engine, normal, m->rho, row);
        w.row(t) = row.transpose();
      }
    } else {
      const auto& ar = std::get<Ar1Gaussian>(cfg.regressors);
      const double s = std::sqrt(1.0 - ar.phi * ar.phi);
      detail::correlated_row(engine, normal, ar.rho, row);
      w.row(0) = row.transpose();
      for (Eigen::Index t = 1; t < n; ++t) {
        detail::correlated_row(engine, normal, ar.rho, row);
        w.row(t) = ar.phi * w.row(t - 1) + s * row.transpose();
      }
    }
    z.col(0).setOnes();
    z.rightCols(p - 1) = w.leftCols(p - 1);
    x = w.rightCols(h);
  }

  const Vector a = detail::coefficient_vector(cfg.a, p, "a");
  const Vector b = detail::coefficient_vector(cfg.b, h, "b");
  Vector eps(n);
  for (Eigen::Index t = 0; t < n; ++t) eps(t) = normal(engine);
  if (sigma2_atom.size() == n) {
    eps.array() *= sigma2_atom.array().sqrt();
  } else if (auto* homo = std::get_if<Homoscedastic>(&cfg.errors)) {
    eps *= homo->sigma;
  } else {
    const auto& het = std::get<HeteroscedasticScale>(cfg.errors);
    const Vector c = detail::hetero_coefficients(het, h);
    const Vector scale = (het.intercept + (x.array().square().matrix() * c).array()).sqrt();
    eps.array() *= scale.array();
  }
  Vector y = z * a + x * b + eps;
  return Dataset(std::move(y), std::move(z), std::move(x));
}

/// Random heteroscedastic (or homoscedastic, sigma2 = 1) population with an
/// intercept in z. `atoms` = 0 picks 4 (p + h) + 8 atoms.
inline FinitePopulation random_population(Eigen::Index p, Eigen::Index h, std::uint64_t seed,
                                          bool heteroscedastic = true, std::size_t atoms = 0) {
  if (atoms == 0) atoms = static_cast<std::size_t>(4 * (p + h) + 8);
  Engine engine(derive_seed(seed, 0x706f70ULL));
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.5, 1.5);
  std::vector<Atom> out(atoms);
  double total = 0.0;
  for (Atom& a : out) {
    a.z = Vector(p);
    a.z(0) = 1.0;
    for (Eigen::Index k = 1; k < p; ++k) a.z(k) = normal(engine);
    a.x = Vector(h);
    const double common = p > 1 ? a.z(1) : normal(engine);
    for (Eigen::Index i = 0; i < h; ++i) a.x(i) = 0.4 * common + 0.3 + normal(engine);
    a.sigma2 = heteroscedastic ? 0.25 + 0.5 * a.x(0) * a.x(0) + unif(engine) : 1.0;
    a.prob = unif(engine);
    total += a.prob;
  }
  for (Atom& a : out) a.prob /= total;
  return FinitePopulation(std::move(out));
}

// ---------------------------------------------------------------------------
// Wald baseline

struct WaldResult {
  double statistic = 0.0;
  double p_value = 1.0;
  Eigen::Index df = 0;
};

/// Upper tail of chi-square with `df` degrees of freedom.
inline double chi2_upper_tail(double x, double df) {
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

/// W = n b' V_b^{-1} b with V_b the b-block of the heteroscedasticity-robust
/// sandwich Gamma^{-1} Lambda Gamma^{-1} from the full regression.
inline WaldResult wald_baseline(const Dataset& d) {
  const OlsFit fit = full_fit(d);
  const Eigen::Index p = d.p(), h = d.h();
  const Matrix design = d.design();
  const double inv_n = 1.0 / static_cast<double>(d.n());
  const SymMatrix gamma(weighted_gram(design, Vector::Ones(d.n())) * inv_n);
  const Matrix lambda = weighted_gram(design, fit.residuals.array().square().matrix()) * inv_n;
  const Matrix g_inv = solve_spd(gamma, Matrix::Identity(p + h, p + h));
  const SymMatrix sandwich(g_inv * lambda * g_inv);
  const SymMatrix v_b(sandwich.matrix().bottomRightCorner(h, h));
  const Vector b = fit.coefficients.tail(h);
  WaldResult out;
  out.df = h;
  if (b.isZero(0.0)) return out;
  out.statistic = static_cast<double>(d.n()) * b.dot(solve_spd(v_b, b).col(0));
  out.p_value = chi2_upper_tail(out.statistic, static_cast<double>(h));
  return out;
}

// ---------------------------------------------------------------------------
// Experiments

struct EstimatorSummary {
  double mean_min_eigenvalue = 0.0;
  std::size_t pd_failure_count = 0;
  std::size_t evaluated = 0;
};

struct ConsistencyPoint {
  Eigen::Index n = 0;
  double restricted_error = 0.0;   // mean ||V_tilde - V||_F
  double ghm_error = 0.0;          // mean ||V_hat - V||_F
  double mutual_distance = 0.0;    // mean ||V_tilde - V_hat||_F
};

struct ExperimentReport {
  std::size_t replications = 0;
  double alpha = 0.0;
  double rejection_rate = 0.0;
  double rejection_se = 0.0;
  std::optional<double> wald_rejection_rate;
  std::map<std::string, EstimatorSummary> estimators;
  std::map<std::string, std::size_t> sampler_counts;
  std::vector<ConsistencyPoint> frobenius_errors;
  double wall_time = 0.0;  // seconds
};

namespace detail {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// A level-0 test never rejects; otherwise reject when p <= alpha.
inline bool rejects(double p_value, double alpha) { return alpha > 0.0 && p_value <= alpha; }

struct RepOutcome {
  double p_value = 1.0;
  double min_eigenvalue = 0.0;
  bool pd = false;
  SamplerKind sampler = SamplerKind::cholesky;
  bool wald_reject = false;
};

inline void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorKind::invalid_argument, "alpha must lie in [0, 1]");
}

inline ExperimentReport rejection_experiment(const DgpConfig& cfg, const MaxTestConfig& test,
                                             std::size_t replications, double alpha, bool include_wald) {
  validate(cfg);
  check_alpha(alpha);
  if (replications < 1) throw Error(ErrorKind::invalid_argument, "replications must be >= 1");
  Stopwatch clock;
  std::vector<RepOutcome> outcomes(replications);
  parallel_for(replications, [&](std::size_t r) {
    const std::uint64_t rep_seed = derive_seed(cfg.seed, r);
    DgpConfig rep_cfg = cfg;
    rep_cfg.seed = rep_seed;
    const Dataset d = generate(rep_cfg);
    MaxTestConfig rep_test = test;
    rep_test.seed = derive_seed(rep_seed, kSamplerStream);
    const MaxTestResult res = run_max_test(d, rep_test);
    RepOutcome& o = outcomes[r];
    o.p_value = res.p_value;
    o.min_eigenvalue = res.covariance.certificate.min_eigenvalue;
    o.pd = res.covariance.certificate.positive_definite();
    o.sampler = res.sampler_used;
    if (include_wald) o.wald_reject = rejects(wald_baseline(d).p_value, alpha);
  });

  ExperimentReport rep;
  rep.replications = replications;
  rep.alpha = alpha;
  std::size_t rejected = 0, wald_rejected = 0;
  EstimatorSummary summary;
  for (const RepOutcome& o : outcomes) {
    rejected += rejects(o.p_value, alpha) ? 1 : 0;
    wald_rejected += o.wald_reject ? 1 : 0;
    summary.mean_min_eigenvalue += o.min_eigenvalue;
    summary.pd_failure_count += o.pd ? 0 : 1;
    ++rep.sampler_counts[std::string(to_string(o.sampler))];
  }
  const auto reps = static_cast<double>(replications);
  summary.evaluated = replications;
  summary.mean_min_eigenvalue /= reps;
  rep.estimators[std::string(to_string(test.estimator))] = summary;
  rep.rejection_rate = static_cast<double>(rejected) / reps;
  rep.rejection_se = std::sqrt(rep.rejection_rate * (1.0 - rep.rejection_rate) / reps);
  if (include_wald) rep.wald_rejection_rate = static_cast<double>(wald_rejected) / reps;
  rep.wall_time = clock.seconds();
  return rep;
}

}  // namespace detail

/// Rejection rate of the max test under the null (b must be zero).
/// Replication r uses derive_seed(cfg.seed, r).
inline ExperimentReport size_experiment(const DgpConfig& cfg, const MaxTestConfig& test,
                                        std::size_t replications, double alpha,
                                        bool include_wald = false) {
  for (double v : cfg.b) {
    if (v != 0.0) throw Error(ErrorKind::invalid_argument, "size_experiment: b must be zero");
  }
  return detail::rejection_experiment(cfg, test, replications, alpha, include_wald);
}

/// Rejection rate under an alternative. With b = 0 the output equals
/// size_experiment for the same seeds.
inline ExperimentReport power_experiment(const DgpConfig& cfg, const MaxTestConfig& test,
                                         std::size_t replications, double alpha,
                                         bool include_wald = false) {
  return detail::rejection_experiment(cfg, test, replications, alpha, include_wald);
}

/// Mean Frobenius distance of both sample estimators to the exact V of the
/// population DGP, for each n in the grid. Replication r at sample size n
/// uses derive_seed(derive_seed(cfg.seed, n), r).
inline ExperimentReport consistency_experiment(const DgpConfig& cfg, const std::vector<Eigen::Index>& n_grid,
                                               std::size_t replications) {
  const auto* pop = std::get_if<PopulationRegressors>(&cfg.regressors);
  if (!pop) throw Error(ErrorKind::invalid_argument, "consistency_experiment: needs a population DGP");
  for (double v : cfg.b) {
    if (v != 0.0) throw Error(ErrorKind::invalid_argument, "consistency_experiment: b must be zero");
  }
  if (replications < 1) throw Error(ErrorKind::invalid_argument, "replications must be >= 1");
  validate(cfg);
  detail::Stopwatch clock;
  const Matrix v_true = v_closed_form(population_moments(*pop->population)).v.matrix();

  ExperimentReport rep;
  rep.replications = replications;
  for (Eigen::Index n : n_grid) {
    struct Errors {
      double restricted, ghm, mutual;
    };
    std::vector<Errors> errs(replications);
    const std::uint64_t grid_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(n));
    parallel_for(replications, [&](std::size_t r) {
      DgpConfig rep_cfg = cfg;
      rep_cfg.n = n;
      rep_cfg.seed = derive_seed(grid_seed, r);
      const Dataset d = generate(rep_cfg);
      const Matrix vt = estimate_v_restricted(d).v.matrix();
      const Matrix vh = estimate_v_ghm(d).v.matrix();
      errs[r] = Errors{(vt - v_true).norm(), (vh - v_true).norm(), (vt - vh).norm()};
    });
    ConsistencyPoint pt;
    pt.n = n;
    for (const Errors& e : errs) {
      pt.restricted_error += e.restricted;
      pt.ghm_error += e.ghm;
      pt.mutual_distance += e.mutual;
    }
    const auto reps = static_cast<double>(replications);
    pt.restricted_error /= reps;
    pt.ghm_error /= reps;
    pt.mutual_distance /= reps;
    rep.frobenius_errors.push_back(pt);
  }
  rep.wall_time = clock.seconds();
  return rep;
}

/// Counts replications in which each estimator fails to be certified
/// positive definite. A restricted estimate that cannot be formed at all
/// (singular Lambda_zz) counts as a failure.
inline ExperimentReport pd_failure_census(const DgpConfig& cfg, std::size_t replications) {
  validate(cfg);
  if (replications < 1) throw Error(ErrorKind::invalid_argument, "replications must be >= 1");
  detail::Stopwatch clock;
  struct Outcome {
    PDCertificate ghm, restricted;
  };
  std::vector<Outcome> outcomes(replications);
  parallel_for(replications, [&](std::size_t r) {
    DgpConfig rep_cfg = cfg;
    rep_cfg.seed = derive_seed(cfg.seed, r);
    const Dataset d = generate(rep_cfg);
    Outcome& o = outcomes[r];
    o.ghm = estimate_v_ghm(d).certificate;
    try {
      o.restricted = estimate_v_restricted(d).certificate;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::not_positive_definite) throw;
      o.restricted = PDCertificate{PDStatus::indefinite, 0.0, 0.0};
    }
  });
  ExperimentReport rep;
  rep.replications = replications;
  auto& ghm = rep.estimators[std::string(to_string(Estimator::ghm_blockwise))];
  auto& restricted = rep.estimators[std::string(to_string(Estimator::restricted_closed_form))];
  for (const Outcome& o : outcomes) {
    ghm.mean_min_eigenvalue += o.ghm.min_eigenvalue;
    ghm.pd_failure_count += o.ghm.positive_definite() ? 0 : 1;
    restricted.mean_min_eigenvalue += o.restricted.min_eigenvalue;
    restricted.pd_failure_count += o.restricted.positive_definite() ? 0 : 1;
  }
  for (auto* s : {&ghm, &restricted}) {
    s->evaluated = replications;
    s->mean_min_eigenvalue /= static_cast<double>(replications);
  }
  rep.wall_time = clock.seconds();
  return rep;
}

}  // namespace parsimax

#endif  // PARSIMAX_HARNESS_HPP
