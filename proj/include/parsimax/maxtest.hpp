#ifndef PARSIMAX_MAXTEST_HPP
#define PARSIMAX_MAXTEST_HPP

// The max test: T = max_i (sqrt(n) beta_hat_i)^2 over the parsimonious
// regressions, with a p-value simulated from N(0, V_hat).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "parsimax/covariance.hpp"
#include "parsimax/data.hpp"
#include "parsimax/error.hpp"
#include "parsimax/linalg.hpp"
#include "parsimax/parallel.hpp"
#include "parsimax/regression.hpp"
#include "parsimax/rng.hpp"

namespace parsimax {

enum class Estimator { ghm_blockwise, restricted_closed_form };
enum class SamplerPolicy { cholesky_then_eigen, eigen_only };
enum class SamplerKind { cholesky, eigen };

inline std::string_view to_string(Estimator e) {
  return e == Estimator::ghm_blockwise ? "ghm_blockwise" : "restricted_closed_form";
}
inline std::string_view to_string(SamplerPolicy s) {
  return s == SamplerPolicy::cholesky_then_eigen ? "cholesky_then_eigen" : "eigen_only";
}
inline std::string_view to_string(SamplerKind s) {
  return s == SamplerKind::cholesky ? "cholesky" : "eigen";
}

struct MaxTestConfig {
  std::size_t draws = 10000;
  std::uint64_t seed = 0;
  Estimator estimator = Estimator::restricted_closed_form;
  SamplerPolicy sampler = SamplerPolicy::cholesky_then_eigen;
  // (1 + #exceed) / (M + 1) instead of #exceed / M.
  bool plus_one = false;
};

struct MaxTestResult {
  Vector betas;
  double statistic = 0.0;
  double p_value = 1.0;
  CovarianceEstimate covariance;
  SamplerKind sampler_used = SamplerKind::cholesky;
  std::size_t draws = 0;
};

/// Draws per RNG stream; block b of draws uses derive_seed(seed, b).
inline constexpr std::size_t kDrawBlock = 4096;

inline double max_statistic(const Vector& betas, Eigen::Index n) {
  if (betas.size() == 0) throw Error(ErrorKind::empty_betas, "max_statistic: no coefficients");
  if (n < 1) throw Error(ErrorKind::invalid_argument, "max_statistic: n must be >= 1");
  return static_cast<double>(n) * betas.array().square().maxCoeff();
}

/// F with F F' = v: the Cholesky factor, or U diag(sqrt(max(lambda, 0)))
/// from the eigendecomposition when Cholesky fails or is not wanted.
struct SamplingFactor {
  Matrix factor;
  SamplerKind kind;
};

inline SamplingFactor sampling_factor(const SymMatrix& v, SamplerPolicy policy) {
  if (policy == SamplerPolicy::cholesky_then_eigen) {
    if (auto f = try_cholesky(v)) return SamplingFactor{f->lower(), SamplerKind::cholesky};
  }
  const SymEigen eig = sym_eigen(v);
  const Vector root = eig.values.cwiseMax(0.0).cwiseSqrt();
  return SamplingFactor{eig.vectors * root.asDiagonal(), SamplerKind::eigen};
}

struct MaxSqDraws {
  std::vector<double> values;
  SamplerKind sampler_used;
};

/// M draws of max_i N_i^2 with N ~ N(0, v). Deterministic in (seed, M) for
/// any worker count.
inline MaxSqDraws sample_max_sq(const SymMatrix& v, std::size_t draws, std::uint64_t seed,
                                SamplerPolicy policy = SamplerPolicy::cholesky_then_eigen) {
  const SamplingFactor f = sampling_factor(v, policy);
  const Eigen::Index h = v.order();
  MaxSqDraws out{std::vector<double>(draws), f.kind};
  const std::size_t blocks = (draws + kDrawBlock - 1) / kDrawBlock;
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t begin = b * kDrawBlock;
    const std::size_t len = std::min(kDrawBlock, draws - begin);
    Engine engine = make_engine(seed, b);
    std::normal_distribution<double> normal;
    Matrix g(h, static_cast<Eigen::Index>(len));
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      for (Eigen::Index i = 0; i < h; ++i) g(i, j) = normal(engine);
    }
    const Matrix n = f.factor * g;
    for (Eigen::Index j = 0; j < n.cols(); ++j) {
      out.values[begin + static_cast<std::size_t>(j)] = n.col(j).array().square().maxCoeff();
    }
  });
  return out;
}

inline MaxSqDraws sample_max_sq(const CovarianceEstimate& v, std::size_t draws, std::uint64_t seed,
                                SamplerPolicy policy = SamplerPolicy::cholesky_then_eigen) {
  return sample_max_sq(v.v, draws, seed, policy);
}

/// Share of simulated draws strictly above `statistic`.
inline double pvalue_from_draws(double statistic, const std::vector<double>& draws, bool plus_one = false) {
  const auto exceed = static_cast<double>(
      std::count_if(draws.begin(), draws.end(), [statistic](double t) { return t > statistic; }));
  const auto m = static_cast<double>(draws.size());
  return plus_one ? (exceed + 1.0) / (m + 1.0) : exceed / m;
}

struct SimulatedPValue {
  double p_value;
  SamplerKind sampler_used;
};

inline SimulatedPValue simulate_pvalue(double statistic, const SymMatrix& v, const MaxTestConfig& cfg) {
  if (!(statistic >= 0.0)) throw Error(ErrorKind::invalid_argument, "simulate_pvalue: statistic must be >= 0");
  if (cfg.draws < 1) throw Error(ErrorKind::invalid_argument, "simulate_pvalue: draws must be >= 1");
  const MaxSqDraws d = sample_max_sq(v, cfg.draws, cfg.seed, cfg.sampler);
  return SimulatedPValue{pvalue_from_draws(statistic, d.values, cfg.plus_one), d.sampler_used};
}

inline SimulatedPValue simulate_pvalue(double statistic, const CovarianceEstimate& v, const MaxTestConfig& cfg) {
  return simulate_pvalue(statistic, v.v, cfg);
}

inline CovarianceEstimate estimate_covariance(const Dataset& d, Estimator e) {
  return e == Estimator::ghm_blockwise ? estimate_v_ghm(d) : estimate_v_restricted(d);
}

inline MaxTestResult run_max_test(const Dataset& d, const MaxTestConfig& cfg) {
  Vector betas;
  try {
    betas = parsimonious_betas(parsimonious_fits(d));
  } catch (const Error& e) {
    throw e.with_stage("parsimonious_fits");
  }
  const double statistic = max_statistic(betas, d.n());
  std::optional<CovarianceEstimate> cov;
  try {
    cov = estimate_covariance(d, cfg.estimator);
  } catch (const Error& e) {
    throw e.with_stage(std::string("covariance[") + std::string(to_string(cfg.estimator)) + "]");
  }
  SimulatedPValue pv{};
  try {
    pv = simulate_pvalue(statistic, *cov, cfg);
  } catch (const Error& e) {
    throw e.with_stage("simulate_pvalue");
  }
  return MaxTestResult{std::move(betas), statistic, pv.p_value, std::move(*cov), pv.sampler_used, cfg.draws};
}

}  // namespace parsimax

#endif  // PARSIMAX_MAXTEST_HPP
