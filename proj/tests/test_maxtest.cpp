#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "parsimax/maxtest.hpp"
#include "test_util.hpp"

using namespace parsimax;
using parsimax::testing::max_abs_diff;
using parsimax::testing::random_dataset;
using parsimax::testing::random_matrix;
using parsimax::testing::random_spd;

namespace {

// P(chi2_1 > t) = erfc(sqrt(t / 2)).
double chi2_1_tail(double t) { return std::erfc(std::sqrt(t / 2.0)); }

// P(max(N1^2, N2^2) > t) for independent standard normals.
double max_of_two_tail(double t) {
  const double below = 1.0 - chi2_1_tail(t);
  return 1.0 - below * below;
}

double fraction_above(const std::vector<double>& v, double t) {
  std::size_t k = 0;
  for (double x : v) k += x > t ? 1 : 0;
  return static_cast<double>(k) / static_cast<double>(v.size());
}

struct ThreadGuard {
  explicit ThreadGuard(unsigned n) { set_worker_threads(n); }
  ~ThreadGuard() { set_worker_threads(0); }
};

}  // namespace

TEST_CASE("max_statistic", "[maxtest][statistic]") {
  Vector b(3);
  b << 0.1, -0.3, 0.2;
  CHECK(max_statistic(b, 100) == Catch::Approx(9.0).epsilon(1e-14));
  CHECK(max_statistic(Vector::Zero(4), 50) == 0.0);
  CHECK(max_statistic(Vector::Constant(1, -1.0), 1) == 1.0);
  try {
    max_statistic(Vector(0), 10);
    FAIL("expected EmptyBetas");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::empty_betas);
  }
}

TEST_CASE("sample_max_sq", "[maxtest][draws]") {
  SECTION("zero covariance gives zero draws under either sampler") {
    const SymMatrix zero(Matrix::Zero(3, 3));
    const MaxSqDraws d = sample_max_sq(zero, 1000, 1);
    CHECK(d.sampler_used == SamplerKind::eigen);
    for (double v : d.values) CHECK(v == 0.0);
  }

  SECTION("h = 1, V = 1 reproduces the chi2_1 tail") {
    const MaxSqDraws d = sample_max_sq(SymMatrix::identity(1), 1000000, 2);
    CHECK(d.sampler_used == SamplerKind::cholesky);
    CHECK(std::abs(fraction_above(d.values, 3.841) - chi2_1_tail(3.841)) < 0.001);
  }

  SECTION("h = 2, V = I reproduces the max of two independent chi2_1") {
    const MaxSqDraws d = sample_max_sq(SymMatrix::identity(2), 1000000, 3);
    CHECK(std::abs(fraction_above(d.values, 2.0) - max_of_two_tail(2.0)) < 0.002);
  }

  SECTION("draws are nonnegative and deterministic") {
    std::mt19937_64 rng(61);
    const SymMatrix v(random_spd(rng, 5));
    const MaxSqDraws a = sample_max_sq(v, 10000, 17);
    const MaxSqDraws b = sample_max_sq(v, 10000, 17);
    CHECK(a.values == b.values);
    for (double x : a.values) CHECK(x >= 0.0);
    const MaxSqDraws c = sample_max_sq(v, 10000, 18);
    CHECK(a.values != c.values);
  }

  SECTION("the worker count does not change the draws") {
    std::mt19937_64 rng(62);
    const SymMatrix v(random_spd(rng, 6));
    std::vector<double> one, four;
    {
      ThreadGuard g(1);
      one = sample_max_sq(v, 20000, 5).values;
    }
    {
      ThreadGuard g(4);
      four = sample_max_sq(v, 20000, 5).values;
    }
    CHECK(one == four);
  }

  SECTION("permuting V leaves the max draws' distribution unchanged") {
    std::mt19937_64 rng(63);
    const Matrix v = random_spd(rng, 4);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(4);
    perm.indices() << 3, 1, 0, 2;
    const SymMatrix vp(perm.transpose() * v * perm);
    const std::size_t m = 200000;
    const double a = fraction_above(sample_max_sq(SymMatrix(v), m, 7).values, 3.0);
    const double b = fraction_above(sample_max_sq(vp, m, 8).values, 3.0);
    const double se = std::sqrt(2.0 * a * (1.0 - a) / static_cast<double>(m));
    CHECK(std::abs(a - b) <= 4.0 * se);
  }

  SECTION("cholesky and eigen samplers agree in distribution") {
    std::mt19937_64 rng(64);
    const SymMatrix v(random_spd(rng, 5));
    const std::size_t m = 100000;
    const MaxSqDraws chol = sample_max_sq(v, m, 9, SamplerPolicy::cholesky_then_eigen);
    const MaxSqDraws eig = sample_max_sq(v, m, 10, SamplerPolicy::eigen_only);
    CHECK(chol.sampler_used == SamplerKind::cholesky);
    CHECK(eig.sampler_used == SamplerKind::eigen);
    for (double t : {1.0, 3.0, 6.0}) {
      const double a = fraction_above(chol.values, t);
      const double b = fraction_above(eig.values, t);
      const double se = std::sqrt((a * (1 - a) + b * (1 - b)) / static_cast<double>(m));
      CHECK(std::abs(a - b) <= 3.0 * se + 1e-12);
    }
  }
}

TEST_CASE("sampling_factor", "[maxtest][factor]") {
  std::mt19937_64 rng(65);
  const Matrix v = random_spd(rng, 4);
  for (auto policy : {SamplerPolicy::cholesky_then_eigen, SamplerPolicy::eigen_only}) {
    const SamplingFactor f = sampling_factor(SymMatrix(v), policy);
    CHECK(max_abs_diff(f.factor * f.factor.transpose(), v) < 1e-10);
  }

  SECTION("negative eigenvalues are clipped, so the draws live in the positive eigenspace") {
    Matrix u = random_matrix(rng, 3, 3).householderQr().householderQ();
    Vector lambda(3);
    lambda << 2.0, 0.5, -0.3;
    const SymMatrix indef(u * lambda.asDiagonal() * u.transpose());
    const SamplingFactor f = sampling_factor(indef, SamplerPolicy::cholesky_then_eigen);
    CHECK(f.kind == SamplerKind::eigen);
    Eigen::FullPivLU<Matrix> lu(f.factor);
    CHECK(lu.rank() == 2);
    // The factor reproduces the clipped matrix.
    const Matrix clipped = u * lambda.cwiseMax(0.0).asDiagonal() * u.transpose();
    CHECK(max_abs_diff(f.factor * f.factor.transpose(), clipped) < 1e-12);
  }
}

TEST_CASE("simulate_pvalue", "[maxtest][pvalue]") {
  MaxTestConfig cfg;
  cfg.draws = 1000000;
  cfg.seed = 11;
  const SymMatrix one = SymMatrix::identity(1);

  CHECK(std::abs(simulate_pvalue(3.841, one, cfg).p_value - chi2_1_tail(3.841)) < 0.002);
  CHECK(simulate_pvalue(0.0, one, cfg).p_value == 1.0);
  CHECK(simulate_pvalue(1e6, one, cfg).p_value == 0.0);

  cfg.draws = 10000;
  for (double t : {0.0, 0.5, 2.5, 1e6}) {
    const double p = simulate_pvalue(t, one, cfg).p_value;
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    CHECK(std::abs(p * 10000.0 - std::round(p * 10000.0)) < 1e-9);
  }

  SECTION("monotone in the statistic for a fixed seed") {
    std::mt19937_64 rng(66);
    const SymMatrix v(random_spd(rng, 4));
    double prev = 1.0;
    for (double t = 0.0; t < 20.0; t += 0.25) {
      const double p = simulate_pvalue(t, v, cfg).p_value;
      CHECK(p <= prev);
      prev = p;
    }
  }

  SECTION("plus-one correction") {
    cfg.plus_one = true;
    CHECK(simulate_pvalue(1e6, one, cfg).p_value == Catch::Approx(1.0 / 10001.0));
    CHECK(simulate_pvalue(0.0, one, cfg).p_value == 1.0);
  }

  SECTION("an indefinite V falls back to the eigen sampler") {
    Matrix m(2, 2);
    m << 1.0, 2.0, 2.0, 1.0;
    const SimulatedPValue p = simulate_pvalue(1.0, SymMatrix(m), cfg);
    CHECK(p.sampler_used == SamplerKind::eigen);
    CHECK(p.p_value > 0.0);
  }

  CHECK_THROWS_AS(simulate_pvalue(-1.0, one, cfg), Error);
  cfg.draws = 0;
  CHECK_THROWS_AS(simulate_pvalue(1.0, one, cfg), Error);
}

TEST_CASE("run_max_test", "[maxtest][run]") {
  std::mt19937_64 rng(67);
  const Dataset d = random_dataset(rng, 80, 2, 5);
  MaxTestConfig cfg;
  cfg.draws = 5000;
  cfg.seed = 3;

  const MaxTestResult a = run_max_test(d, cfg);
  const MaxTestResult b = run_max_test(d, cfg);
  CHECK(a.p_value == b.p_value);
  CHECK(a.statistic == b.statistic);
  CHECK(a.draws == 5000);
  CHECK(a.covariance.method == CovarianceMethod::restricted_closed_form);
  CHECK(a.statistic == max_statistic(parsimonious_betas(parsimonious_fits(d)), d.n()));

  cfg.estimator = Estimator::ghm_blockwise;
  const MaxTestResult g = run_max_test(d, cfg);
  CHECK(g.covariance.method == CovarianceMethod::ghm_blockwise);
  CHECK(g.statistic == a.statistic);

  SECTION("permuting the key regressors leaves the statistic unchanged") {
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
    perm.indices() << 4, 2, 0, 1, 3;
    const Dataset dp(d.y(), d.z(), d.x() * perm);
    CHECK(run_max_test(dp, cfg).statistic == Catch::Approx(a.statistic).epsilon(1e-12));
  }

  SECTION("failures carry the stage") {
    Matrix x = d.x();
    x.col(3) = d.z().col(1);
    try {
      run_max_test(Dataset(d.y(), d.z(), x), cfg);
      FAIL("expected RankDeficient");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::rank_deficient);
      CHECK(std::string(e.what()).find("parsimonious_fits") != std::string::npos);
    }
  }
}
