#ifndef PARSIMAX_TEST_UTIL_HPP
#define PARSIMAX_TEST_UTIL_HPP

#include <cstdint>
#include <random>

#include "parsimax/data.hpp"
#include "parsimax/linalg.hpp"

namespace parsimax::testing {

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

/// G'G / k + shift * I, well conditioned for shift of order one.
inline Matrix random_spd(std::mt19937_64& rng, Eigen::Index k, double shift = 0.5) {
  const Matrix g = random_matrix(rng, k + 3, k);
  return g.transpose() * g / static_cast<double>(k) + shift * Matrix::Identity(k, k);
}

/// Dataset with an intercept in Z and Gaussian everything else.
inline Dataset random_dataset(std::mt19937_64& rng, Eigen::Index n, Eigen::Index p, Eigen::Index h,
                              double beta = 0.0) {
  Matrix z = random_matrix(rng, n, p);
  z.col(0).setOnes();
  const Matrix x = random_matrix(rng, n, h) + 0.3 * z.col(std::min<Eigen::Index>(1, p - 1)).replicate(1, h);
  Vector e = random_matrix(rng, n, 1).col(0);
  e.array() *= (0.5 + 0.5 * x.col(0).array().square()).sqrt();
  Vector y = z * Vector::Ones(p) + beta * x.rowwise().sum() + e;
  return Dataset(std::move(y), std::move(z), x);
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace parsimax::testing

#endif  // PARSIMAX_TEST_UTIL_HPP
