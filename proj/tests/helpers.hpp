#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "newma/rng.hpp"

namespace newma::testing {

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double sample_stdev(const std::vector<double>& v) {
  return std::sqrt(sample_variance(v));
}

inline double stderr_of_mean(const std::vector<double>& v) {
  return sample_stdev(v) / std::sqrt(static_cast<double>(v.size()));
}

// Gaussian-kernel value for bandwidth sigma.
inline double gaussian_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                              double sigma) {
  return std::exp(-(x - y).squaredNorm() / (2.0 * sigma * sigma));
}

// Closed-form squared kernel distance between N(mu1, I) and N(mu2, I) in
// dimension d under the Gaussian kernel: the three cross-expectations have
// Gaussian integrals (sigma^2 / (sigma^2 + 2))^{d/2} e^{-|mu1-mu2|^2 / (2(sigma^2+2))}.
inline double gaussian_mmd_sq(const Eigen::VectorXd& mu1, const Eigen::VectorXd& mu2,
                              double sigma) {
  const double d = static_cast<double>(mu1.size());
  const double s2 = sigma * sigma;
  const double base = std::pow(s2 / (s2 + 2.0), 0.5 * d);
  const double cross = base * std::exp(-(mu1 - mu2).squaredNorm() / (2.0 * (s2 + 2.0)));
  return 2.0 * (base - cross);
}

inline Eigen::MatrixXd random_gaussian_matrix(int rows, int cols, std::uint64_t seed,
                                              double scale = 1.0) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (long i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

}  // namespace newma::testing
