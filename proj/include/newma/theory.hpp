#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

namespace newma {

// Standard normal CDF.
double normal_cdf(double x);

// Average run length of the two-average detector on a scalar embedded stream,
// computed from the discretized Markov chain of the average pair. The grid
// spans [-1/eps, 1/eps] with spacing eps; continuation states are the grid
// pairs within tau of each other. The chain is restricted to the part of the
// grid the averages can actually reach, bounded through the quantiles of the
// null CDF at support_tail_mass, and the expected absorption time is obtained
// from a sparse linear solve.
struct ArlMarkovConfig {
  std::function<double(double)> cdf;  // CDF of the embedded sample under the null
  double big_lambda = 0.0;
  double small_lambda = 0.0;
  double tau = 0.0;
  double grid_eps = 0.0;
  double init_value = 0.0;            // shared initial value of both averages
  double support_tail_mass = 1e-13;   // per-side mass outside the truncated grid
  std::size_t max_states = 4000000;
};

struct ArlMarkovResult {
  double arl = 0.0;
  std::size_t num_states = 0;
  double solve_residual = 0.0;
  double max_row_sum = 0.0;  // largest continuation-mass row of the chain
};

ArlMarkovResult arl_markov(const ArlMarkovConfig& config);

// Direct simulation: run the scalar recursion until the first flag, averaged
// over independent runs. Runs that hit the horizon are censored and excluded
// from the mean.
struct ArlMonteCarloResult {
  double mean = 0.0;
  double stderr_of_mean = 0.0;
  int completed = 0;
  int censored = 0;
};

ArlMonteCarloResult arl_monte_carlo(double big_lambda, double small_lambda, double tau,
                                    const std::function<double(class Rng&)>& sampler,
                                    int runs, long horizon, std::uint64_t seed);

// Limit law of the scaled squared statistic under the null: a weighted sum of
// independent chi-square(1) variables with weights scale() * eigenvalues.
struct NullLawSpec {
  Eigen::VectorXd eigenvalues;  // nonnegative
  double factor_ratio = 0.0;    // c = big_lambda / small_lambda, > 1

  double scale() const;  // (1-c)^2 / (2 (1+c))
  void validate() const;
};

Eigen::VectorXd simulate_null_law(const NullLawSpec& spec, int n_draws,
                                  std::uint64_t seed);

// Two-sample Kolmogorov-Smirnov distance.
double ks_distance(Eigen::VectorXd a, Eigen::VectorXd b);

// Toy construction with known spectrum: uniform inputs on [0, 1] embedded by
// scaled cosines sqrt(xi_l) * sqrt(2) cos(2 pi l x), whose centered inner
// product kernel has exactly the eigenvalues xi_l. Runs n_sims independent
// streams to the earliest admissible horizon, collects the scaled squared
// statistic, and draws the matching limit-law sample.
struct CosineNullExperimentConfig {
  double big_lambda = 0.02;
  double small_lambda = 0.01;
  int modes = 30;
  int n_sims = 1000;
  std::uint64_t seed = 0;
  long t_override = 0;  // 0: use ceil((2/small_lambda) log(1/small_lambda))
};

struct CosineNullExperimentResult {
  Eigen::VectorXd empirical;    // scaled squared statistic per simulation
  Eigen::VectorXd law;          // limit-law draws with the same spectrum
  Eigen::VectorXd eigenvalues;  // the generated spectrum (sums to one)
  long t_used = 0;
  double ks = 0.0;
};

CosineNullExperimentResult cosine_null_experiment(const CosineNullExperimentConfig& config);

}  // namespace newma
