#include "newma/theory.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "newma/errors.hpp"
#include "newma/rng.hpp"

namespace newma {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// Smallest grid x with F(x) >= mass (from_left) or largest with
// F(x) <= 1 - mass, located by bisection on the monotone CDF.
double support_quantile(const std::function<double(double)>& cdf, double lo, double hi,
                        double mass, bool from_left) {
  double a = lo, b = hi;
  for (int iter = 0; iter < 200 && b - a > 1e-12 * (std::abs(a) + std::abs(b) + 1.0);
       ++iter) {
    const double mid = 0.5 * (a + b);
    const double f = cdf(mid);
    if (from_left) {
      if (f < mass)
        a = mid;
      else
        b = mid;
    } else {
      if (f <= 1.0 - mass)
        a = mid;
      else
        b = mid;
    }
  }
  return from_left ? a : b;
}

}  // namespace

ArlMarkovResult arl_markov(const ArlMarkovConfig& config) {
  if (!config.cdf) throw ConfigError("arl_markov: CDF required");
  if (!(config.small_lambda > 0.0 && config.small_lambda < config.big_lambda &&
        config.big_lambda < 1.0))
    throw ConfigError("arl_markov: factors must satisfy 0 < small < big < 1");
  if (!(config.tau > 0.0)) throw ConfigError("arl_markov: tau must be positive");
  if (!(config.grid_eps > 0.0)) throw ConfigError("arl_markov: grid precision must be positive");

  const double eps = config.grid_eps;
  const double radius = 1.0 / eps;
  const long grid_count = static_cast<long>(std::ceil(2.0 / (eps * eps)));
  const auto grid_value = [&](long g) { return static_cast<double>(g) * eps - radius; };
  const auto grid_index = [&](double x) {
    return static_cast<long>(std::llround((x + radius) / eps));
  };
  if (std::abs(config.init_value) > radius)
    throw ConfigError("arl_markov: grid does not contain the initial state");

  // Restrict the grid to values the averages can reach: the convex hull of
  // the initial value and the (numerical) support of the null distribution.
  const double q_lo =
      support_quantile(config.cdf, -radius, radius, config.support_tail_mass, true);
  const double q_hi =
      support_quantile(config.cdf, -radius, radius, config.support_tail_mass, false);
  const double hull_lo = std::min(config.init_value, q_lo);
  const double hull_hi = std::max(config.init_value, q_hi);
  const long g_lo = std::max<long>(0, grid_index(hull_lo) - 1);
  const long g_hi = std::min<long>(grid_count - 1, grid_index(hull_hi) + 1);
  if (g_lo > g_hi) throw NumericError("arl_markov: empty reachable grid");

  const long band = static_cast<long>(std::floor(config.tau / eps + 1e-9));
  const long width = g_hi - g_lo + 1;
  const long band_width = 2 * band + 1;

  // Dense (coordinate, offset) -> state id table; -1 marks pairs outside the
  // grid near the boundary.
  std::vector<int> id_table(static_cast<std::size_t>(width * band_width), -1);
  const auto table_slot = [&](long gi, long gj) {
    return static_cast<std::size_t>((gi - g_lo) * band_width + (gj - gi + band));
  };
  std::vector<std::pair<long, long>> states;
  for (long gi = g_lo; gi <= g_hi; ++gi) {
    const long j_begin = std::max(g_lo, gi - band);
    const long j_end = std::min(g_hi, gi + band);
    for (long gj = j_begin; gj <= j_end; ++gj) {
      if (states.size() >= config.max_states)
        throw NumericError("arl_markov: state count exceeds cap of " +
                           std::to_string(config.max_states) +
                           "; increase grid precision or lower tau");
      id_table[table_slot(gi, gj)] = static_cast<int>(states.size());
      states.emplace_back(gi, gj);
    }
  }
  const long g_init = std::clamp(grid_index(config.init_value), g_lo, g_hi);
  const int init_id = id_table[table_slot(g_init, g_init)];

  const double big = config.big_lambda;
  const double small = config.small_lambda;
  const long n = static_cast<long>(states.size());

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(n) * 32);
  for (long k1 = 0; k1 < n; ++k1) {
    const double z1 = grid_value(states[static_cast<std::size_t>(k1)].first);
    const double z1p = grid_value(states[static_cast<std::size_t>(k1)].second);
    // Candidate fast-average targets cover the image of the reachable sample
    // range, padded by half a cell.
    const double base1 = (1.0 - big) * z1;
    const long i2_min = std::max(g_lo, grid_index(base1 + big * q_lo - 0.5 * eps));
    const long i2_max = std::min(g_hi, grid_index(base1 + big * q_hi + 0.5 * eps));
    const double base2 = (1.0 - small) * z1p;
    for (long gi2 = i2_min; gi2 <= i2_max; ++gi2) {
      const double a2 = grid_value(gi2);
      const double x1_lo = (a2 - base1 - 0.5 * eps) / big;
      const double x1_hi = (a2 - base1 + 0.5 * eps) / big;
      // Slow-average targets consistent with this sample interval.
      const long j2_min = std::max({g_lo, gi2 - band,
                                    grid_index(base2 + small * x1_lo - 0.5 * eps)});
      const long j2_max = std::min({g_hi, gi2 + band,
                                    grid_index(base2 + small * x1_hi + 0.5 * eps)});
      for (long gj2 = j2_min; gj2 <= j2_max; ++gj2) {
        const double b2 = grid_value(gj2);
        const double u1 = std::max(x1_lo, (b2 - base2 - 0.5 * eps) / small);
        const double u2 = std::min(x1_hi, (b2 - base2 + 0.5 * eps) / small);
        if (!(u1 < u2)) continue;
        const double p = config.cdf(u2) - config.cdf(u1);
        if (p <= 0.0) continue;
        const int k2 = id_table[table_slot(gi2, gj2)];
        triplets.emplace_back(static_cast<int>(k1), k2, p);
      }
    }
  }

  std::vector<double> row_sums(static_cast<std::size_t>(n), 0.0);
  for (const auto& t : triplets)
    row_sums[static_cast<std::size_t>(t.row())] += t.value();
  const double max_row_sum =
      row_sums.empty() ? 0.0 : *std::max_element(row_sums.begin(), row_sums.end());

  Eigen::SparseMatrix<double> system(static_cast<int>(n), static_cast<int>(n));
  {
    // system = I - P
    std::vector<Eigen::Triplet<double>> sys;
    sys.reserve(triplets.size() + static_cast<std::size_t>(n));
    for (const auto& t : triplets) sys.emplace_back(t.row(), t.col(), -t.value());
    for (long k = 0; k < n; ++k)
      sys.emplace_back(static_cast<int>(k), static_cast<int>(k), 1.0);
    system.setFromTriplets(sys.begin(), sys.end());
  }
  system.makeCompressed();

  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd expected_steps;
  Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>> solver;
  solver.setTolerance(1e-13);
  solver.setMaxIterations(20000);
  solver.compute(system);
  bool solved = false;
  if (solver.info() == Eigen::Success) {
    expected_steps = solver.solve(ones);
    solved = solver.info() == Eigen::Success;
  }
  double residual = solved
                        ? (system * expected_steps - ones).norm() / ones.norm()
                        : std::numeric_limits<double>::infinity();
  if (!solved || residual > 1e-10) {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(system);
    if (lu.info() != Eigen::Success)
      throw NumericError("arl_markov: singular continuation system");
    expected_steps = lu.solve(ones);
    residual = (system * expected_steps - ones).norm() / ones.norm();
    if (!(residual < 1e-10))
      throw NumericError("arl_markov: linear solve residual " + std::to_string(residual));
  }

  ArlMarkovResult result;
  result.arl = expected_steps[init_id];
  result.num_states = static_cast<std::size_t>(n);
  result.solve_residual = residual;
  result.max_row_sum = max_row_sum;
  return result;
}

ArlMonteCarloResult arl_monte_carlo(double big_lambda, double small_lambda, double tau,
                                    const std::function<double(Rng&)>& sampler,
                                    int runs, long horizon, std::uint64_t seed) {
  if (!(small_lambda > 0.0 && small_lambda < big_lambda && big_lambda < 1.0))
    throw ConfigError("arl_monte_carlo: factors must satisfy 0 < small < big < 1");
  if (!(tau >= 0.0)) throw ConfigError("arl_monte_carlo: tau must be nonnegative");
  if (runs < 100) throw ConfigError("arl_monte_carlo: needs at least 100 runs");
  if (horizon < 1) throw ConfigError("arl_monte_carlo: horizon must be positive");
  if (!sampler) throw ConfigError("arl_monte_carlo: sampler required");

  double sum = 0.0, sum_sq = 0.0;
  int completed = 0, censored = 0;
  for (int r = 0; r < runs; ++r) {
    Rng rng(derive_seed(seed, "arl-mc-run", static_cast<std::uint64_t>(r)));
    double fast = 0.0, slow = 0.0;
    long first_flag = -1;
    for (long t = 1; t <= horizon; ++t) {
      const double value = sampler(rng);
      fast = (1.0 - big_lambda) * fast + big_lambda * value;
      slow = (1.0 - small_lambda) * slow + small_lambda * value;
      if (std::abs(fast - slow) >= tau) {
        first_flag = t;
        break;
      }
    }
    if (first_flag < 0) {
      ++censored;
    } else {
      ++completed;
      sum += static_cast<double>(first_flag);
      sum_sq += static_cast<double>(first_flag) * static_cast<double>(first_flag);
    }
  }

  ArlMonteCarloResult result;
  result.completed = completed;
  result.censored = censored;
  if (completed == 0) {
    result.mean = std::numeric_limits<double>::quiet_NaN();
    result.stderr_of_mean = std::numeric_limits<double>::quiet_NaN();
    return result;
  }
  result.mean = sum / completed;
  if (completed > 1) {
    const double var =
        std::max(0.0, (sum_sq - sum * sum / completed) / (completed - 1));
    result.stderr_of_mean = std::sqrt(var / completed);
  }
  return result;
}

double NullLawSpec::scale() const {
  const double c = factor_ratio;
  return (1.0 - c) * (1.0 - c) / (2.0 * (1.0 + c));
}

void NullLawSpec::validate() const {
  if (eigenvalues.size() < 1) throw ConfigError("null law: needs at least one eigenvalue");
  if ((eigenvalues.array() < 0.0).any())
    throw ConfigError("null law: eigenvalues must be nonnegative");
  if (!(factor_ratio > 1.0)) throw ConfigError("null law: factor ratio must exceed 1");
}

Eigen::VectorXd simulate_null_law(const NullLawSpec& spec, int n_draws, std::uint64_t seed) {
  spec.validate();
  if (n_draws < 1) throw ConfigError("null law: needs at least one draw");
  Rng rng(derive_seed(seed, "null-law-draws"));
  const double g = spec.scale();
  Eigen::VectorXd out(n_draws);
  for (int i = 0; i < n_draws; ++i) {
    double acc = 0.0;
    for (long l = 0; l < spec.eigenvalues.size(); ++l) {
      const double w = rng.normal();
      acc += spec.eigenvalues[l] * w * w;
    }
    out[i] = g * acc;
  }
  return out;
}

double ks_distance(Eigen::VectorXd a, Eigen::VectorXd b) {
  if (a.size() == 0 || b.size() == 0)
    throw ConfigError("ks_distance: empty sample");
  std::sort(a.data(), a.data() + a.size());
  std::sort(b.data(), b.data() + b.size());
  const long n = a.size(), m = b.size();
  long i = 0, j = 0;
  double d = 0.0;
  while (i < n && j < m) {
    const double v = std::min(a[i], b[j]);
    while (i < n && a[i] <= v) ++i;
    while (j < m && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  return d;
}

CosineNullExperimentResult cosine_null_experiment(const CosineNullExperimentConfig& config) {
  if (!(config.small_lambda > 0.0 && config.small_lambda < config.big_lambda &&
        config.big_lambda < 1.0))
    throw ConfigError("cosine null experiment: bad forgetting factors");
  if (config.modes < 1) throw ConfigError("cosine null experiment: needs at least one mode");
  if (config.n_sims < 1) throw ConfigError("cosine null experiment: needs simulations");

  const int modes = config.modes;
  CosineNullExperimentResult result;

  Rng spectrum_rng(derive_seed(config.seed, "cosine-null-spectrum"));
  result.eigenvalues.resize(modes);
  double total = 0.0;
  for (int l = 0; l < modes; ++l) {
    result.eigenvalues[l] = spectrum_rng.uniform();
    total += result.eigenvalues[l];
  }
  result.eigenvalues /= total;

  const double small = config.small_lambda;
  result.t_used = config.t_override > 0
                      ? config.t_override
                      : static_cast<long>(std::ceil(2.0 / small * std::log(1.0 / small)));

  Eigen::VectorXd amplitude = result.eigenvalues.array().sqrt() * std::sqrt(2.0);
  result.empirical.resize(config.n_sims);
  Eigen::VectorXd fast(modes), slow(modes), feat(modes);
  for (int s = 0; s < config.n_sims; ++s) {
    Rng rng(derive_seed(config.seed, "cosine-null-sim", static_cast<std::uint64_t>(s)));
    fast.setZero();
    slow.setZero();
    for (long t = 0; t < result.t_used; ++t) {
      const double x = rng.uniform();
      for (int l = 0; l < modes; ++l)
        feat[l] = amplitude[l] * std::cos(2.0 * kPi * (l + 1) * x);
      fast = (1.0 - config.big_lambda) * fast + config.big_lambda * feat;
      slow = (1.0 - small) * slow + small * feat;
    }
    result.empirical[s] = (fast - slow).squaredNorm() / small;
  }

  NullLawSpec law;
  law.eigenvalues = result.eigenvalues;
  law.factor_ratio = config.big_lambda / config.small_lambda;
  result.law = simulate_null_law(law, config.n_sims, derive_seed(config.seed, "cosine-null-law"));
  result.ks = ks_distance(result.empirical, result.law);
  return result;
}

}  // namespace newma
