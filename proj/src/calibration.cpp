#include "newma/calibration.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "newma/errors.hpp"

namespace newma {

namespace {

void check_factors(double big_lambda, double small_lambda) {
  if (!(small_lambda > 0.0) || !(big_lambda < 1.0) || !(small_lambda < big_lambda))
    throw ConfigError("forgetting factors must satisfy 0 < small < big < 1");
}

double branch_value(double x, int window) {
  return x * std::pow(1.0 - x, window);
}

}  // namespace

int window_size(double big_lambda, double small_lambda) {
  check_factors(big_lambda, small_lambda);
  const double ratio = std::log(big_lambda / small_lambda) /
                       std::log((1.0 - small_lambda) / (1.0 - big_lambda));
  return static_cast<int>(std::ceil(ratio));
}

double window_contrast(double big_lambda, double small_lambda, int window) {
  return std::pow(1.0 - small_lambda, window) - std::pow(1.0 - big_lambda, window);
}

double solve_lambda(double big_lambda, int window) {
  if (window < 1) throw ConfigError("solve_lambda: window must be >= 1");
  const double peak = 1.0 / (window + 1.0);
  if (!(big_lambda > peak))
    throw ConfigError("solve_lambda: big factor must exceed 1/(B+1) = " +
                      std::to_string(peak) + " for a distinct solution");
  if (!(big_lambda < 1.0)) throw ConfigError("solve_lambda: big factor must be < 1");
  const double target = branch_value(big_lambda, window);
  double lo = 0.0;
  double hi = peak;
  // f is increasing on [0, 1/(B+1)] from 0 to its maximum, which exceeds the
  // target because big_lambda is not the maximizer.
  while (true) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (branch_value(mid, window) < target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double forgetting_factor_objective(double big_lambda, int window) {
  const double small_lambda = solve_lambda(big_lambda, window);
  const double c = window_contrast(big_lambda, small_lambda, window);
  const double numerator = std::sqrt(small_lambda + big_lambda) +
                           std::pow(1.0 - small_lambda, 2 * window) -
                           std::pow(1.0 - big_lambda, 2 * window);
  return numerator / c;
}

ForgettingFactors choose_forgetting_factors(int window, int grid_points) {
  if (window < 2) throw ConfigError("choose_forgetting_factors: window must be >= 2");
  if (grid_points < 2) throw ConfigError("choose_forgetting_factors: grid too coarse");
  const double lo = 1.0 / (window + 1.0);
  const double hi = 1.0;
  double best_objective = std::numeric_limits<double>::infinity();
  double best_lambda = 0.0;
  for (int g = 1; g <= grid_points; ++g) {
    const double candidate = lo + (hi - lo) * g / (grid_points + 1.0);
    const double objective = forgetting_factor_objective(candidate, window);
    if (objective < best_objective) {
      best_objective = objective;
      best_lambda = candidate;
    }
  }
  ForgettingFactors out;
  out.big_lambda = best_lambda;
  out.small_lambda = solve_lambda(best_lambda, window);
  return out;
}

int choose_num_features(double big_lambda, double small_lambda, double scale) {
  check_factors(big_lambda, small_lambda);
  if (!(scale > 0.0)) throw ConfigError("choose_num_features: scale must be positive");
  const double sum = big_lambda + small_lambda;
  return static_cast<int>(std::ceil(scale / (sum * sum)));
}

WindowDecomposition window_decomposition(double big_lambda, double small_lambda, long t) {
  check_factors(big_lambda, small_lambda);
  const int window = window_size(big_lambda, small_lambda);
  if (t <= window)
    throw ConfigError("window_decomposition: requires t > B = " + std::to_string(window));
  WindowDecomposition out;
  out.window = window;
  out.contrast = window_contrast(big_lambda, small_lambda, window);

  // alpha_i = L(1-L)^{t-i}, beta_i = l(1-l)^{t-i} for i >= 1;
  // alpha_0 = (1-L)^t, beta_0 = (1-l)^t.
  const auto alpha = [&](long i) {
    if (i == 0) return std::pow(1.0 - big_lambda, static_cast<double>(t));
    return big_lambda * std::pow(1.0 - big_lambda, static_cast<double>(t - i));
  };
  const auto beta = [&](long i) {
    if (i == 0) return std::pow(1.0 - small_lambda, static_cast<double>(t));
    return small_lambda * std::pow(1.0 - small_lambda, static_cast<double>(t - i));
  };

  out.recent_weights.resize(window);
  for (long i = t - window + 1; i <= t; ++i)
    out.recent_weights[i - (t - window + 1)] = (alpha(i) - beta(i)) / out.contrast;
  out.old_weights.resize(t - window + 1);
  for (long i = 0; i <= t - window; ++i)
    out.old_weights[i] = (beta(i) - alpha(i)) / out.contrast;
  return out;
}

BoundReport detection_bounds(double big_lambda, double small_lambda, long t,
                             double rho, double norm_bound,
                             std::optional<int> num_features,
                             std::optional<double> init_gap) {
  check_factors(big_lambda, small_lambda);
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("detection_bounds: rho must be in (0,1)");
  if (!(norm_bound > 0.0)) throw ConfigError("detection_bounds: norm bound must be positive");
  const int window = window_size(big_lambda, small_lambda);
  if (t <= window)
    throw ConfigError("detection_bounds: requires t > B = " + std::to_string(window));
  if (num_features && *num_features <= 0)
    throw ConfigError("detection_bounds: feature count must be positive");
  if (init_gap && !(*init_gap >= 0.0))
    throw ConfigError("detection_bounds: init gap must be nonnegative");

  BoundReport report;
  report.rho = rho;
  report.norm_bound = norm_bound;
  const double log_inv_rho = std::log(1.0 / rho);
  report.eps1 = 4.0 * std::sqrt(2.0) * norm_bound *
                std::sqrt((big_lambda + small_lambda) * log_inv_rho);
  const double gap = init_gap.value_or(2.0 * norm_bound);
  report.eps2 = (std::pow(1.0 - small_lambda, static_cast<double>(t)) -
                 std::pow(1.0 - big_lambda, static_cast<double>(t))) *
                gap;
  report.eps_m = std::numeric_limits<double>::quiet_NaN();
  if (num_features)
    report.eps_m = 2.0 * std::sqrt(2.0) * norm_bound * norm_bound *
                   std::sqrt(log_inv_rho / static_cast<double>(*num_features));
  report.contrast = window_contrast(big_lambda, small_lambda, window);
  report.min_detectable_change = 2.0 * (report.eps1 + report.eps2) / report.contrast;
  return report;
}

}  // namespace newma
