#pragma once

#include <Eigen/Dense>
#include <optional>

namespace newma {

// Implied comparison-window size for a forgetting-factor pair,
// ceil(log(L/l) / log((1-l)/(1-L))). Requires 0 < l < L < 1.
int window_size(double big_lambda, double small_lambda);

// (1-l)^B - (1-L)^B, the contrast between the recent-window and old-window
// weight masses. In (0, 1) whenever the factors are distinct.
double window_contrast(double big_lambda, double small_lambda, int window);

// The unique small factor l <= 1/(B+1) with l(1-l)^B = L(1-L)^B, found by
// bisection on the increasing branch of f(x) = x(1-x)^B. Requires
// L > 1/(B+1); at equality the two factors coincide and there is no
// distinct solution.
double solve_lambda(double big_lambda, int window);

struct ForgettingFactors {
  double big_lambda = 0.0;
  double small_lambda = 0.0;
};

// Detectability-ratio objective minimized by choose_forgetting_factors:
// [sqrt(l + L) + (1-l)^{2B} - (1-L)^{2B}] / [(1-l)^B - (1-L)^B] with
// l = solve_lambda(L, B).
double forgetting_factor_objective(double big_lambda, int window);

// Grid-search heuristic: minimizes the objective over a uniform grid of the
// open interval (1/(B+1), 1) and pairs the winner with its matching small
// factor. Requires window >= 2.
ForgettingFactors choose_forgetting_factors(int window, int grid_points = 1000);

// Feature-count rule m = ceil(scale * (L + l)^-2).
int choose_num_features(double big_lambda, double small_lambda, double scale = 0.25);

// Weights of the implicit two-window average: for t > B,
//   z_t - z'_t = C (sum_recent a_i psi(x_i) - b_0 z_0 - sum_old b_i psi(x_i)).
// recent_weights holds a_{t-B+1}..a_t; old_weights holds b_0..b_{t-B}.
// Both sum to one.
struct WindowDecomposition {
  int window = 0;                  // B
  double contrast = 0.0;           // C
  Eigen::VectorXd recent_weights;  // size B
  Eigen::VectorXd old_weights;     // size t - B + 1, index 0 is the z_0 weight
};

WindowDecomposition window_decomposition(double big_lambda, double small_lambda,
                                         long t);

// High-probability envelope of the detection statistic at a fixed time and
// the smallest moment change it can separate.
struct BoundReport {
  double eps1 = 0.0;                   // concentration term
  double eps2 = 0.0;                   // initialization term
  double eps_m = 0.0;                  // kernel-feature term; NaN when m absent
  double rho = 0.0;                    // failure probability
  double norm_bound = 0.0;             // M
  double contrast = 0.0;               // C
  double min_detectable_change = 0.0;  // 2 (eps1 + eps2) / C
};

BoundReport detection_bounds(double big_lambda, double small_lambda, long t,
                             double rho, double norm_bound,
                             std::optional<int> num_features = std::nullopt,
                             std::optional<double> init_gap = std::nullopt);

}  // namespace newma
