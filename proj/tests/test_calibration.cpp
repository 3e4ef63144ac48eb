#include <doctest.h>

#include <cmath>

#include "newma/calibration.hpp"
#include "newma/errors.hpp"

using namespace newma;

namespace {
double branch(double x, int window) { return x * std::pow(1.0 - x, window); }
}  // namespace

TEST_SUITE_BEGIN("calibration");

TEST_CASE("window size ceiling formula") {
  // log 2 / log 1.125 = 5.885 and log 2 / log 1.5 = 1.710
  CHECK(window_size(0.2, 0.1) == 6);
  CHECK(window_size(0.5, 0.25) == 2);
  CHECK_THROWS_AS(window_size(0.2, 0.2), ConfigError);
  CHECK_THROWS_AS(window_size(0.1, 0.2), ConfigError);
  CHECK_THROWS_AS(window_size(1.0, 0.2), ConfigError);
}

TEST_CASE("solve_lambda satisfies the branch equation to 1e-12") {
  for (const auto& [big, window] : std::initializer_list<std::pair<double, int>>{
           {0.2, 6}, {0.5, 3}, {0.9, 10}, {0.05, 50}, {0.2, 250}}) {
    const double small = solve_lambda(big, window);
    CHECK(small > 0.0);
    CHECK(small <= 1.0 / (window + 1.0));
    CHECK(std::abs(branch(small, window) - branch(big, window)) < 1e-12);
    const int roundtrip = window_size(big, small);
    CHECK(roundtrip >= window);
    CHECK(roundtrip <= window + 1);
  }
}

TEST_CASE("solve_lambda rejects the non-distinct case") {
  const int window = 6;
  CHECK_THROWS_AS(solve_lambda(1.0 / (window + 1.0), window), ConfigError);
  CHECK_THROWS_AS(solve_lambda(0.1, window), ConfigError);  // below the peak
}

TEST_CASE("solve_lambda is decreasing in the big factor") {
  const int window = 40;
  double previous = 1.0;
  for (double big = 0.05; big < 0.95; big += 0.05) {
    const double small = solve_lambda(big, window);
    CHECK(small < previous);
    previous = small;
  }
}

TEST_CASE("forgetting factor heuristic returns a certified grid minimum") {
  const int window = 250;
  const auto factors = choose_forgetting_factors(window);
  CHECK(factors.small_lambda < 1.0 / (window + 1.0));
  CHECK(factors.big_lambda > 1.0 / (window + 1.0));

  // neighbor certificate on the search grid
  const double lo = 1.0 / (window + 1.0);
  const double cell = (1.0 - lo) / 1001.0;
  const double at = forgetting_factor_objective(factors.big_lambda, window);
  CHECK(at <= forgetting_factor_objective(factors.big_lambda - cell, window));
  CHECK(at <= forgetting_factor_objective(factors.big_lambda + cell, window));

  const int roundtrip = window_size(factors.big_lambda, factors.small_lambda);
  CHECK(roundtrip >= window);
  CHECK(roundtrip <= window + 1);
}

TEST_CASE("objective is finite across the whole grid") {
  const int window = 25;
  const double lo = 1.0 / (window + 1.0);
  for (int g = 1; g <= 1000; ++g) {
    const double big = lo + (1.0 - lo) * g / 1001.0;
    CHECK(std::isfinite(forgetting_factor_objective(big, window)));
  }
}

TEST_CASE("doubling the grid moves the winner by less than one coarse cell") {
  for (int window : {10, 150}) {
    const auto coarse = choose_forgetting_factors(window, 1000);
    const auto fine = choose_forgetting_factors(window, 2000);
    const double cell = (1.0 - 1.0 / (window + 1.0)) / 1001.0;
    CHECK(std::abs(coarse.big_lambda - fine.big_lambda) < cell);
  }
}

TEST_CASE("feature count rule") {
  CHECK(choose_num_features(0.2, 0.1) == 3);       // ceil(0.25 / 0.09)
  CHECK(choose_num_features(0.02, 0.01) == 278);   // ceil(0.25 / 0.0009)
  CHECK(choose_num_features(0.06, 0.04, 1.0) == 100);
}

TEST_CASE("window decomposition weights are normalized and positive") {
  const double big = 0.2, small = 0.1;
  for (long t : {7L, 12L, 40L}) {
    const auto decomp = window_decomposition(big, small, t);
    CHECK(decomp.window == 6);
    CHECK(decomp.contrast ==
          doctest::Approx(std::pow(0.9, 6) - std::pow(0.8, 6)).epsilon(1e-14));
    CHECK(decomp.contrast > 0.0);
    CHECK(decomp.contrast < 1.0);
    CHECK(decomp.recent_weights.size() == 6);
    CHECK(decomp.old_weights.size() == t - 6 + 1);
    CHECK(std::abs(decomp.recent_weights.sum() - 1.0) < 1e-12);
    CHECK(std::abs(decomp.old_weights.sum() - 1.0) < 1e-12);
    CHECK((decomp.recent_weights.array() >= 0.0).all());
    CHECK((decomp.old_weights.array() >= 0.0).all());
  }
  CHECK_THROWS_AS(window_decomposition(0.2, 0.1, 6), ConfigError);
}

TEST_CASE("detection bounds evaluate the printed formulas") {
  const auto report = detection_bounds(0.2, 0.1, 20, 0.05, 1.0, 64);
  const double expected_eps1 =
      4.0 * std::sqrt(2.0) * std::sqrt(0.3 * std::log(20.0));
  CHECK(report.eps1 == doctest::Approx(expected_eps1).epsilon(1e-12));
  CHECK(report.eps1 == doctest::Approx(5.3626).epsilon(1e-3));
  const double expected_eps2 =
      (std::pow(0.9, 20) - std::pow(0.8, 20)) * 2.0;
  CHECK(report.eps2 == doctest::Approx(expected_eps2).epsilon(1e-12));
  const double expected_epsm =
      2.0 * std::sqrt(2.0) * std::sqrt(std::log(20.0) / 64.0);
  CHECK(report.eps_m == doctest::Approx(expected_epsm).epsilon(1e-12));
  CHECK(report.min_detectable_change ==
        doctest::Approx(2.0 * (report.eps1 + report.eps2) / report.contrast));

  // rho -> 1 kills the concentration term; t -> infinity kills the
  // initialization term.
  CHECK(detection_bounds(0.2, 0.1, 20, 1.0 - 1e-12, 1.0).eps1 ==
        doctest::Approx(0.0).epsilon(1e-5));
  CHECK(detection_bounds(0.2, 0.1, 100000, 0.05, 1.0).eps2 ==
        doctest::Approx(0.0));

  // explicit initialization gap replaces the 2M default
  const auto with_gap = detection_bounds(0.2, 0.1, 20, 0.05, 1.0, std::nullopt, 0.5);
  CHECK(with_gap.eps2 == doctest::Approx(expected_eps2 * 0.25).epsilon(1e-12));

  CHECK_THROWS_AS(detection_bounds(0.2, 0.1, 20, 1.5, 1.0), ConfigError);
  CHECK_THROWS_AS(detection_bounds(0.2, 0.1, 3, 0.05, 1.0), ConfigError);
}

TEST_SUITE_END();
