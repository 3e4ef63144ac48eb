#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "helpers.hpp"
#include "newma/errors.hpp"
#include "newma/rng.hpp"
#include "newma/thresholding.hpp"

using namespace newma;
using namespace newma::testing;

TEST_SUITE_BEGIN("thresholding");

TEST_CASE("fixed threshold flags at and above tau after warm-up") {
  auto state = ThresholdState::fixed(0.5, 2);
  CHECK_FALSE(state.update(1.0).flagged);  // warm-up
  CHECK_FALSE(state.update(1.0).flagged);  // warm-up
  CHECK(state.update(0.5).flagged);        // boundary is inclusive
  CHECK_FALSE(state.update(0.49).flagged);
}

TEST_CASE("fixed threshold limits") {
  auto zero = ThresholdState::fixed(0.0, 0);
  for (int i = 0; i < 10; ++i) CHECK(zero.update(0.3).flagged);

  auto infinite =
      ThresholdState::fixed(std::numeric_limits<double>::infinity(), 0);
  for (int i = 0; i < 10; ++i) CHECK_FALSE(infinite.update(1e12).flagged);

  CHECK_THROWS_AS(ThresholdState::fixed(-1.0, 0), ConfigError);
  CHECK_THROWS_AS(ThresholdState::adaptive({0.0, 1.64}, 0), ConfigError);
}

TEST_CASE("a constant statistic never flags") {
  auto state = ThresholdState::adaptive({0.01, 1.64}, 10);
  const double s = 2.0;
  for (int i = 0; i < 300000; ++i) {
    CHECK_FALSE(state.update(s).flagged);
  }
  // estimates converge onto the constant
  CHECK(state.mean_sq() == doctest::Approx(s * s));
  CHECK(state.sigma() == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("single spike far above the running level flags") {
  auto state = ThresholdState::adaptive({0.01, 1.64}, 5);
  Rng rng(21);
  for (int i = 0; i < 2000; ++i) state.update(std::sqrt(10.0 + rng.normal()));
  const double spike_sq = state.mean_sq() + 10.0 * state.sigma();
  CHECK(state.update(std::sqrt(spike_sq)).flagged);
}

TEST_CASE("quantile coefficient 1.64 yields roughly a five percent flag rate") {
  // squared statistic approximately Gaussian: S^2 ~ N(10, 1)
  auto state = ThresholdState::adaptive({0.01, 1.64}, 1000);
  Rng rng(9);
  long flags = 0;
  long counted = 0;
  for (int i = 0; i < 100000; ++i) {
    const double s_sq = 10.0 + rng.normal();
    const auto decision = state.update(std::sqrt(std::max(s_sq, 0.0)));
    if (i >= 1000) {
      ++counted;
      if (decision.flagged) ++flags;
    }
  }
  const double rate = static_cast<double>(flags) / static_cast<double>(counted);
  CHECK(rate > 0.03);
  CHECK(rate < 0.07);
}

TEST_CASE("flag condition is exactly the running level comparison") {
  auto state = ThresholdState::adaptive({0.05, 1.64}, 0);
  double mu = 0.0, mu2 = 0.0;
  Rng rng(31);
  for (int i = 0; i < 500; ++i) {
    const double s = std::abs(rng.normal()) + 0.1;
    const auto decision = state.update(s);
    const double s2 = s * s;
    mu = 0.95 * mu + 0.05 * s2;
    mu2 = 0.95 * mu2 + 0.05 * s2 * s2;
    const double sigma = std::sqrt(std::max(mu2 - mu * mu, 0.0));
    const double level = std::max(mu + 1.64 * sigma, 0.0) * (1.0 + 1e-9);
    CHECK(decision.flagged == (s2 >= level));
    CHECK(decision.threshold == doctest::Approx(std::sqrt(level)).epsilon(1e-12));
    CHECK(mu2 - mu * mu >= -1e-12);
  }
}

TEST_CASE("threshold sequence is deterministic in the statistic sequence") {
  std::vector<double> stats;
  Rng rng(55);
  for (int i = 0; i < 200; ++i) stats.push_back(std::abs(rng.normal()));
  auto a = ThresholdState::adaptive({0.02, 1.64}, 3);
  auto b = ThresholdState::adaptive({0.02, 1.64}, 3);
  for (double s : stats) {
    const auto da = a.update(s);
    const auto db = b.update(s);
    CHECK(da.threshold == db.threshold);
    CHECK(da.flagged == db.flagged);
  }
}

TEST_SUITE_END();
