#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <vector>

#include "helpers.hpp"
#include "newma/calibration.hpp"
#include "newma/datagen.hpp"
#include "newma/detectors.hpp"
#include "newma/errors.hpp"
#include "newma/rng.hpp"

using namespace newma;
using namespace newma::testing;

namespace {

std::shared_ptr<const FeatureMap> identity_map(int d) {
  return std::make_shared<const FeatureMap>(FeatureMapSpec::identity(d));
}

NewmaConfig newma_config(double big, double small, const FeatureMapSpec& map_spec,
                         ThresholdSpec threshold = ThresholdSpec::fixed(
                             std::numeric_limits<double>::infinity())) {
  NewmaConfig config;
  config.big_lambda = big;
  config.small_lambda = small;
  config.feature_map = map_spec;
  config.threshold = threshold;
  return config;
}

// Brute-force check of the implicit two-window form: replays the stored
// history through the decomposition weights.
double decomposition_gap(const NewmaDetector& detector,
                         const std::vector<Eigen::VectorXd>& embedded_history,
                         const Eigen::VectorXd& initial, long t) {
  const auto& config = detector.config();
  const auto decomp = window_decomposition(config.big_lambda, config.small_lambda, t);
  const long window = decomp.window;
  Eigen::VectorXd recent = Eigen::VectorXd::Zero(initial.size());
  for (long i = t - window + 1; i <= t; ++i)
    recent += decomp.recent_weights[i - (t - window + 1)] *
              embedded_history[static_cast<std::size_t>(i - 1)];
  Eigen::VectorXd old = decomp.old_weights[0] * initial;
  for (long i = 1; i <= t - window; ++i)
    old += decomp.old_weights[i] * embedded_history[static_cast<std::size_t>(i - 1)];
  const Eigen::VectorXd direct =
      detector.fast_average() - detector.slow_average();
  return (direct - decomp.contrast * (recent - old)).norm();
}

}  // namespace

TEST_SUITE_BEGIN("detectors");

TEST_CASE("one-step hand computation") {
  auto detector = NewmaDetector(newma_config(0.2, 0.1, FeatureMapSpec::identity(1)),
                                identity_map(1));
  Eigen::VectorXd x(1);
  x[0] = 1.0;
  const auto r = detector.step(x);
  CHECK(r.t == 1);
  CHECK(detector.fast_average()[0] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(detector.slow_average()[0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(r.statistic == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(r.valid);
}

TEST_CASE("a constant stream started at its own embedding is a fixed point") {
  Eigen::VectorXd c(2);
  c << 3.0, -1.0;
  auto detector = NewmaDetector(newma_config(0.3, 0.05, FeatureMapSpec::identity(2)),
                                identity_map(2), c);
  for (int i = 0; i < 50; ++i) {
    const auto r = detector.step(c);
    CHECK(r.statistic == 0.0);
  }
}

TEST_CASE("recursive difference equals the brute-force two-window form") {
  Rng stream_rng(404);
  for (int trial = 0; trial < 12; ++trial) {
    const double big = 0.15 + 0.5 * stream_rng.uniform();
    const double small = big * (0.2 + 0.5 * stream_rng.uniform());
    const int d = trial % 2 == 0 ? 1 : 5;
    std::shared_ptr<const FeatureMap> map;
    FeatureMapSpec spec;
    if (trial % 3 == 2) {
      spec = FeatureMapSpec::rff(d, 8, 1.5, 7000 + static_cast<unsigned>(trial));
      map = std::make_shared<const FeatureMap>(spec);
    } else {
      spec = FeatureMapSpec::identity(d);
      map = identity_map(d);
    }
    auto detector = NewmaDetector(newma_config(big, small, spec), map);
    const long window = detector.config().window();
    const Eigen::VectorXd initial = Eigen::VectorXd::Zero(map->output_dim());
    std::vector<Eigen::VectorXd> embedded;
    Eigen::VectorXd x(d);
    for (long t = 1; t <= 3 * window; ++t) {
      for (int cidx = 0; cidx < d; ++cidx) x[cidx] = stream_rng.normal();
      detector.step(x);
      embedded.push_back(map->embed(x));
      if (t > window)
        CHECK(decomposition_gap(detector, embedded, initial, t) < 1e-10);
    }
  }
}

TEST_CASE("newma state size does not depend on the window") {
  const auto small_window = NewmaDetector(
      newma_config(0.2, 0.19, FeatureMapSpec::identity(4)), identity_map(4));
  const auto large_window = NewmaDetector(
      newma_config(0.01, 0.001, FeatureMapSpec::identity(4)), identity_map(4));
  CHECK(small_window.config().window() != large_window.config().window());
  CHECK(small_window.state_bytes() == large_window.state_bytes());
}

TEST_CASE("newma config validation") {
  CHECK_THROWS_AS(NewmaDetector(newma_config(0.1, 0.2, FeatureMapSpec::identity(1)),
                                identity_map(1)),
                  ConfigError);
  CHECK_THROWS_AS(NewmaDetector(newma_config(0.2, 0.2, FeatureMapSpec::identity(1)),
                                identity_map(1)),
                  ConfigError);
  auto detector = NewmaDetector(newma_config(0.2, 0.1, FeatureMapSpec::identity(2)),
                                identity_map(2));
  Eigen::VectorXd bad(3);
  bad.setZero();
  CHECK_THROWS_AS(detector.step(bad), InputError);
}

TEST_CASE("ewma long-run mean matches the stationary folded-normal value") {
  const double big = 0.2;
  Eigen::VectorXd target(1);
  target.setZero();
  auto detector = EwmaDetector(big, target, identity_map(1),
                               ThresholdSpec::fixed(1e9), 0);
  Rng rng(2718);
  Eigen::VectorXd x(1);
  std::vector<double> stats;
  for (int t = 0; t < 200000; ++t) {
    x[0] = rng.normal();
    const auto r = detector.step(x);
    if (t >= 100) stats.push_back(r.statistic);
  }
  // stationary average is Gaussian with variance L/(2-L); the mean absolute
  // value carries the folded-normal factor sqrt(2/pi)
  const double expected = std::sqrt(2.0 / M_PI) * std::sqrt(big / (2.0 - big));
  CHECK(std::abs(mean(stats) - expected) < 0.10 * expected);
}

TEST_CASE("ewma degenerate cases") {
  Eigen::VectorXd target(1);
  target[0] = 5.0;
  // started at the target with a constant on-target stream: zero forever
  {
    auto detector = EwmaDetector(1.0, target, identity_map(1),
                                 ThresholdSpec::fixed(1.0), 0);
    Eigen::VectorXd x(1);
    x[0] = 5.0;
    for (int i = 0; i < 20; ++i) CHECK(detector.step(x).statistic == 0.0);
  }
  // forgetting factor one keeps no memory
  {
    auto detector = EwmaDetector(1.0, target, identity_map(1),
                                 ThresholdSpec::fixed(1e9), 0);
    Eigen::VectorXd x(1);
    x[0] = 7.5;
    CHECK(detector.step(x).statistic == doctest::Approx(2.5));
    x[0] = 4.0;
    CHECK(detector.step(x).statistic == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(EwmaDetector(0.2, Eigen::VectorXd(), identity_map(1),
                               ThresholdSpec::fixed(1.0), 0),
                  ConfigError);
}

TEST_CASE("sliding window hand example") {
  auto detector = SwDetector(2, identity_map(1), ThresholdSpec::fixed(1e9));
  Eigen::VectorXd x(1);
  const double stream[] = {0.0, 0.0, 1.0, 1.0};
  StepResult last;
  for (double v : stream) {
    x[0] = v;
    last = detector.step(x);
  }
  CHECK(last.t == 4);
  CHECK(last.valid);
  CHECK(last.statistic == doctest::Approx(1.0));
}

TEST_CASE("sliding window of identical samples reports zero at fill time") {
  auto detector = SwDetector(3, identity_map(2), ThresholdSpec::fixed(1e9));
  Eigen::VectorXd x(2);
  x << 2.0, -1.0;
  StepResult r;
  for (int t = 1; t <= 6; ++t) {
    r = detector.step(x);
    if (t < 6) {
      CHECK_FALSE(r.valid);
      CHECK_FALSE(r.flagged);
    }
  }
  CHECK(r.valid);
  CHECK(r.statistic == doctest::Approx(0.0));
}

TEST_CASE("sliding window recursion equals batch window means") {
  const int window = 4;
  const int d = 3;
  const auto spec = FeatureMapSpec::rff(d, 8, 2.0, 99);
  auto map = std::make_shared<const FeatureMap>(spec);
  auto detector = SwDetector(window, map, ThresholdSpec::fixed(1e9));
  Rng rng(1234);
  Eigen::VectorXd x(d);
  std::vector<Eigen::VectorXd> embedded;
  for (long t = 1; t <= 12L * window; ++t) {
    for (int c = 0; c < d; ++c) x[c] = rng.normal();
    const auto r = detector.step(x);
    embedded.push_back(map->embed(x));
    if (t < 2L * window) {
      CHECK_FALSE(r.valid);
      continue;
    }
    Eigen::VectorXd old_mean = Eigen::VectorXd::Zero(map->output_dim());
    Eigen::VectorXd recent_mean = Eigen::VectorXd::Zero(map->output_dim());
    for (long i = t - 2L * window + 1; i <= t - window; ++i)
      old_mean += embedded[static_cast<std::size_t>(i - 1)];
    for (long i = t - window + 1; i <= t; ++i)
      recent_mean += embedded[static_cast<std::size_t>(i - 1)];
    old_mean /= window;
    recent_mean /= window;
    CHECK(std::abs(r.statistic - (old_mean - recent_mean).norm()) < 1e-12);
  }
}

TEST_CASE("scanb of identical samples reports zero") {
  auto detector = ScanBDetector(3, 2, 1.0, 2, ThresholdSpec::fixed(1e9));
  Eigen::VectorXd x(2);
  x << 0.5, 0.5;
  StepResult r;
  for (int t = 1; t <= 9; ++t) r = detector.step(x);
  CHECK(r.valid);
  CHECK(r.statistic == doctest::Approx(0.0));
}

TEST_CASE("scanb incremental sums equal full recomputation") {
  const int window = 5;
  const int blocks = 3;
  const int d = 2;
  const double sigma = 1.3;
  auto detector = ScanBDetector(window, blocks, sigma, d, ThresholdSpec::fixed(1e9));
  Rng rng(777);
  Eigen::VectorXd x(d);
  std::vector<Eigen::VectorXd> history;
  for (long t = 1; t <= 100; ++t) {
    for (int c = 0; c < d; ++c) x[c] = rng.normal() + (t > 60 ? 1.5 : 0.0);
    const auto r = detector.step(x);
    history.push_back(x);
    if (!r.valid) continue;

    // independent oracle from the raw history
    const double gamma = 1.0 / (2.0 * sigma * sigma);
    const auto kern = [&](long i, long j) {
      return std::exp(-gamma * (history[static_cast<std::size_t>(i - 1)] -
                                history[static_cast<std::size_t>(j - 1)])
                                   .squaredNorm());
    };
    double total = 0.0;
    for (int n = 1; n <= blocks; ++n) {
      const long ref_start = t - static_cast<long>(n + 1) * window;
      const long recent_start = t - window;
      double acc = 0.0;
      for (long i = 1; i <= window; ++i)
        for (long j = 1; j <= window; ++j) {
          if (i == j) continue;
          acc += kern(ref_start + i, ref_start + j) +
                 kern(recent_start + i, recent_start + j) -
                 kern(ref_start + i, recent_start + j) -
                 kern(ref_start + j, recent_start + i);
        }
      total += acc / (static_cast<double>(window) * (window - 1));
    }
    total /= blocks;
    CHECK(std::abs(r.statistic - total) < 1e-10);
    CHECK(std::abs(detector.recompute_statistic() - total) < 1e-10);
  }
}

TEST_CASE("scanb with one block orders a mean shift like the sliding window") {
  const int d = 4;
  const int window = 20;
  Eigen::VectorXd delta = Eigen::VectorXd::Constant(d, 1.5);
  const auto stream = generate_shift_stream(d, 300, delta, 11);
  const double sigma = median_trick_bandwidth(stream.samples.leftCols(100), 1);

  auto scanb = ScanBDetector(window, 1, sigma, d, ThresholdSpec::fixed(1e9));
  const auto spec = FeatureMapSpec::rff(d, 128, sigma, 5);
  auto sw = SwDetector(window, std::make_shared<const FeatureMap>(spec),
                       ThresholdSpec::fixed(1e9));

  const auto scanb_trace = run_stream(scanb, stream.samples);
  const auto sw_trace = run_stream(sw, stream.samples);
  const auto mean_stat = [&](const std::vector<StepResult>& trace, long lo, long hi) {
    double s = 0.0;
    long n = 0;
    for (const auto& r : trace)
      if (r.valid && r.t > lo && r.t <= hi) {
        s += r.statistic;
        ++n;
      }
    return s / static_cast<double>(n);
  };
  // post-change window versus settled pre-change window, same ordering for both
  const double scanb_pre = mean_stat(scanb_trace, 200, 300);
  const double scanb_post = mean_stat(scanb_trace, 300 + window, 360);
  const double sw_pre = mean_stat(sw_trace, 200, 300);
  const double sw_post = mean_stat(sw_trace, 300 + window, 360);
  CHECK(scanb_post > scanb_pre);
  CHECK(sw_post > sw_pre);
}

TEST_CASE("no detector flags during the warm-up period") {
  const int d = 2;
  const auto spec = FeatureMapSpec::rff(d, 8, 1.0, 3);
  auto map = std::make_shared<const FeatureMap>(spec);
  const auto zero_threshold = ThresholdSpec::fixed(0.0);

  std::vector<std::unique_ptr<Detector>> detectors;
  detectors.push_back(std::make_unique<NewmaDetector>(
      newma_config(0.3, 0.1, spec, zero_threshold), map));
  detectors.push_back(std::make_unique<SwDetector>(5, map, zero_threshold));
  detectors.push_back(std::make_unique<ScanBDetector>(5, 2, 1.0, d, zero_threshold));
  detectors.push_back(std::make_unique<EwmaDetector>(
      0.3, Eigen::VectorXd::Zero(map->output_dim()), map, zero_threshold, 10));

  Rng rng(17);
  Eigen::VectorXd x(d);
  for (auto& detector : detectors) {
    for (long t = 1; t <= 40; ++t) {
      for (int c = 0; c < d; ++c) x[c] = rng.normal();
      const auto r = detector->step(x);
      if (t < detector->warmup_steps())
        CHECK_FALSE(r.flagged);
      else if (r.valid)
        CHECK(r.flagged);  // zero threshold flags every valid post-warm-up step
    }
  }
}

TEST_CASE("run_stream basics") {
  const auto spec = FeatureMapSpec::identity(2);
  auto map = identity_map(2);

  // empty stream
  auto d1 = NewmaDetector(newma_config(0.2, 0.1, spec), map);
  const auto empty = run_stream(d1, Eigen::MatrixXd(2, 0));
  CHECK(empty.empty());

  // ten samples, strictly increasing step indices
  const Eigen::MatrixXd samples = random_gaussian_matrix(2, 10, 5);
  auto d2 = NewmaDetector(newma_config(0.2, 0.1, spec), map);
  const auto trace = run_stream(d2, samples);
  CHECK(trace.size() == 10);
  for (std::size_t i = 0; i < trace.size(); ++i)
    CHECK(trace[i].t == static_cast<long>(i + 1));

  // bitwise determinism across identical runs
  auto d3 = NewmaDetector(newma_config(0.2, 0.1, spec), map);
  const auto replay = run_stream(d3, samples);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    CHECK(trace[i].statistic == replay[i].statistic);
    CHECK(trace[i].threshold == replay[i].threshold);
    CHECK(trace[i].flagged == replay[i].flagged);
  }

  // per-step errors carry the step index
  auto d4 = NewmaDetector(newma_config(0.2, 0.1, spec), map);
  long emitted = 0;
  const SampleSource bad_source = [&emitted](Eigen::VectorXd& out) {
    ++emitted;
    out = emitted < 3 ? Eigen::VectorXd::Zero(2) : Eigen::VectorXd::Zero(3);
    return emitted <= 3;
  };
  CHECK_THROWS_WITH_AS(run_stream(d4, bad_source, [](const StepResult&) {}),
                       doctest::Contains("step 3"), InputError);
}

TEST_CASE("null statistic stays below the concentration envelope") {
  // bounded kernel features, stationary regime: the 95 percent quantile of
  // the statistic must sit under eps1 + eps2
  const double big = 0.2;
  const double small = 0.1;
  const int d = 3;
  const auto spec = FeatureMapSpec::rff(d, 16, 2.0, 77);
  auto map = std::make_shared<const FeatureMap>(spec);
  const long horizon = 2L * window_size(big, small);
  std::vector<double> stats;
  Rng rng(31337);
  Eigen::VectorXd x(d);
  for (int trial = 0; trial < 200; ++trial) {
    auto detector = NewmaDetector(newma_config(big, small, spec), map);
    StepResult r;
    for (long t = 0; t < horizon; ++t) {
      for (int c = 0; c < d; ++c) x[c] = rng.normal();
      r = detector.step(x);
    }
    stats.push_back(r.statistic);
  }
  std::sort(stats.begin(), stats.end());
  const double quantile = stats[static_cast<std::size_t>(0.95 * stats.size())];
  const auto bounds = detection_bounds(big, small, horizon, 0.05, 1.0);
  CHECK(quantile <= bounds.eps1 + bounds.eps2);
}

TEST_SUITE_END();
