#include "newma/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <memory>

#include "newma/calibration.hpp"
#include "newma/datagen.hpp"
#include "newma/errors.hpp"
#include "newma/rng.hpp"

namespace newma {

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["n_changes"] = num_changes;
  j["false_alarms"] = false_alarms;
  j["fa_per_change"] = fa_per_change();
  j["missed"] = missed;
  j["missed_rate"] = missed_rate();
  j["detected"] = detected();
  j["ignored_detections"] = ignored_detections;
  j["out_of_window_alarms"] = out_of_window_alarms;
  if (edd)
    j["edd"] = *edd;
  else
    j["edd"] = nullptr;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : per_change) {
    nlohmann::json rec;
    rec["change"] = c.change_point;
    rec["detected"] = c.detected;
    rec["delay"] = c.detected ? nlohmann::json(c.delay) : nlohmann::json(nullptr);
    rec["pre_window_false_alarms"] = c.pre_window_false_alarms;
    arr.push_back(rec);
  }
  j["per_change"] = arr;
  return j;
}

EvalReport score(const std::vector<long>& flag_steps,
                 const std::vector<long>& change_points, long segment_length) {
  if (segment_length < 2) throw ConfigError("score: segment length must be >= 2");
  if (!std::is_sorted(flag_steps.begin(), flag_steps.end()))
    throw InputError("score: flags must be sorted");
  for (std::size_t i = 1; i < change_points.size(); ++i) {
    if (change_points[i] <= change_points[i - 1])
      throw ConfigError("score: change points must be strictly increasing");
    if (change_points[i] - change_points[i - 1] < segment_length / 2)
      throw ConfigError("score: evaluation windows overlap (half-segment exceeds gap)");
  }
  const long half = segment_length / 2;

  EvalReport report;
  report.num_changes = static_cast<int>(change_points.size());
  report.per_change.reserve(change_points.size());
  for (long c : change_points) {
    ChangeOutcome outcome;
    outcome.change_point = c;
    report.per_change.push_back(outcome);
  }

  double delay_sum = 0.0;
  int delay_count = 0;
  std::size_t next_change = 0;
  for (long f : flag_steps) {
    while (next_change < change_points.size() &&
           f > change_points[next_change] + half)
      ++next_change;
    // At most one window can own the flag now: the post-window (c, c+half]
    // takes priority over the pre-window (c-half, c] when they abut.
    bool classified = false;
    if (next_change < change_points.size()) {
      const long c = change_points[next_change];
      auto& outcome = report.per_change[next_change];
      if (f > c) {
        if (!outcome.detected) {
          outcome.detected = true;
          outcome.delay = f - c;
          delay_sum += static_cast<double>(outcome.delay);
          ++delay_count;
        } else {
          ++report.ignored_detections;
        }
        classified = true;
      } else if (f > c - half) {
        ++report.false_alarms;
        ++outcome.pre_window_false_alarms;
        classified = true;
      }
    }
    if (!classified) ++report.out_of_window_alarms;
  }

  for (const auto& outcome : report.per_change)
    if (!outcome.detected) ++report.missed;
  if (delay_count > 0) report.edd = delay_sum / delay_count;
  return report;
}

std::vector<long> flags_at_threshold(const std::vector<StepResult>& trace, double tau,
                                     long warmup) {
  std::vector<long> flags;
  for (const auto& r : trace)
    if (r.valid && r.t > warmup && r.statistic >= tau) flags.push_back(r.t);
  return flags;
}

std::vector<SweepPoint> sweep_thresholds(const std::vector<StepResult>& trace,
                                         const std::vector<long>& change_points,
                                         long segment_length,
                                         const std::vector<double>& tau_grid,
                                         long warmup) {
  std::vector<SweepPoint> points;
  points.reserve(tau_grid.size());
  for (double tau : tau_grid) {
    SweepPoint p;
    p.tau = tau;
    p.report = score(flags_at_threshold(trace, tau, warmup), change_points, segment_length);
    points.push_back(std::move(p));
  }
  return points;
}

std::unique_ptr<Detector> make_benchmark_detector(const BenchmarkCellSpec& cell,
                                                  const BenchmarkOptions& options) {
  const double sigma =
      options.bandwidth > 0.0 ? options.bandwidth : std::sqrt(2.0 * cell.dim);
  const auto threshold = ThresholdSpec::fixed(std::numeric_limits<double>::infinity());
  const auto map_seed = derive_seed(options.seed, "bench-map");
  if (cell.algo == "scanb")
    return std::make_unique<ScanBDetector>(cell.window, options.scanb_blocks, sigma,
                                           cell.dim, threshold);
  if (cell.algo == "sw") {
    auto map = std::make_shared<const FeatureMap>(
        FeatureMapSpec::rff(cell.dim, options.num_features, sigma, map_seed));
    return std::make_unique<SwDetector>(cell.window, std::move(map), threshold);
  }
  const bool fastfood = cell.algo == "newma-ff";
  if (cell.algo == "newma" || fastfood || cell.algo == "ewma") {
    const auto spec =
        fastfood ? FeatureMapSpec::fastfood(cell.dim, options.num_features, sigma, map_seed)
                 : FeatureMapSpec::rff(cell.dim, options.num_features, sigma, map_seed);
    auto map = std::make_shared<const FeatureMap>(spec);
    if (cell.algo == "ewma")
      return std::make_unique<EwmaDetector>(
          2.0 / (cell.window + 1.0), Eigen::VectorXd::Zero(map->output_dim()),
          std::move(map), threshold, 2L * cell.window);
    const auto factors = choose_forgetting_factors(cell.window);
    NewmaConfig config;
    config.big_lambda = factors.big_lambda;
    config.small_lambda = factors.small_lambda;
    config.feature_map = spec;
    config.threshold = threshold;
    return std::make_unique<NewmaDetector>(config, std::move(map));
  }
  throw ConfigError("benchmark: unknown algorithm '" + cell.algo + "'");
}

namespace {

BenchmarkRow benchmark_cell(const BenchmarkCellSpec& cell, const BenchmarkOptions& options) {
  // One shared sample block per cell, generated outside the clock.
  Eigen::MatrixXd samples(cell.dim, options.steps);
  Rng rng(derive_seed(options.seed, "bench-stream"));
  for (long i = 0; i < samples.size(); ++i) samples.data()[i] = rng.normal();

  std::vector<double> per_step;
  per_step.reserve(static_cast<std::size_t>(options.repetitions));
  std::size_t state_bytes = 0;
  for (int rep = 0; rep < options.repetitions; ++rep) {
    auto detector = make_benchmark_detector(cell, options);
    const auto start = std::chrono::steady_clock::now();
    for (long i = 0; i < options.steps; ++i) detector->step(samples.col(i));
    const auto stop = std::chrono::steady_clock::now();
    const double seconds = std::chrono::duration<double>(stop - start).count();
    per_step.push_back(seconds / static_cast<double>(options.steps));
    state_bytes = detector->state_bytes();
  }
  std::sort(per_step.begin(), per_step.end());
  BenchmarkRow row;
  row.algo = cell.algo;
  row.dim = cell.dim;
  row.window = cell.window;
  row.steps = options.steps;
  row.seconds_per_step = per_step[per_step.size() / 2];
  row.state_bytes = state_bytes;
  return row;
}

}  // namespace

std::vector<BenchmarkRow> benchmark_runtime(const std::vector<BenchmarkCellSpec>& cells,
                                            const BenchmarkOptions& options) {
  if (options.repetitions < 1) throw ConfigError("benchmark: needs at least one repetition");
  if (options.steps < 1) throw ConfigError("benchmark: needs at least one step");
  std::vector<BenchmarkRow> rows(cells.size());
  const int threads = std::max(1, options.threads);
  if (threads == 1) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      rows[i] = benchmark_cell(cells[i], options);
    return rows;
  }
  std::vector<std::future<void>> pending;
  std::size_t next = 0;
  while (next < cells.size()) {
    pending.clear();
    const std::size_t batch = std::min<std::size_t>(threads, cells.size() - next);
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t idx = next + b;
      pending.push_back(std::async(std::launch::async, [&rows, &cells, &options, idx] {
        rows[idx] = benchmark_cell(cells[idx], options);
      }));
    }
    for (auto& f : pending) f.get();
    next += batch;
  }
  return rows;
}

}  // namespace newma
