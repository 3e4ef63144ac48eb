#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "newma/detectors.hpp"

namespace newma {

struct ChangeOutcome {
  long change_point = 0;
  bool detected = false;
  long delay = -1;                  // first flag minus change point, when detected
  int pre_window_false_alarms = 0;  // flags in (c - n/2, c]
};

// Scoring protocol: around every true change at c, flags in the half-segment
// before it count as false alarms and the first flag in the half-segment
// after it gives the detection delay; no flag there is a missed detection.
// Later flags in a post-window are ignored, and flags outside every window
// are tallied separately without entering the headline false-alarm rate.
struct EvalReport {
  int num_changes = 0;
  int false_alarms = 0;
  int missed = 0;
  int ignored_detections = 0;
  int out_of_window_alarms = 0;
  std::optional<double> edd;  // mean delay over detected changes
  std::vector<ChangeOutcome> per_change;

  int detected() const { return num_changes - missed; }
  double fa_per_change() const {
    return num_changes > 0 ? static_cast<double>(false_alarms) / num_changes : 0.0;
  }
  double missed_rate() const {
    return num_changes > 0 ? static_cast<double>(missed) / num_changes : 0.0;
  }
  nlohmann::json to_json() const;
};

EvalReport score(const std::vector<long>& flag_steps,
                 const std::vector<long>& change_points, long segment_length);

// Re-scores a stored statistic trace under a grid of fixed thresholds; a step
// flags when its statistic is valid, at least tau, and past the warm-up.
struct SweepPoint {
  double tau = 0.0;
  EvalReport report;
};

std::vector<long> flags_at_threshold(const std::vector<StepResult>& trace, double tau,
                                     long warmup);
std::vector<SweepPoint> sweep_thresholds(const std::vector<StepResult>& trace,
                                         const std::vector<long>& change_points,
                                         long segment_length,
                                         const std::vector<double>& tau_grid,
                                         long warmup);

// Wall-clock cost of the step function alone, medians over repetitions on a
// standard-normal stream. Stream generation and I/O stay outside the clock.
struct BenchmarkCellSpec {
  std::string algo;  // newma | newma-ff | sw | scanb | ewma
  int dim = 0;
  int window = 0;
};

struct BenchmarkOptions {
  long steps = 12000;
  int repetitions = 3;
  int num_features = 1000;   // kernel detectors
  double bandwidth = 0.0;    // <= 0: sqrt(2 * dim)
  int scanb_blocks = 3;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct BenchmarkRow {
  std::string algo;
  int dim = 0;
  int window = 0;
  long steps = 0;
  double seconds_per_step = 0.0;  // median over repetitions
  std::size_t state_bytes = 0;
};

std::vector<BenchmarkRow> benchmark_runtime(const std::vector<BenchmarkCellSpec>& cells,
                                            const BenchmarkOptions& options);

// Builds the detector a benchmark cell describes; shared with the CLI.
std::unique_ptr<Detector> make_benchmark_detector(const BenchmarkCellSpec& cell,
                                                  const BenchmarkOptions& options);

}  // namespace newma
