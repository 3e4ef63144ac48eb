#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "newma/feature_map.hpp"
#include "newma/thresholding.hpp"

namespace newma {

// Per-step detector output. statistic and threshold are NaN while the
// detector has not yet seen enough samples to form its statistic (valid is
// false there). After warm-up, flagged is equivalent to statistic >= threshold.
struct StepResult {
  long t = 0;
  double statistic = 0.0;
  double threshold = 0.0;
  bool flagged = false;
  bool valid = true;
};

// Threshold mode carried by detector configs; "fixed:<tau>" or
// "adaptive:<alpha>,<a>" on the command line.
struct ThresholdSpec {
  enum class Mode { kFixed, kAdaptive };
  Mode mode = Mode::kAdaptive;
  double tau = 0.0;
  AdaptiveThresholdConfig adaptive_config;

  static ThresholdSpec fixed(double tau);
  static ThresholdSpec adaptive(double learning_rate = 0.01,
                                double quantile_coeff = 1.64);
  static ThresholdSpec parse(const std::string& text);
  std::string to_text() const;
  nlohmann::json to_json() const;

  ThresholdState make_state(long warmup_steps) const;
};

struct NewmaConfig {
  double big_lambda = 0.0;   // fast forgetting factor
  double small_lambda = 0.0; // slow forgetting factor
  FeatureMapSpec feature_map;
  ThresholdSpec threshold;

  void validate() const;
  int window() const;  // implied B
};

// Streaming interface shared by the four detectors: feed one sample, get a
// statistic and a flag. Instances are single-owner; distinct instances may
// run on distinct threads sharing one immutable FeatureMap.
class Detector {
 public:
  virtual ~Detector() = default;

  virtual StepResult step(const Eigen::Ref<const Eigen::VectorXd>& x) = 0;

  virtual std::string name() const = 0;
  // First stream step at which a flag is possible; never earlier than twice
  // the comparison window.
  virtual long warmup_steps() const = 0;
  // Size of the evolving state, raw-sample and embedded buffers included.
  virtual std::size_t state_bytes() const = 0;

  long t() const { return t_; }

 protected:
  long t_ = 0;
};

// Two exponentially weighted averages of the same embedded stream with
// distinct forgetting factors; the statistic is the norm of their difference.
// Memory is two output_dim vectors regardless of the implied window.
class NewmaDetector : public Detector {
 public:
  // Both averages start at initial_value (zero vector when empty).
  NewmaDetector(const NewmaConfig& config, std::shared_ptr<const FeatureMap> map,
                Eigen::VectorXd initial_value = Eigen::VectorXd());

  StepResult step(const Eigen::Ref<const Eigen::VectorXd>& x) override;
  std::string name() const override { return "newma"; }
  long warmup_steps() const override { return warmup_; }
  std::size_t state_bytes() const override;

  const Eigen::VectorXd& fast_average() const { return fast_; }
  const Eigen::VectorXd& slow_average() const { return slow_; }
  const NewmaConfig& config() const { return config_; }

 private:
  NewmaConfig config_;
  std::shared_ptr<const FeatureMap> map_;
  Eigen::VectorXd fast_;
  Eigen::VectorXd slow_;
  Eigen::VectorXd embedded_;
  ThresholdState threshold_;
  long warmup_ = 0;
};

// Classical control-chart average against a known in-control moment vector.
class EwmaDetector : public Detector {
 public:
  EwmaDetector(double forgetting_factor, Eigen::VectorXd in_control_moments,
               std::shared_ptr<const FeatureMap> map, ThresholdSpec threshold,
               long warmup_steps);

  StepResult step(const Eigen::Ref<const Eigen::VectorXd>& x) override;
  std::string name() const override { return "ewma"; }
  long warmup_steps() const override { return warmup_; }
  std::size_t state_bytes() const override;

  const Eigen::VectorXd& average() const { return avg_; }

 private:
  double forgetting_factor_;
  Eigen::VectorXd target_;
  std::shared_ptr<const FeatureMap> map_;
  Eigen::VectorXd avg_;
  Eigen::VectorXd embedded_;
  ThresholdState threshold_;
  long warmup_ = 0;
};

// Two adjacent moving averages over the last 2B embedded samples, maintained
// recursively over a ring buffer. The statistic is valid from t = 2B on.
class SwDetector : public Detector {
 public:
  SwDetector(int window, std::shared_ptr<const FeatureMap> map,
             ThresholdSpec threshold);

  StepResult step(const Eigen::Ref<const Eigen::VectorXd>& x) override;
  std::string name() const override { return "sw"; }
  long warmup_steps() const override { return 2L * window_; }
  std::size_t state_bytes() const override;

  int window() const { return window_; }

 private:
  int window_ = 0;
  std::shared_ptr<const FeatureMap> map_;
  Eigen::MatrixXd ring_;       // output_dim x 2B embedded samples
  Eigen::VectorXd old_sum_;    // samples (t-2B, t-B]
  Eigen::VectorXd recent_sum_; // samples (t-B, t]
  Eigen::VectorXd embedded_;
  ThresholdState threshold_;
};

// Kernel scan statistic: the newest block of B raw samples against N
// reference blocks, scored by the unbiased quadratic MMD^2 estimate with a
// Gaussian kernel and averaged over blocks. Gram sums are updated
// incrementally in O(N B d) per step.
class ScanBDetector : public Detector {
 public:
  ScanBDetector(int window, int num_blocks, double bandwidth, int dim,
                ThresholdSpec threshold);

  StepResult step(const Eigen::Ref<const Eigen::VectorXd>& x) override;
  std::string name() const override { return "scanb"; }
  long warmup_steps() const override;
  std::size_t state_bytes() const override;

  int window() const { return window_; }
  int num_blocks() const { return num_blocks_; }

  // Recomputes the statistic from the raw ring without the incremental sums.
  double recompute_statistic() const;

 private:
  double kernel(long i, long j) const;  // Gaussian kernel of ring columns
  long ring_col(long time) const { return (time - 1) % capacity(); }
  long capacity() const { return static_cast<long>(num_blocks_ + 1) * window_; }
  void initialize_sums();
  double statistic_from_sums() const;

  int window_ = 0;
  int num_blocks_ = 0;
  double gamma_ = 0.0;  // 1 / (2 sigma^2)
  int dim_ = 0;
  Eigen::MatrixXd ring_;  // d x (N+1)B raw samples
  // Per reference block n: within-block ordered-pair kernel sum, full cross
  // sum against the recent block, and the aligned-diagonal cross sum.
  std::vector<double> within_ref_;
  std::vector<double> cross_full_;
  std::vector<double> cross_diag_;
  double within_recent_ = 0.0;
  bool sums_ready_ = false;
  ThresholdState threshold_;
};

// Runs a detector over a sample source. The source yields samples until it
// returns false. Errors thrown by the detector are rethrown with the step
// index attached.
using SampleSource = std::function<bool(Eigen::VectorXd&)>;
using StepSink = std::function<void(const StepResult&)>;

void run_stream(Detector& detector, const SampleSource& source, const StepSink& sink);
std::vector<StepResult> run_stream(Detector& detector, const SampleSource& source);
std::vector<StepResult> run_stream(Detector& detector,
                                   const Eigen::Ref<const Eigen::MatrixXd>& samples);

}  // namespace newma
