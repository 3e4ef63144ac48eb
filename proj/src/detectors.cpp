#include "newma/detectors.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "newma/calibration.hpp"
#include "newma/errors.hpp"

namespace newma {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

StepResult invalid_step(long t) {
  StepResult r;
  r.t = t;
  r.statistic = kNaN;
  r.threshold = kNaN;
  r.flagged = false;
  r.valid = false;
  return r;
}

}  // namespace

ThresholdSpec ThresholdSpec::fixed(double tau) {
  ThresholdSpec s;
  s.mode = Mode::kFixed;
  s.tau = tau;
  return s;
}

ThresholdSpec ThresholdSpec::adaptive(double learning_rate, double quantile_coeff) {
  ThresholdSpec s;
  s.mode = Mode::kAdaptive;
  s.adaptive_config.learning_rate = learning_rate;
  s.adaptive_config.quantile_coeff = quantile_coeff;
  return s;
}

ThresholdSpec ThresholdSpec::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string args = colon == std::string::npos ? "" : text.substr(colon + 1);
  try {
    if (head == "fixed") {
      if (args.empty()) throw ConfigError("threshold: fixed:<tau> expected");
      return fixed(std::stod(args));
    }
    if (head == "adaptive") {
      if (args.empty()) return adaptive();
      const auto comma = args.find(',');
      if (comma == std::string::npos)
        return adaptive(std::stod(args));
      return adaptive(std::stod(args.substr(0, comma)),
                      std::stod(args.substr(comma + 1)));
    }
  } catch (const std::invalid_argument&) {
    throw ConfigError("threshold: cannot parse '" + text + "'");
  } catch (const std::out_of_range&) {
    throw ConfigError("threshold: value out of range in '" + text + "'");
  }
  throw ConfigError("threshold: expected fixed:<tau> or adaptive:<alpha>,<a>, got '" +
                    text + "'");
}

std::string ThresholdSpec::to_text() const {
  std::ostringstream out;
  if (mode == Mode::kFixed) {
    out << "fixed:" << tau;
  } else {
    out << "adaptive:" << adaptive_config.learning_rate << ","
        << adaptive_config.quantile_coeff;
  }
  return out.str();
}

nlohmann::json ThresholdSpec::to_json() const {
  nlohmann::json j;
  if (mode == Mode::kFixed) {
    j["mode"] = "fixed";
    j["tau"] = tau;
  } else {
    j["mode"] = "adaptive";
    j["alpha"] = adaptive_config.learning_rate;
    j["a"] = adaptive_config.quantile_coeff;
  }
  return j;
}

ThresholdState ThresholdSpec::make_state(long warmup_steps) const {
  if (mode == Mode::kFixed) return ThresholdState::fixed(tau, warmup_steps);
  return ThresholdState::adaptive(adaptive_config, warmup_steps);
}

void NewmaConfig::validate() const {
  if (!(small_lambda > 0.0 && small_lambda < big_lambda && big_lambda < 1.0))
    throw ConfigError("newma: factors must satisfy 0 < small_lambda < big_lambda < 1");
  feature_map.validate();
}

int NewmaConfig::window() const { return window_size(big_lambda, small_lambda); }

NewmaDetector::NewmaDetector(const NewmaConfig& config,
                             std::shared_ptr<const FeatureMap> map,
                             Eigen::VectorXd initial_value)
    : config_(config), map_(std::move(map)) {
  config_.validate();
  if (!map_) throw ConfigError("newma: feature map required");
  const int dim = map_->output_dim();
  if (initial_value.size() == 0) initial_value = Eigen::VectorXd::Zero(dim);
  if (initial_value.size() != dim)
    throw ConfigError("newma: initial value must match the embedded dimension");
  fast_ = initial_value;
  slow_ = std::move(initial_value);
  embedded_.resize(dim);
  warmup_ = 2L * config_.window();
  threshold_ = config_.threshold.make_state(warmup_);
}

StepResult NewmaDetector::step(const Eigen::Ref<const Eigen::VectorXd>& x) {
  map_->embed(x, embedded_);  // the single embedding shared by both averages
  const double big = config_.big_lambda;
  const double small = config_.small_lambda;
  fast_ = (1.0 - big) * fast_ + big * embedded_;
  slow_ = (1.0 - small) * slow_ + small * embedded_;
  ++t_;
  StepResult r;
  r.t = t_;
  r.statistic = (fast_ - slow_).norm();
  const auto decision = threshold_.update(r.statistic);
  r.threshold = decision.threshold;
  r.flagged = decision.flagged;
  r.valid = true;
  return r;
}

std::size_t NewmaDetector::state_bytes() const {
  return sizeof(double) *
         (static_cast<std::size_t>(fast_.size()) + static_cast<std::size_t>(slow_.size()));
}

EwmaDetector::EwmaDetector(double forgetting_factor, Eigen::VectorXd in_control_moments,
                           std::shared_ptr<const FeatureMap> map,
                           ThresholdSpec threshold, long warmup_steps)
    : forgetting_factor_(forgetting_factor),
      target_(std::move(in_control_moments)),
      map_(std::move(map)) {
  if (!(forgetting_factor_ > 0.0 && forgetting_factor_ <= 1.0))
    throw ConfigError("ewma: forgetting factor must be in (0, 1]");
  if (!map_) throw ConfigError("ewma: feature map required");
  if (target_.size() == 0)
    throw ConfigError("ewma: in-control moment vector required");
  if (target_.size() != map_->output_dim())
    throw ConfigError("ewma: in-control moments must match the embedded dimension");
  if (warmup_steps < 0) throw ConfigError("ewma: warmup must be nonnegative");
  avg_ = Eigen::VectorXd::Zero(map_->output_dim());
  embedded_.resize(map_->output_dim());
  warmup_ = warmup_steps;
  threshold_ = threshold.make_state(warmup_);
}

StepResult EwmaDetector::step(const Eigen::Ref<const Eigen::VectorXd>& x) {
  map_->embed(x, embedded_);
  avg_ = (1.0 - forgetting_factor_) * avg_ + forgetting_factor_ * embedded_;
  ++t_;
  StepResult r;
  r.t = t_;
  r.statistic = (avg_ - target_).norm();
  const auto decision = threshold_.update(r.statistic);
  r.threshold = decision.threshold;
  r.flagged = decision.flagged;
  r.valid = true;
  return r;
}

std::size_t EwmaDetector::state_bytes() const {
  return sizeof(double) * static_cast<std::size_t>(avg_.size());
}

SwDetector::SwDetector(int window, std::shared_ptr<const FeatureMap> map,
                       ThresholdSpec threshold)
    : window_(window), map_(std::move(map)) {
  if (window_ < 1) throw ConfigError("sw: window must be >= 1");
  if (!map_) throw ConfigError("sw: feature map required");
  const int dim = map_->output_dim();
  ring_.setZero(dim, 2L * window_);
  old_sum_ = Eigen::VectorXd::Zero(dim);
  recent_sum_ = Eigen::VectorXd::Zero(dim);
  embedded_.resize(dim);
  threshold_ = threshold.make_state(warmup_steps());
}

StepResult SwDetector::step(const Eigen::Ref<const Eigen::VectorXd>& x) {
  map_->embed(x, embedded_);
  ++t_;
  const long cap = 2L * window_;
  const long slot = (t_ - 1) % cap;
  if (t_ <= window_) {
    old_sum_ += embedded_;
  } else if (t_ <= cap) {
    recent_sum_ += embedded_;
  } else {
    // The slot being overwritten holds the sample leaving the old window;
    // the sample crossing between windows sits half a ring away.
    const long crossing = (slot + window_) % cap;
    old_sum_ += ring_.col(crossing) - ring_.col(slot);
    recent_sum_ += embedded_ - ring_.col(crossing);
  }
  ring_.col(slot) = embedded_;

  if (t_ < cap) return invalid_step(t_);

  StepResult r;
  r.t = t_;
  r.statistic = (old_sum_ - recent_sum_).norm() / window_;
  const auto decision = threshold_.update(r.statistic);
  r.threshold = decision.threshold;
  r.flagged = decision.flagged;
  r.valid = true;
  return r;
}

std::size_t SwDetector::state_bytes() const {
  return sizeof(double) * (static_cast<std::size_t>(ring_.size()) +
                           static_cast<std::size_t>(old_sum_.size()) +
                           static_cast<std::size_t>(recent_sum_.size()));
}

ScanBDetector::ScanBDetector(int window, int num_blocks, double bandwidth, int dim,
                             ThresholdSpec threshold)
    : window_(window), num_blocks_(num_blocks), dim_(dim) {
  if (window_ < 2) throw ConfigError("scanb: window must be >= 2");
  if (num_blocks_ < 1) throw ConfigError("scanb: needs at least one reference block");
  if (!(bandwidth > 0.0)) throw ConfigError("scanb: bandwidth must be positive");
  if (dim_ < 1) throw ConfigError("scanb: dimension must be positive");
  gamma_ = 1.0 / (2.0 * bandwidth * bandwidth);
  ring_.setZero(dim_, capacity());
  within_ref_.assign(static_cast<std::size_t>(num_blocks_), 0.0);
  cross_full_.assign(static_cast<std::size_t>(num_blocks_), 0.0);
  cross_diag_.assign(static_cast<std::size_t>(num_blocks_), 0.0);
  threshold_ = threshold.make_state(warmup_steps());
}

long ScanBDetector::warmup_steps() const {
  // All blocks full, and never earlier than twice the window.
  return std::max<long>(capacity(), 2L * window_);
}

double ScanBDetector::kernel(long i, long j) const {
  const double sq = (ring_.col(ring_col(i)) - ring_.col(ring_col(j))).squaredNorm();
  return std::exp(-gamma_ * sq);
}

void ScanBDetector::initialize_sums() {
  const long b = window_;
  const long recent_start = t_ - b;  // recent block is (t-B, t]
  within_recent_ = 0.0;
  for (long i = 1; i <= b; ++i)
    for (long j = 1; j <= b; ++j)
      if (i != j) within_recent_ += kernel(recent_start + i, recent_start + j);
  for (int n = 1; n <= num_blocks_; ++n) {
    const long ref_start = t_ - static_cast<long>(n + 1) * b;
    double within = 0.0, full = 0.0, diag = 0.0;
    for (long i = 1; i <= b; ++i) {
      for (long j = 1; j <= b; ++j) {
        if (i != j) within += kernel(ref_start + i, ref_start + j);
        full += kernel(ref_start + i, recent_start + j);
      }
      diag += kernel(ref_start + i, recent_start + i);
    }
    within_ref_[static_cast<std::size_t>(n - 1)] = within;
    cross_full_[static_cast<std::size_t>(n - 1)] = full;
    cross_diag_[static_cast<std::size_t>(n - 1)] = diag;
  }
  sums_ready_ = true;
}

double ScanBDetector::statistic_from_sums() const {
  const double b = static_cast<double>(window_);
  const double pairs = b * (b - 1.0);
  double total = 0.0;
  for (int n = 0; n < num_blocks_; ++n) {
    const auto idx = static_cast<std::size_t>(n);
    total += (within_ref_[idx] + within_recent_ -
              2.0 * (cross_full_[idx] - cross_diag_[idx])) /
             pairs;
  }
  return total / num_blocks_;
}

StepResult ScanBDetector::step(const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != dim_)
    throw InputError("scanb: expected dimension " + std::to_string(dim_) + ", got " +
                     std::to_string(x.size()));
  const long b = window_;
  const long cap = capacity();
  ++t_;

  if (t_ <= cap) {
    ring_.col(ring_col(t_)) = x;
    if (t_ == cap) initialize_sums();
  } else {
    // Every block slides by one. Remove contributions of the departing
    // samples before the ring slot is overwritten, then add the arrivals.
    // Old recent block (t-1-B, t-1]; old reference block n is
    // ((t-1)-(n+1)B, (t-1)-nB].
    for (int n = 1; n <= num_blocks_; ++n) {
      const auto idx = static_cast<std::size_t>(n - 1);
      const long old_ref_start = t_ - 1 - static_cast<long>(n + 1) * b;
      const long ref_leave = old_ref_start + 1;
      const long ref_enter = old_ref_start + b + 1;
      const long rec_leave = t_ - b;  // leaves the recent block
      // within-reference: drop the leaver against the B-1 stayers, add the
      // arrival against the same stayers.
      for (long i = ref_leave + 1; i <= old_ref_start + b; ++i) {
        within_ref_[idx] -= 2.0 * kernel(ref_leave, i);
        within_ref_[idx] += 2.0 * kernel(ref_enter, i);
      }
      // cross sums against the recent block before it slides.
      for (long j = t_ - b; j <= t_ - 1; ++j) {
        cross_full_[idx] -= kernel(ref_leave, j);
        cross_full_[idx] += kernel(ref_enter, j);
      }
      // now slide the recent block: column rec_leave exits, t_ enters later.
      for (long i = old_ref_start + 2; i <= ref_enter; ++i)
        cross_full_[idx] -= kernel(i, rec_leave);
      cross_diag_[idx] -= kernel(ref_leave, rec_leave);
    }
    for (long i = t_ - b + 1; i <= t_ - 1; ++i)
      within_recent_ -= 2.0 * kernel(t_ - b, i);
    ring_.col(ring_col(t_)) = x;
    for (int n = 1; n <= num_blocks_; ++n) {
      const auto idx = static_cast<std::size_t>(n - 1);
      const long ref_start = t_ - static_cast<long>(n + 1) * b;
      for (long i = ref_start + 1; i <= ref_start + b; ++i)
        cross_full_[idx] += kernel(i, t_);
      cross_diag_[idx] += kernel(ref_start + b, t_);
    }
    for (long i = t_ - b + 1; i <= t_ - 1; ++i) within_recent_ += 2.0 * kernel(t_, i);
  }

  if (t_ < cap) return invalid_step(t_);

  StepResult r;
  r.t = t_;
  r.statistic = statistic_from_sums();
  const auto decision = threshold_.update(r.statistic);
  r.threshold = decision.threshold;
  r.flagged = decision.flagged;
  r.valid = true;
  return r;
}

double ScanBDetector::recompute_statistic() const {
  if (!sums_ready_) throw InputError("scanb: statistic not yet valid");
  const long b = window_;
  const double pairs = static_cast<double>(b) * (b - 1.0);
  const long recent_start = t_ - b;
  double total = 0.0;
  for (int n = 1; n <= num_blocks_; ++n) {
    const long ref_start = t_ - static_cast<long>(n + 1) * b;
    double acc = 0.0;
    for (long i = 1; i <= b; ++i)
      for (long j = 1; j <= b; ++j) {
        if (i == j) continue;
        acc += kernel(ref_start + i, ref_start + j) +
               kernel(recent_start + i, recent_start + j) -
               kernel(ref_start + i, recent_start + j) -
               kernel(ref_start + j, recent_start + i);
      }
    total += acc / pairs;
  }
  return total / num_blocks_;
}

std::size_t ScanBDetector::state_bytes() const {
  return sizeof(double) * (static_cast<std::size_t>(ring_.size()) +
                           3 * within_ref_.size() + 1);
}

void run_stream(Detector& detector, const SampleSource& source, const StepSink& sink) {
  Eigen::VectorXd x;
  long index = 0;
  while (source(x)) {
    ++index;
    const auto at = [&](const char* what) {
      return "step " + std::to_string(index) + ": " + what;
    };
    try {
      sink(detector.step(x));
    } catch (const ConfigError& e) {
      throw ConfigError(at(e.what()));
    } catch (const InputError& e) {
      throw InputError(at(e.what()));
    } catch (const IoError& e) {
      throw IoError(at(e.what()));
    } catch (const NumericError& e) {
      throw NumericError(at(e.what()));
    }
  }
}

std::vector<StepResult> run_stream(Detector& detector, const SampleSource& source) {
  std::vector<StepResult> results;
  run_stream(detector, source, [&](const StepResult& r) { results.push_back(r); });
  return results;
}

std::vector<StepResult> run_stream(Detector& detector,
                                   const Eigen::Ref<const Eigen::MatrixXd>& samples) {
  std::vector<StepResult> results;
  results.reserve(static_cast<std::size_t>(samples.cols()));
  for (long i = 0; i < samples.cols(); ++i) results.push_back(detector.step(samples.col(i)));
  return results;
}

}  // namespace newma
