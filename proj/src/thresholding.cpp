#include "newma/thresholding.hpp"

#include <algorithm>
#include <cmath>

#include "newma/errors.hpp"

namespace newma {

namespace {
// Relative margin on the squared threshold. Breaks the fixed point where an
// exactly constant statistic converges onto its own threshold and chatters.
constexpr double kRelativeMargin = 1e-9;
}  // namespace

ThresholdState ThresholdState::fixed(double tau, long suppressed_updates) {
  if (!(tau >= 0.0)) throw ConfigError("fixed threshold must be nonnegative");
  if (suppressed_updates < 0) throw ConfigError("warmup must be nonnegative");
  ThresholdState s;
  s.adaptive_ = false;
  s.tau_ = tau;
  s.warmup_remaining_ = suppressed_updates;
  return s;
}

ThresholdState ThresholdState::adaptive(const AdaptiveThresholdConfig& config,
                                        long suppressed_updates) {
  if (!(config.learning_rate > 0.0 && config.learning_rate < 1.0))
    throw ConfigError("adaptive threshold: learning rate must be in (0,1)");
  if (suppressed_updates < 0) throw ConfigError("warmup must be nonnegative");
  ThresholdState s;
  s.adaptive_ = true;
  s.config_ = config;
  s.warmup_remaining_ = suppressed_updates;
  return s;
}

double ThresholdState::sigma() const {
  return std::sqrt(std::max(mu2_ - mu_ * mu_, 0.0));
}

ThresholdState::Decision ThresholdState::update(double statistic) {
  const bool warmed_up = warmup_remaining_ <= 0;
  if (warmup_remaining_ > 0) --warmup_remaining_;

  Decision d;
  if (!adaptive_) {
    d.threshold = tau_;
    d.flagged = warmed_up && statistic >= tau_;
    return d;
  }

  const double s2 = statistic * statistic;
  const double alpha = config_.learning_rate;
  mu_ = (1.0 - alpha) * mu_ + alpha * s2;
  mu2_ = (1.0 - alpha) * mu2_ + alpha * s2 * s2;
  const double level = mu_ + config_.quantile_coeff * sigma();
  const double level_sq = std::max(level, 0.0) * (1.0 + kRelativeMargin);
  d.threshold = std::sqrt(level_sq);
  d.flagged = warmed_up && s2 >= level_sq;
  return d;
}

}  // namespace newma
