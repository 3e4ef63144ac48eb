#pragma once

#include <string>

namespace newma {

struct AdaptiveThresholdConfig {
  double learning_rate = 0.01;   // alpha
  double quantile_coeff = 1.64;  // a; 1.64 targets the 5% normal upper tail
};

// Online threshold shared by all detectors. Fixed mode compares the raw
// statistic against a constant; adaptive mode tracks running estimates of
// E[S^2] and E[S^4] with exponential weights and flags when
// S^2 >= mu + a * sigma. Estimates update on every valid statistic, flagged
// steps included. The first suppressed_updates updates never flag; detectors
// size that count so no flag appears before twice their window.
class ThresholdState {
 public:
  ThresholdState() = default;  // fixed threshold zero; reassign via factories

  static ThresholdState fixed(double tau, long suppressed_updates);
  static ThresholdState adaptive(const AdaptiveThresholdConfig& config,
                                 long suppressed_updates);

  struct Decision {
    double threshold = 0.0;
    bool flagged = false;
  };

  Decision update(double statistic);

  bool is_adaptive() const { return adaptive_; }
  double mean_sq() const { return mu_; }        // running E[S^2]
  double mean_quad() const { return mu2_; }     // running E[S^4]
  double sigma() const;                         // sqrt(max(mu2 - mu^2, 0))
  long warmup_remaining() const { return warmup_remaining_; }

 private:
  bool adaptive_ = false;
  double tau_ = 0.0;
  AdaptiveThresholdConfig config_;
  double mu_ = 0.0;
  double mu2_ = 0.0;
  long warmup_remaining_ = 0;
};

}  // namespace newma
