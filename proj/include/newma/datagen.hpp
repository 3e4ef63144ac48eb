#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "newma/rng.hpp"

namespace newma {

// Piecewise-i.i.d. Gaussian mixture stream. Every segment redraws component
// means (centered Gaussian), covariances (inverse-Wishart with identity
// scale) and mixing weights (symmetric Dirichlet) from an independent
// sub-seed; samples within a segment are i.i.d.
struct GmmStreamSpec {
  int dim = 0;
  int components = 0;
  long segment_length = 0;
  int num_changes = 0;
  std::uint64_t seed = 0;
  double mean_scale = 1.0;
  double wishart_dof = 0.0;     // <= 0: defaults to dim + 10
  double dirichlet_alpha = 1.0;
  // Pins every component covariance to the identity; with mean_scale 0 the
  // stream is i.i.d. N(0, I) with purely nominal change points, the null
  // configuration used to measure false alarms.
  bool fixed_identity_covariance = false;

  double effective_dof() const { return wishart_dof > 0.0 ? wishart_dof : dim + 10.0; }
  void validate() const;
  nlohmann::json to_json() const;
};

class GmmStreamGenerator {
 public:
  explicit GmmStreamGenerator(GmmStreamSpec spec);

  int dim() const { return spec_.dim; }
  long total_samples() const {
    return (spec_.num_changes + 1L) * spec_.segment_length;
  }
  std::vector<long> change_points() const;

  // Fills the next sample; returns false once the stream is exhausted.
  bool next(Eigen::Ref<Eigen::VectorXd> out);

  // Current segment parameters, exposed for moment checks.
  const Eigen::MatrixXd& segment_means() const { return means_; }
  const std::vector<double>& segment_weights() const { return weights_; }
  const std::vector<Eigen::MatrixXd>& segment_cov_factors() const {
    return cov_factors_;
  }

 private:
  void start_segment(int index);

  GmmStreamSpec spec_;
  long position_ = 0;
  int segment_ = -1;
  Rng rng_{0};
  std::vector<double> weights_;
  std::vector<double> weight_cdf_;
  Eigen::MatrixXd means_;                     // dim x components
  std::vector<Eigen::MatrixXd> cov_factors_;  // M with M M^T = covariance
  Eigen::VectorXd gauss_;
};

struct LabeledStream {
  Eigen::MatrixXd samples;  // dim x n, one sample per column
  std::vector<long> change_points;
};

LabeledStream generate_gmm_stream(const GmmStreamSpec& spec);

// Unit-test stream: n samples of N(0, I) followed by n samples of
// N(delta, I); the single change point is at n.
LabeledStream generate_shift_stream(int dim, long n,
                                    const Eigen::Ref<const Eigen::VectorXd>& delta,
                                    std::uint64_t seed);

}  // namespace newma
