#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "newma/errors.hpp"

namespace newma {

// The embedding kinds supported by the toolkit. Rff and Fastfood produce
// complex exponential features packed as interleaved (cos, sin) real pairs;
// the Euclidean norm of the packing equals the Hermitian norm of the complex
// vector, so detectors stay real-valued.
enum class FeatureMapKind { kIdentity, kRawMoments, kHistogram, kRff, kFastfood };

std::string to_string(FeatureMapKind kind);
FeatureMapKind feature_map_kind_from_string(const std::string& name);

// Axis-aligned box; membership is lo <= x < hi componentwise.
struct HistogramBox {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

struct FeatureMapSpec {
  FeatureMapKind kind = FeatureMapKind::kIdentity;
  int input_dim = 0;
  int moment_order = 0;             // RawMoments: max total degree (>= 1)
  std::vector<HistogramBox> bins;   // Histogram
  int num_features = 0;             // Rff/Fastfood: complex feature count m
  double bandwidth = 0.0;           // Rff/Fastfood: Gaussian kernel sigma
  std::uint64_t seed = 0;           // Rff/Fastfood: parameter draw seed

  int output_dim() const;
  void validate() const;  // throws ConfigError

  nlohmann::json to_json() const;
  static FeatureMapSpec from_json(const nlohmann::json& j);

  static FeatureMapSpec identity(int d);
  static FeatureMapSpec raw_moments(int d, int order);
  static FeatureMapSpec histogram(std::vector<HistogramBox> boxes);
  static FeatureMapSpec rff(int d, int m, double sigma, std::uint64_t seed);
  static FeatureMapSpec fastfood(int d, int m, double sigma, std::uint64_t seed);
};

// Frozen, immutable embedding. All random parameters are drawn once at build
// time from the spec seed, so equal specs give bit-identical maps. Instances
// are safe to share across threads.
class FeatureMap {
 public:
  explicit FeatureMap(FeatureMapSpec spec);

  const FeatureMapSpec& spec() const { return spec_; }
  int input_dim() const { return spec_.input_dim; }
  int output_dim() const { return output_dim_; }

  // sup_x norm(embed(x)) when finite: 1 for Rff/Fastfood, sqrt(#bins) for
  // Histogram; unbounded kinds report nothing.
  std::optional<double> norm_bound() const;

  void embed(const Eigen::Ref<const Eigen::VectorXd>& x,
             Eigen::Ref<Eigen::VectorXd> out) const;
  Eigen::VectorXd embed(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  // Re<embed(x), embed(y)>, an unbiased estimate of the Gaussian kernel
  // exp(-|x-y|^2 / (2 sigma^2)) for the kernel-feature kinds.
  double kernel_estimate(const Eigen::Ref<const Eigen::VectorXd>& x,
                         const Eigen::Ref<const Eigen::VectorXd>& y) const;

  // Frequency matrix (m x d), kernel kinds only. Rows are the frozen
  // frequencies; exposed for tests and diagnostics.
  Eigen::MatrixXd frequency_matrix() const;

  int fastfood_padded_dim() const { return padded_dim_; }
  int fastfood_num_blocks() const { return static_cast<int>(blocks_.size()); }

  // Diagnostic factory: an Rff map with explicitly given frequencies instead
  // of seed-drawn ones.
  static FeatureMap rff_from_frequencies(Eigen::MatrixXd frequencies);

 private:
  struct FastfoodBlock {
    Eigen::VectorXd sign;        // +-1 diagonal
    std::vector<int> perm;       // permutation
    Eigen::VectorXd gauss;       // Gaussian diagonal
    Eigen::VectorXd scale;       // row-norm correction diagonal
  };

  void build_rff();
  void build_fastfood();
  void fastfood_project(const Eigen::Ref<const Eigen::VectorXd>& x,
                        Eigen::VectorXd& proj) const;

  FeatureMapSpec spec_;
  int output_dim_ = 0;

  Eigen::MatrixXd frequencies_;               // Rff: m x d
  std::vector<FastfoodBlock> blocks_;         // Fastfood
  int padded_dim_ = 0;                        // Fastfood: next power of two
  Eigen::MatrixXi moment_exponents_;          // RawMoments: n_out x d
};

FeatureMap build_feature_map(const FeatureMapSpec& spec);

// Median of pairwise Euclidean distances; samples are columns of the input.
// Exact over all pairs up to subsample_cap points, otherwise over a seeded
// subsample of that size. Throws ConfigError on fewer than two samples or a
// zero median (degenerate bandwidth).
double median_trick_bandwidth(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                              std::uint64_t seed = 0, int subsample_cap = 500);

// In-place unnormalized Walsh-Hadamard transform; size must be a power of two.
void walsh_hadamard_transform(Eigen::Ref<Eigen::VectorXd> v);

}  // namespace newma
