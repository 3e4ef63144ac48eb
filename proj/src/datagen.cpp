#include "newma/datagen.hpp"

#include <cmath>

#include "newma/errors.hpp"

namespace newma {

void GmmStreamSpec::validate() const {
  if (dim < 1) throw ConfigError("gmm stream: dim must be positive");
  if (components < 1) throw ConfigError("gmm stream: needs at least one component");
  if (segment_length < 1) throw ConfigError("gmm stream: segment length must be positive");
  if (num_changes < 0) throw ConfigError("gmm stream: num_changes must be nonnegative");
  if (!fixed_identity_covariance && !(effective_dof() > dim + 1))
    throw ConfigError("gmm stream: inverse-Wishart dof must exceed dim + 1");
  if (!(mean_scale >= 0.0)) throw ConfigError("gmm stream: mean scale must be nonnegative");
  if (!(dirichlet_alpha > 0.0))
    throw ConfigError("gmm stream: Dirichlet concentration must be positive");
}

nlohmann::json GmmStreamSpec::to_json() const {
  nlohmann::json j;
  j["kind"] = "gmm";
  j["d"] = dim;
  j["k"] = components;
  j["n"] = segment_length;
  j["changes"] = num_changes;
  j["seed"] = seed;
  j["mean_scale"] = mean_scale;
  j["wishart_dof"] = effective_dof();
  j["dirichlet_alpha"] = dirichlet_alpha;
  j["fixed_identity_covariance"] = fixed_identity_covariance;
  return j;
}

GmmStreamGenerator::GmmStreamGenerator(GmmStreamSpec spec) : spec_(spec) {
  spec_.validate();
  gauss_.resize(spec_.dim);
  means_.resize(spec_.dim, spec_.components);
  cov_factors_.resize(static_cast<std::size_t>(spec_.components));
  start_segment(0);
}

std::vector<long> GmmStreamGenerator::change_points() const {
  std::vector<long> cps(static_cast<std::size_t>(spec_.num_changes));
  for (int i = 0; i < spec_.num_changes; ++i)
    cps[static_cast<std::size_t>(i)] = (i + 1L) * spec_.segment_length;
  return cps;
}

void GmmStreamGenerator::start_segment(int index) {
  segment_ = index;
  rng_ = Rng(derive_seed(spec_.seed, "gmm-segment", static_cast<std::uint64_t>(index)));
  const int d = spec_.dim;
  const int k = spec_.components;

  const std::vector<double> alpha(static_cast<std::size_t>(k), spec_.dirichlet_alpha);
  weights_ = rng_.dirichlet(alpha);
  weight_cdf_.resize(weights_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    acc += weights_[i];
    weight_cdf_[i] = acc;
  }
  weight_cdf_.back() = 1.0;

  for (int c = 0; c < k; ++c)
    for (int r = 0; r < d; ++r) means_(r, c) = spec_.mean_scale * rng_.normal();

  // Inverse-Wishart(dof, I) via the Bartlett factor of the Wishart draw:
  // W = A A^T with A lower triangular, covariance = W^{-1} = A^{-T} A^{-1},
  // so M = A^{-T} satisfies M M^T = covariance.
  if (spec_.fixed_identity_covariance) {
    for (int c = 0; c < k; ++c)
      cov_factors_[static_cast<std::size_t>(c)] = Eigen::MatrixXd::Identity(d, d);
    return;
  }
  const double dof = spec_.effective_dof();
  Eigen::MatrixXd bartlett(d, d);
  for (int c = 0; c < k; ++c) {
    bartlett.setZero();
    for (int i = 0; i < d; ++i) {
      bartlett(i, i) = std::sqrt(rng_.chi_square(dof - i));
      for (int j = 0; j < i; ++j) bartlett(i, j) = rng_.normal();
    }
    cov_factors_[static_cast<std::size_t>(c)] =
        bartlett.triangularView<Eigen::Lower>()
            .solve(Eigen::MatrixXd::Identity(d, d))
            .transpose();
  }
}

bool GmmStreamGenerator::next(Eigen::Ref<Eigen::VectorXd> out) {
  if (position_ >= total_samples()) return false;
  const int seg = static_cast<int>(position_ / spec_.segment_length);
  if (seg != segment_) start_segment(seg);

  const double u = rng_.uniform();
  int comp = 0;
  while (comp + 1 < spec_.components && u > weight_cdf_[static_cast<std::size_t>(comp)])
    ++comp;
  for (int i = 0; i < spec_.dim; ++i) gauss_[i] = rng_.normal();
  out.noalias() = means_.col(comp);
  out.noalias() += cov_factors_[static_cast<std::size_t>(comp)] * gauss_;
  ++position_;
  return true;
}

LabeledStream generate_gmm_stream(const GmmStreamSpec& spec) {
  GmmStreamGenerator gen(spec);
  LabeledStream stream;
  stream.samples.resize(spec.dim, gen.total_samples());
  for (long i = 0; i < gen.total_samples(); ++i) gen.next(stream.samples.col(i));
  stream.change_points = gen.change_points();
  return stream;
}

LabeledStream generate_shift_stream(int dim, long n,
                                    const Eigen::Ref<const Eigen::VectorXd>& delta,
                                    std::uint64_t seed) {
  if (dim < 1) throw ConfigError("shift stream: dim must be positive");
  if (n < 2) throw ConfigError("shift stream: needs at least two samples per side");
  if (delta.size() != dim) throw ConfigError("shift stream: delta dimension mismatch");
  LabeledStream stream;
  stream.samples.resize(dim, 2 * n);
  Rng rng(derive_seed(seed, "shift-stream"));
  for (long i = 0; i < 2 * n; ++i)
    for (int r = 0; r < dim; ++r) stream.samples(r, i) = rng.normal();
  for (long i = n; i < 2 * n; ++i) stream.samples.col(i) += delta;
  stream.change_points = {n};
  return stream;
}

}  // namespace newma
