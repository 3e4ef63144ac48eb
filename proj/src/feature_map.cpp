#include "newma/feature_map.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "newma/rng.hpp"

namespace newma {

namespace {

long long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  long long r = 1;
  for (int i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > (1LL << 40)) throw ConfigError("raw-moments output dimension overflow");
  }
  return r;
}

int next_power_of_two(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

// All multi-indices with total degree in [1, order], graded lexicographic.
Eigen::MatrixXi enumerate_monomials(int dim, int order) {
  std::vector<std::vector<int>> rows;
  std::vector<int> e(static_cast<std::size_t>(dim), 0);
  for (int degree = 1; degree <= order; ++degree) {
    // compositions of `degree` into `dim` parts
    std::fill(e.begin(), e.end(), 0);
    e[0] = degree;
    for (;;) {
      rows.push_back(e);
      // next composition in colex order
      int i = dim - 1;
      while (i > 0 && e[i - 1] == 0) --i;
      if (i == 0) break;
      --e[i - 1];
      const int tail = std::accumulate(e.begin() + i, e.end(), 0) + 1;
      std::fill(e.begin() + i, e.end(), 0);
      e[i] = tail;
    }
  }
  Eigen::MatrixXi out(static_cast<int>(rows.size()), dim);
  for (int r = 0; r < out.rows(); ++r)
    for (int c = 0; c < dim; ++c) out(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  return out;
}

}  // namespace

std::string to_string(FeatureMapKind kind) {
  switch (kind) {
    case FeatureMapKind::kIdentity: return "identity";
    case FeatureMapKind::kRawMoments: return "moments";
    case FeatureMapKind::kHistogram: return "histogram";
    case FeatureMapKind::kRff: return "rff";
    case FeatureMapKind::kFastfood: return "fastfood";
  }
  throw ConfigError("unknown feature map kind");
}

FeatureMapKind feature_map_kind_from_string(const std::string& name) {
  if (name == "identity") return FeatureMapKind::kIdentity;
  if (name == "moments") return FeatureMapKind::kRawMoments;
  if (name == "histogram") return FeatureMapKind::kHistogram;
  if (name == "rff") return FeatureMapKind::kRff;
  if (name == "fastfood") return FeatureMapKind::kFastfood;
  throw ConfigError("unknown feature map kind: " + name);
}

int FeatureMapSpec::output_dim() const {
  switch (kind) {
    case FeatureMapKind::kIdentity:
      return input_dim;
    case FeatureMapKind::kRawMoments: {
      const long long n = binomial(input_dim + moment_order, moment_order) - 1;
      if (n > (1LL << 30)) throw ConfigError("raw-moments output dimension overflow");
      return static_cast<int>(n);
    }
    case FeatureMapKind::kHistogram:
      return static_cast<int>(bins.size());
    case FeatureMapKind::kRff:
    case FeatureMapKind::kFastfood:
      return 2 * num_features;
  }
  throw ConfigError("unknown feature map kind");
}

void FeatureMapSpec::validate() const {
  if (input_dim <= 0) throw ConfigError("feature map: input_dim must be positive");
  switch (kind) {
    case FeatureMapKind::kIdentity:
      break;
    case FeatureMapKind::kRawMoments:
      if (moment_order < 1) throw ConfigError("raw moments: order must be >= 1");
      break;
    case FeatureMapKind::kHistogram:
      if (bins.empty()) throw ConfigError("histogram: needs at least one bin");
      for (const auto& b : bins) {
        if (b.lo.size() != input_dim || b.hi.size() != input_dim)
          throw ConfigError("histogram: bin dimension mismatch");
        if ((b.lo.array() >= b.hi.array()).any())
          throw ConfigError("histogram: bin must satisfy lo < hi");
      }
      break;
    case FeatureMapKind::kRff:
      if (num_features <= 0) throw ConfigError("rff: m must be positive");
      if (!(bandwidth > 0.0)) throw ConfigError("rff: sigma must be positive");
      break;
    case FeatureMapKind::kFastfood: {
      if (num_features <= 0) throw ConfigError("fastfood: m must be positive");
      if (!(bandwidth > 0.0)) throw ConfigError("fastfood: sigma must be positive");
      const int padded = next_power_of_two(input_dim);
      if (num_features % padded != 0)
        throw ConfigError("fastfood: m must be a positive multiple of the padded dimension " +
                          std::to_string(padded));
      break;
    }
  }
}

nlohmann::json FeatureMapSpec::to_json() const {
  nlohmann::json j;
  j["kind"] = to_string(kind);
  j["d"] = input_dim;
  switch (kind) {
    case FeatureMapKind::kIdentity:
      break;
    case FeatureMapKind::kRawMoments:
      j["order"] = moment_order;
      break;
    case FeatureMapKind::kHistogram: {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& b : bins) {
        nlohmann::json box;
        box["lo"] = std::vector<double>(b.lo.data(), b.lo.data() + b.lo.size());
        box["hi"] = std::vector<double>(b.hi.data(), b.hi.data() + b.hi.size());
        arr.push_back(box);
      }
      j["bins"] = arr;
      break;
    }
    case FeatureMapKind::kRff:
    case FeatureMapKind::kFastfood:
      j["m"] = num_features;
      j["sigma"] = bandwidth;
      j["seed"] = seed;
      break;
  }
  return j;
}

FeatureMapSpec FeatureMapSpec::from_json(const nlohmann::json& j) {
  FeatureMapSpec spec;
  try {
    spec.kind = feature_map_kind_from_string(j.at("kind").get<std::string>());
    spec.input_dim = j.at("d").get<int>();
    switch (spec.kind) {
      case FeatureMapKind::kIdentity:
        break;
      case FeatureMapKind::kRawMoments:
        spec.moment_order = j.at("order").get<int>();
        break;
      case FeatureMapKind::kHistogram:
        for (const auto& box : j.at("bins")) {
          HistogramBox b;
          const auto lo = box.at("lo").get<std::vector<double>>();
          const auto hi = box.at("hi").get<std::vector<double>>();
          b.lo = Eigen::Map<const Eigen::VectorXd>(lo.data(), static_cast<long>(lo.size()));
          b.hi = Eigen::Map<const Eigen::VectorXd>(hi.data(), static_cast<long>(hi.size()));
          spec.bins.push_back(std::move(b));
        }
        break;
      case FeatureMapKind::kRff:
      case FeatureMapKind::kFastfood:
        spec.num_features = j.at("m").get<int>();
        spec.bandwidth = j.at("sigma").get<double>();
        spec.seed = j.at("seed").get<std::uint64_t>();
        break;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("feature map json: ") + e.what());
  }
  spec.validate();
  return spec;
}

FeatureMapSpec FeatureMapSpec::identity(int d) {
  FeatureMapSpec s;
  s.kind = FeatureMapKind::kIdentity;
  s.input_dim = d;
  return s;
}

FeatureMapSpec FeatureMapSpec::raw_moments(int d, int order) {
  FeatureMapSpec s;
  s.kind = FeatureMapKind::kRawMoments;
  s.input_dim = d;
  s.moment_order = order;
  return s;
}

FeatureMapSpec FeatureMapSpec::histogram(std::vector<HistogramBox> boxes) {
  FeatureMapSpec s;
  s.kind = FeatureMapKind::kHistogram;
  s.input_dim = boxes.empty() ? 0 : static_cast<int>(boxes.front().lo.size());
  s.bins = std::move(boxes);
  return s;
}

FeatureMapSpec FeatureMapSpec::rff(int d, int m, double sigma, std::uint64_t seed) {
  FeatureMapSpec s;
  s.kind = FeatureMapKind::kRff;
  s.input_dim = d;
  s.num_features = m;
  s.bandwidth = sigma;
  s.seed = seed;
  return s;
}

FeatureMapSpec FeatureMapSpec::fastfood(int d, int m, double sigma, std::uint64_t seed) {
  FeatureMapSpec s;
  s.kind = FeatureMapKind::kFastfood;
  s.input_dim = d;
  s.num_features = m;
  s.bandwidth = sigma;
  s.seed = seed;
  return s;
}

FeatureMap::FeatureMap(FeatureMapSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  output_dim_ = spec_.output_dim();
  switch (spec_.kind) {
    case FeatureMapKind::kIdentity:
    case FeatureMapKind::kHistogram:
      break;
    case FeatureMapKind::kRawMoments:
      moment_exponents_ = enumerate_monomials(spec_.input_dim, spec_.moment_order);
      break;
    case FeatureMapKind::kRff:
      build_rff();
      break;
    case FeatureMapKind::kFastfood:
      build_fastfood();
      break;
  }
}

void FeatureMap::build_rff() {
  Rng rng(derive_seed(spec_.seed, "rff-frequencies"));
  const int m = spec_.num_features;
  const int d = spec_.input_dim;
  frequencies_.resize(m, d);
  const double inv_sigma = 1.0 / spec_.bandwidth;
  for (int j = 0; j < m; ++j)
    for (int c = 0; c < d; ++c) frequencies_(j, c) = rng.normal() * inv_sigma;
}

void FeatureMap::build_fastfood() {
  padded_dim_ = next_power_of_two(spec_.input_dim);
  const int n_blocks = spec_.num_features / padded_dim_;
  blocks_.resize(static_cast<std::size_t>(n_blocks));
  for (int b = 0; b < n_blocks; ++b) {
    Rng rng(derive_seed(spec_.seed, "fastfood-block", static_cast<std::uint64_t>(b)));
    auto& blk = blocks_[static_cast<std::size_t>(b)];
    blk.sign.resize(padded_dim_);
    for (int i = 0; i < padded_dim_; ++i)
      blk.sign[i] = (rng.next_u64() & 1u) ? 1.0 : -1.0;
    blk.perm.resize(static_cast<std::size_t>(padded_dim_));
    std::iota(blk.perm.begin(), blk.perm.end(), 0);
    for (int i = padded_dim_ - 1; i > 0; --i) {
      const auto j = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(i + 1)));
      std::swap(blk.perm[static_cast<std::size_t>(i)], blk.perm[static_cast<std::size_t>(j)]);
    }
    blk.gauss.resize(padded_dim_);
    for (int i = 0; i < padded_dim_; ++i) blk.gauss[i] = rng.normal();
    const double gauss_norm = blk.gauss.norm();
    // Row norms are made chi-distributed, matching rows of a dense Gaussian
    // frequency matrix.
    blk.scale.resize(padded_dim_);
    for (int i = 0; i < padded_dim_; ++i)
      blk.scale[i] = std::sqrt(rng.chi_square(padded_dim_)) / gauss_norm;
  }
}

std::optional<double> FeatureMap::norm_bound() const {
  switch (spec_.kind) {
    case FeatureMapKind::kRff:
    case FeatureMapKind::kFastfood:
      return 1.0;
    case FeatureMapKind::kHistogram:
      return std::sqrt(static_cast<double>(spec_.bins.size()));
    case FeatureMapKind::kIdentity:
    case FeatureMapKind::kRawMoments:
      return std::nullopt;
  }
  return std::nullopt;
}

void walsh_hadamard_transform(Eigen::Ref<Eigen::VectorXd> v) {
  const auto n = v.size();
  for (long h = 1; h < n; h <<= 1) {
    for (long i = 0; i < n; i += h << 1) {
      for (long j = i; j < i + h; ++j) {
        const double a = v[j];
        const double b = v[j + h];
        v[j] = a + b;
        v[j + h] = a - b;
      }
    }
  }
}

void FeatureMap::fastfood_project(const Eigen::Ref<const Eigen::VectorXd>& x,
                                  Eigen::VectorXd& proj) const {
  const int dp = padded_dim_;
  proj.resize(static_cast<long>(blocks_.size()) * dp);
  Eigen::VectorXd v(dp);
  Eigen::VectorXd w(dp);
  const double scale = 1.0 / (spec_.bandwidth * std::sqrt(static_cast<double>(dp)));
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const auto& blk = blocks_[b];
    v.setZero();
    v.head(spec_.input_dim) = blk.sign.head(spec_.input_dim).cwiseProduct(x);
    walsh_hadamard_transform(v);
    for (int i = 0; i < dp; ++i) w[i] = v[blk.perm[static_cast<std::size_t>(i)]];
    w.array() *= blk.gauss.array();
    walsh_hadamard_transform(w);
    proj.segment(static_cast<long>(b) * dp, dp) = scale * blk.scale.cwiseProduct(w);
  }
}

void FeatureMap::embed(const Eigen::Ref<const Eigen::VectorXd>& x,
                       Eigen::Ref<Eigen::VectorXd> out) const {
  if (x.size() != spec_.input_dim)
    throw InputError("embed: expected dimension " + std::to_string(spec_.input_dim) +
                     ", got " + std::to_string(x.size()));
  if (out.size() != output_dim_) throw InputError("embed: bad output size");
  switch (spec_.kind) {
    case FeatureMapKind::kIdentity:
      out = x;
      return;
    case FeatureMapKind::kRawMoments: {
      for (int r = 0; r < moment_exponents_.rows(); ++r) {
        double p = 1.0;
        for (int c = 0; c < spec_.input_dim; ++c) {
          const int e = moment_exponents_(r, c);
          for (int q = 0; q < e; ++q) p *= x[c];
        }
        out[r] = p;
      }
      return;
    }
    case FeatureMapKind::kHistogram: {
      for (std::size_t i = 0; i < spec_.bins.size(); ++i) {
        const auto& b = spec_.bins[i];
        const bool inside = (x.array() >= b.lo.array()).all() &&
                            (x.array() < b.hi.array()).all();
        out[static_cast<long>(i)] = inside ? 1.0 : 0.0;
      }
      return;
    }
    case FeatureMapKind::kRff: {
      const int m = spec_.num_features;
      Eigen::VectorXd proj(m);
      proj.noalias() = frequencies_ * x;
      const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m));
      for (int j = 0; j < m; ++j) {
        out[2 * j] = std::cos(proj[j]) * inv_sqrt_m;
        out[2 * j + 1] = std::sin(proj[j]) * inv_sqrt_m;
      }
      return;
    }
    case FeatureMapKind::kFastfood: {
      const int m = spec_.num_features;
      Eigen::VectorXd proj;
      fastfood_project(x, proj);
      const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m));
      for (int j = 0; j < m; ++j) {
        out[2 * j] = std::cos(proj[j]) * inv_sqrt_m;
        out[2 * j + 1] = std::sin(proj[j]) * inv_sqrt_m;
      }
      return;
    }
  }
  throw ConfigError("unknown feature map kind");
}

Eigen::VectorXd FeatureMap::embed(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  Eigen::VectorXd out(output_dim_);
  embed(x, out);
  return out;
}

double FeatureMap::kernel_estimate(const Eigen::Ref<const Eigen::VectorXd>& x,
                                   const Eigen::Ref<const Eigen::VectorXd>& y) const {
  if (spec_.kind != FeatureMapKind::kRff && spec_.kind != FeatureMapKind::kFastfood)
    throw ConfigError("kernel_estimate: requires a kernel feature map (rff or fastfood)");
  // Re<psi(x), psi(y)> equals the plain dot product of the (cos, sin) packing.
  return embed(x).dot(embed(y));
}

Eigen::MatrixXd FeatureMap::frequency_matrix() const {
  if (spec_.kind == FeatureMapKind::kRff) return frequencies_;
  if (spec_.kind != FeatureMapKind::kFastfood)
    throw ConfigError("frequency_matrix: requires a kernel feature map");
  // Materializes the implicit Fastfood rows by projecting the basis vectors.
  const int d = spec_.input_dim;
  const int m = spec_.num_features;
  Eigen::MatrixXd freq(m, d);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd proj;
  for (int c = 0; c < d; ++c) {
    e[c] = 1.0;
    fastfood_project(e, proj);
    freq.col(c) = proj;
    e[c] = 0.0;
  }
  return freq;
}

FeatureMap FeatureMap::rff_from_frequencies(Eigen::MatrixXd frequencies) {
  if (frequencies.rows() < 1 || frequencies.cols() < 1)
    throw ConfigError("rff_from_frequencies: empty frequency matrix");
  FeatureMap map(FeatureMapSpec::rff(static_cast<int>(frequencies.cols()),
                                     static_cast<int>(frequencies.rows()), 1.0, 0));
  map.frequencies_ = std::move(frequencies);
  return map;
}

FeatureMap build_feature_map(const FeatureMapSpec& spec) { return FeatureMap(spec); }

double median_trick_bandwidth(const Eigen::Ref<const Eigen::MatrixXd>& samples,
                              std::uint64_t seed, int subsample_cap) {
  const long n = samples.cols();
  if (n < 2) throw ConfigError("median trick: needs at least two samples");
  std::vector<long> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  if (n > subsample_cap) {
    Rng rng(derive_seed(seed, "median-trick-subsample"));
    for (long i = 0; i < subsample_cap; ++i) {
      const auto j = i + static_cast<long>(rng.uniform_index(static_cast<std::uint64_t>(n - i)));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(subsample_cap));
  }
  const std::size_t k = idx.size();
  std::vector<double> dists;
  dists.reserve(k * (k - 1) / 2);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j)
      dists.push_back((samples.col(idx[i]) - samples.col(idx[j])).norm());
  std::sort(dists.begin(), dists.end());
  const std::size_t c = dists.size();
  const double median = (c % 2 == 1) ? dists[c / 2] : 0.5 * (dists[c / 2 - 1] + dists[c / 2]);
  if (!(median > 0.0))
    throw ConfigError("median trick: degenerate bandwidth (median pairwise distance is zero)");
  return median;
}

}  // namespace newma
