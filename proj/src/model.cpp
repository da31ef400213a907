#include "ticketlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "ticketlab/rng.hpp"

namespace ticketlab {

MaskMatrix::MaskMatrix(Eigen::ArrayXXd entries) : entries_(std::move(entries)) {
  if (entries_.rows() < 1 || entries_.cols() < 1) {
    throw std::invalid_argument("MaskMatrix: dimensions must be positive");
  }
  const int d = static_cast<int>(entries_.rows());
  const int K = static_cast<int>(entries_.cols());
  counts_.resize(K);
  for (int j = 0; j < K; ++j) {
    int c = 0;
    for (int i = 0; i < d; ++i) {
      const double v = entries_(i, j);
      if (v != 0.0 && v != 1.0) {
        throw std::invalid_argument("MaskMatrix: entries must be 0 or 1");
      }
      c += (v != 0.0);
    }
    if (c == 0) {
      throw std::invalid_argument("MaskMatrix: column " + std::to_string(j) +
                                  " has no connections");
    }
    counts_(j) = c;
    ones_ += c;
  }
  r_min_ = counts_.minCoeff();
  r_max_ = counts_.maxCoeff();
  r_ave_ = static_cast<double>(ones_) / K;
}

MaskMatrix MaskMatrix::full(int d, int K) {
  return MaskMatrix(Eigen::ArrayXXd::Ones(d, K));
}

bool MaskMatrix::columns_overlap(int j, int k) const {
  for (int i = 0; i < d(); ++i) {
    if (entries_(i, j) != 0.0 && entries_(i, k) != 0.0) return true;
  }
  return false;
}

std::vector<int> MaskMatrix::support(int j) const {
  std::vector<int> idx;
  idx.reserve(counts_(j));
  for (int i = 0; i < d(); ++i) {
    if (entries_(i, j) != 0.0) idx.push_back(i);
  }
  return idx;
}

WeightMatrix::WeightMatrix(Eigen::MatrixXd values, MaskMatrix mask)
    : values_(std::move(values)), mask_(std::move(mask)) {
  if (values_.rows() != mask_.d() || values_.cols() != mask_.K()) {
    throw std::invalid_argument("WeightMatrix: shape does not match mask");
  }
  for (int j = 0; j < mask_.K(); ++j) {
    for (int i = 0; i < mask_.d(); ++i) {
      if (!std::isfinite(values_(i, j))) {
        throw std::invalid_argument("WeightMatrix: non-finite entry");
      }
      if (values_(i, j) != 0.0 && !mask_.is_set(i, j)) {
        throw std::invalid_argument("WeightMatrix: nonzero entry outside mask support");
      }
    }
  }
}

WeightMatrix WeightMatrix::projected(const Eigen::MatrixXd& values, const MaskMatrix& mask) {
  Eigen::MatrixXd v = values.array() * mask.entries();
  return WeightMatrix(std::move(v), mask);
}

OracleNetwork::OracleNetwork(WeightMatrix w, double sigma)
    : weights(std::move(w)), noise_sigma(sigma) {
  if (!(noise_sigma >= 0.0)) {
    throw std::invalid_argument("OracleNetwork: noise_sigma must be >= 0");
  }
}

SampleSet::SampleSet(Eigen::MatrixXd x, Eigen::VectorXd y)
    : inputs(std::move(x)), labels(std::move(y)) {
  if (inputs.rows() != labels.size() || labels.size() < 1) {
    throw std::invalid_argument("SampleSet: inputs and labels must have equal positive count");
  }
  if (!inputs.allFinite() || !labels.allFinite()) {
    throw std::invalid_argument("SampleSet: non-finite value");
  }
}

namespace {

// Sum over ordered pairs of the delta overlap indicator, diagonal included.
long overlap_pair_count(const MaskMatrix& mask) {
  long s = 0;
  for (int j = 0; j < mask.K(); ++j) {
    for (int k = 0; k < mask.K(); ++k) {
      if (mask.columns_overlap(j, k)) ++s;
    }
  }
  return s;
}

Eigen::ArrayXXd sample_mask_entries(int d, int K, const std::vector<int>& sparsities,
                                    OverlapMode mode, Rng& rng) {
  Eigen::ArrayXXd m = Eigen::ArrayXXd::Zero(d, K);
  std::vector<int> pool(d);
  std::iota(pool.begin(), pool.end(), 0);

  auto fill_column = [&m](int j, const std::vector<int>& chosen, int count) {
    for (int t = 0; t < count; ++t) m(chosen[t], j) = 1.0;
  };
  auto shuffle_prefix = [&rng](std::vector<int>& v, int count) {
    const int n = static_cast<int>(v.size());
    for (int t = 0; t < count; ++t) {
      std::swap(v[t], v[t + rng.uniform_int(n - t)]);
    }
  };

  switch (mode) {
    case OverlapMode::kRandom:
      for (int j = 0; j < K; ++j) {
        shuffle_prefix(pool, sparsities[j]);
        fill_column(j, pool, sparsities[j]);
      }
      break;
    case OverlapMode::kDisjoint: {
      shuffle_prefix(pool, d);
      int cursor = 0;
      for (int j = 0; j < K; ++j) {
        for (int t = 0; t < sparsities[j]; ++t) m(pool[cursor++], j) = 1.0;
      }
      break;
    }
    case OverlapMode::kAlmostOverlapped: {
      // All columns draw from a shared base pool slightly larger than the
      // widest column, which forces pairwise support overlap.
      const int r_max = *std::max_element(sparsities.begin(), sparsities.end());
      const int r_min = *std::min_element(sparsities.begin(), sparsities.end());
      const int slack = std::max(1, std::min({d - r_max, r_min - 1, r_max / 4}));
      const int base = std::min(d, r_max + slack);
      shuffle_prefix(pool, base);
      std::vector<int> base_pool(pool.begin(), pool.begin() + base);
      for (int j = 0; j < K; ++j) {
        shuffle_prefix(base_pool, sparsities[j]);
        fill_column(j, base_pool, sparsities[j]);
      }
      break;
    }
  }
  return m;
}

}  // namespace

OracleNetwork generate_oracle(int d, int K, const std::vector<int>& sparsities,
                              OverlapMode mode, std::uint64_t seed, double weight_scale) {
  if (d < 1 || K < 1) throw std::invalid_argument("generate_oracle: d and K must be positive");
  if (static_cast<int>(sparsities.size()) != K) {
    throw std::invalid_argument("generate_oracle: need exactly K sparsities");
  }
  long total = 0;
  for (int r : sparsities) {
    if (r < 1 || r > d) {
      throw std::invalid_argument("generate_oracle: each sparsity must lie in [1, d]");
    }
    total += r;
  }
  if (mode == OverlapMode::kDisjoint && total > d) {
    throw std::invalid_argument("generate_oracle: disjoint mode needs sum of sparsities <= d");
  }

  Rng rng(seed);
  Eigen::ArrayXXd entries;
  if (mode == OverlapMode::kAlmostOverlapped) {
    const int max_tries = 64;
    bool ok = false;
    for (int attempt = 0; attempt < max_tries && !ok; ++attempt) {
      entries = sample_mask_entries(d, K, sparsities, mode, rng);
      ok = overlap_pair_count(MaskMatrix(entries)) >
           static_cast<long>(0.95 * static_cast<double>(K) * K);
    }
    if (!ok) {
      throw std::runtime_error(
          "generate_oracle: could not realize almost-overlapped supports "
          "(overlap pair count stayed <= 0.95*K^2)");
    }
  } else {
    entries = sample_mask_entries(d, K, sparsities, mode, rng);
  }
  MaskMatrix mask(entries);

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d, K);
  for (int j = 0; j < K; ++j) {
    for (int i = 0; i < d; ++i) {
      if (mask.is_set(i, j)) w(i, j) = rng.uniform(-weight_scale, weight_scale);
    }
  }
  return OracleNetwork(WeightMatrix(std::move(w), std::move(mask)), 0.0);
}

double forward(const WeightMatrix& weights, const Eigen::VectorXd& x) {
  if (x.size() != weights.d()) throw std::invalid_argument("forward: dimension mismatch");
  const Eigen::VectorXd z = weights.values().transpose() * x;
  return z.array().max(0.0).sum() / weights.K();
}

Eigen::VectorXd forward_batch(const WeightMatrix& weights, const Eigen::MatrixXd& inputs) {
  if (inputs.cols() != weights.d()) {
    throw std::invalid_argument("forward_batch: dimension mismatch");
  }
  const Eigen::MatrixXd z = inputs * weights.values();  // N x K
  return z.array().max(0.0).rowwise().sum() / weights.K();
}

SampleSet sample_dataset(const OracleNetwork& oracle, int N, std::uint64_t seed) {
  if (N < 1) throw std::invalid_argument("sample_dataset: N must be positive");
  const int d = oracle.weights.d();
  Rng rng(seed);
  Eigen::MatrixXd x(N, d);
  Eigen::VectorXd noise(N);
  for (int n = 0; n < N; ++n) {
    for (int i = 0; i < d; ++i) x(n, i) = rng.gaussian();
    noise(n) = oracle.noise_sigma > 0.0 ? oracle.noise_sigma * rng.gaussian() : 0.0;
  }
  Eigen::VectorXd y = forward_batch(oracle.weights, x) + noise;
  return SampleSet(std::move(x), std::move(y));
}

double noise_level(const OracleNetwork& oracle, const SampleSet& reference_samples) {
  const Eigen::VectorXd clean = forward_batch(oracle.weights, reference_samples.inputs);
  const double ms = clean.squaredNorm() / clean.size();
  if (ms == 0.0) {
    throw std::domain_error("noise_level: noiseless outputs are all zero, ratio undefined");
  }
  return oracle.noise_sigma / std::sqrt(ms);
}

double r_tilde(const MaskMatrix& mask) {
  const int K = mask.K();
  const Eigen::VectorXi& r = mask.column_counts();
  double s = 0.0;
  for (int k = 0; k < K; ++k) {
    for (int j = 0; j < K; ++j) {
      const double delta = mask.columns_overlap(j, k) ? 1.0 : 0.0;
      s += (1.0 + delta) * std::sqrt(static_cast<double>(r(j) + r(k)));
    }
  }
  const double K4 = static_cast<double>(K) * K * K * K;
  return s * s / (8.0 * K4);
}

double mask_accuracy(const MaskMatrix& learner_mask, const MaskMatrix& oracle_mask,
                     bool maximize_over_permutations) {
  if (learner_mask.d() != oracle_mask.d() || learner_mask.K() != oracle_mask.K()) {
    throw std::invalid_argument("mask_accuracy: shape mismatch");
  }
  const long denom = oracle_mask.ones_count();
  if (denom == 0) throw std::invalid_argument("mask_accuracy: oracle mask is all-zero");
  const int K = learner_mask.K();

  auto column_overlap = [&](int lj, int oj) {
    double c = 0.0;
    for (int i = 0; i < learner_mask.d(); ++i) {
      if (learner_mask.is_set(i, lj) && oracle_mask.is_set(i, oj)) c += 1.0;
    }
    return c;
  };

  if (!maximize_over_permutations) {
    double hits = 0.0;
    for (int j = 0; j < K; ++j) hits += column_overlap(j, j);
    return hits / denom;
  }
  Eigen::MatrixXd cost(K, K);
  for (int lj = 0; lj < K; ++lj) {
    for (int oj = 0; oj < K; ++oj) cost(lj, oj) = -column_overlap(lj, oj);
  }
  const std::vector<int> perm = solve_assignment(cost);
  double hits = 0.0;
  for (int j = 0; j < K; ++j) hits += column_overlap(j, perm[j]);
  return hits / denom;
}

double pruning_ratio(const MaskMatrix& mask) {
  return (1.0 - mask.r_ave() / mask.d()) * 100.0;
}

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  // Jonker-Volgenant style shortest augmenting path.
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n || n < 1) throw std::invalid_argument("solve_assignment: square matrix required");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, n), way(n + 1, 0);
  for (int i = 0; i < n; ++i) {
    p[n] = i;
    int j0 = n;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = -1;
      for (int j = 0; j < n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != n);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != n);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 0; j < n; ++j) {
    if (p[j] != n) row_to_col[p[j]] = j;
  }
  return row_to_col;
}

AlignmentResult align_permutation(const WeightMatrix& W, const WeightMatrix& W_star) {
  if (W.d() != W_star.d() || W.K() != W_star.K()) {
    throw std::invalid_argument("align_permutation: shape mismatch");
  }
  const double star_norm = W_star.values().norm();
  if (star_norm == 0.0) throw std::domain_error("align_permutation: reference weights are zero");
  const int K = W.K();
  Eigen::MatrixXd cost(K, K);
  for (int a = 0; a < K; ++a) {
    for (int b = 0; b < K; ++b) {
      cost(a, b) = (W.values().col(a) - W_star.values().col(b)).squaredNorm();
    }
  }
  AlignmentResult res;
  res.permutation = solve_assignment(cost);
  double total = 0.0;
  for (int a = 0; a < K; ++a) total += cost(a, res.permutation[a]);
  res.relative_error = std::sqrt(std::max(0.0, total)) / star_norm;
  return res;
}

std::string oracle_to_json(const OracleNetwork& oracle) {
  nlohmann::json j;
  const MaskMatrix& mask = oracle.mask();
  j["type"] = "oracle_network";
  j["d"] = mask.d();
  j["K"] = mask.K();
  j["sparsities"] = std::vector<int>(mask.column_counts().data(),
                                     mask.column_counts().data() + mask.K());
  j["noise_sigma"] = oracle.noise_sigma;
  std::vector<double> m, w;
  m.reserve(static_cast<size_t>(mask.d()) * mask.K());
  w.reserve(m.capacity());
  for (int jj = 0; jj < mask.K(); ++jj) {
    for (int i = 0; i < mask.d(); ++i) {
      m.push_back(mask.entries()(i, jj));
      w.push_back(oracle.weights.values()(i, jj));
    }
  }
  j["mask"] = m;
  j["weights"] = w;
  return j.dump(2);
}

OracleNetwork oracle_from_json(const std::string& json_text) {
  const nlohmann::json j = nlohmann::json::parse(json_text);
  const int d = j.at("d").get<int>();
  const int K = j.at("K").get<int>();
  const auto m = j.at("mask").get<std::vector<double>>();
  const auto w = j.at("weights").get<std::vector<double>>();
  if (static_cast<int>(m.size()) != d * K || static_cast<int>(w.size()) != d * K) {
    throw std::invalid_argument("oracle_from_json: flattened sizes do not match d*K");
  }
  Eigen::ArrayXXd mask(d, K);
  Eigen::MatrixXd weights(d, K);
  size_t idx = 0;
  for (int jj = 0; jj < K; ++jj) {
    for (int i = 0; i < d; ++i, ++idx) {
      mask(i, jj) = m[idx];
      weights(i, jj) = w[idx];
    }
  }
  return OracleNetwork(WeightMatrix(std::move(weights), MaskMatrix(std::move(mask))),
                       j.at("noise_sigma").get<double>());
}

std::string samples_to_json(const SampleSet& samples) {
  nlohmann::json j;
  j["type"] = "sample_set";
  j["N"] = samples.size();
  j["d"] = samples.dim();
  std::vector<double> x;
  x.reserve(static_cast<size_t>(samples.size()) * samples.dim());
  for (int n = 0; n < samples.size(); ++n) {
    for (int i = 0; i < samples.dim(); ++i) x.push_back(samples.inputs(n, i));
  }
  j["inputs"] = x;
  j["labels"] = std::vector<double>(samples.labels.data(),
                                    samples.labels.data() + samples.size());
  return j.dump();
}

SampleSet samples_from_json(const std::string& json_text) {
  const nlohmann::json j = nlohmann::json::parse(json_text);
  const int N = j.at("N").get<int>();
  const int d = j.at("d").get<int>();
  const auto x = j.at("inputs").get<std::vector<double>>();
  const auto y = j.at("labels").get<std::vector<double>>();
  if (static_cast<int>(x.size()) != N * d || static_cast<int>(y.size()) != N) {
    throw std::invalid_argument("samples_from_json: flattened sizes inconsistent");
  }
  Eigen::MatrixXd inputs(N, d);
  size_t idx = 0;
  for (int n = 0; n < N; ++n) {
    for (int i = 0; i < d; ++i, ++idx) inputs(n, i) = x[idx];
  }
  Eigen::VectorXd labels = Eigen::Map<const Eigen::VectorXd>(y.data(), N);
  return SampleSet(std::move(inputs), std::move(labels));
}

std::string mask_to_csv(const MaskMatrix& mask) {
  std::string out;
  for (int i = 0; i < mask.d(); ++i) {
    for (int j = 0; j < mask.K(); ++j) {
      out += mask.is_set(i, j) ? '1' : '0';
      out += (j + 1 < mask.K()) ? ',' : '\n';
    }
  }
  return out;
}

}  // namespace ticketlab
