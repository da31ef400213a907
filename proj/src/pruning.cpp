#include "ticketlab/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "ticketlab/risk.hpp"
#include "ticketlab/rng.hpp"

namespace ticketlab {

void PruneSchedule::validate() const {
  if (rounds < 0) throw std::invalid_argument("PruneSchedule: rounds must be >= 0");
  if (rounds > 0 && !(per_round_fraction > 0.0 && per_round_fraction < 1.0)) {
    throw std::invalid_argument("PruneSchedule: per_round_fraction must lie in (0,1)");
  }
}

MaskMatrix magnitude_prune(const WeightMatrix& W, const std::vector<int>& keep_per_neuron) {
  const int d = W.d();
  const int K = W.K();
  if (static_cast<int>(keep_per_neuron.size()) != K) {
    throw std::invalid_argument("magnitude_prune: need exactly K keep counts");
  }
  Eigen::ArrayXXd mask = Eigen::ArrayXXd::Zero(d, K);
  std::vector<int> order(d);
  for (int j = 0; j < K; ++j) {
    const int keep = keep_per_neuron[j];
    if (keep < 1 || keep > d) {
      throw std::invalid_argument("magnitude_prune: keep count for neuron " + std::to_string(j) +
                                  " must lie in [1, d]");
    }
    for (int i = 0; i < d; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return std::abs(W.values()(a, j)) > std::abs(W.values()(b, j));
    });
    for (int t = 0; t < keep; ++t) mask(order[t], j) = 1.0;
  }
  return MaskMatrix(std::move(mask));
}

Eigen::MatrixXd hessian_vector_product(const WeightMatrix& W, const SampleSet& data,
                                       const Eigen::MatrixXd& v) {
  const double v_norm = v.norm();
  if (v_norm == 0.0) return Eigen::MatrixXd::Zero(W.d(), W.K());
  const double w_scale = std::max(W.values().norm(), 1.0);
  const double h = 1e-6 * w_scale / v_norm;
  const WeightMatrix forward_point =
      WeightMatrix::projected(W.values() + h * v, W.mask());
  const Eigen::MatrixXd g0 = masked_gradient(W, data).values();
  const Eigen::MatrixXd g1 = masked_gradient(forward_point, data).values();
  return (g1 - g0) / h;
}

namespace {

// Global top-count selection of scored coordinates with a per-neuron floor
// of one kept weight. Candidate coordinates are the ones of `support`.
MaskMatrix select_top_global(const Eigen::MatrixXd& scores, const MaskMatrix& support,
                             long keep_total) {
  const int d = support.d();
  const int K = support.K();
  keep_total = std::max<long>(keep_total, K);
  keep_total = std::min<long>(keep_total, support.ones_count());

  struct Entry {
    double score;
    int i, j;
  };
  std::vector<Entry> entries;
  entries.reserve(support.ones_count());
  for (int j = 0; j < K; ++j) {
    for (int i = 0; i < d; ++i) {
      if (support.is_set(i, j)) entries.push_back({scores(i, j), i, j});
    }
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.j != b.j) return a.j < b.j;
    return a.i < b.i;
  });

  // First pass: best coordinate of each neuron, so no column goes empty.
  Eigen::ArrayXXd mask = Eigen::ArrayXXd::Zero(d, K);
  std::vector<char> column_seeded(K, 0);
  long kept = 0;
  for (const Entry& e : entries) {
    if (!column_seeded[e.j]) {
      column_seeded[e.j] = 1;
      mask(e.i, e.j) = 1.0;
      ++kept;
    }
  }
  for (const Entry& e : entries) {
    if (kept >= keep_total) break;
    if (mask(e.i, e.j) == 0.0) {
      mask(e.i, e.j) = 1.0;
      ++kept;
    }
  }
  return MaskMatrix(std::move(mask));
}

}  // namespace

GraspResult grasp_prune(const SampleSet& data, const MaskMatrix& mask_full,
                        const TrainConfig& warmup, double target_ratio, std::uint64_t seed) {
  if (!(target_ratio >= 0.0 && target_ratio < 100.0)) {
    throw std::invalid_argument("grasp_prune: target_ratio must lie in [0, 100)");
  }
  const int d = mask_full.d();
  const int K = mask_full.K();

  Rng rng(seed);
  // Kaiming-uniform warmup init: a large init drowns the label signal in the
  // early gradient (the warmup net's own output dominates the residual), which
  // destroys the saliency scores' correlation with the generating support.
  const double init_bound = std::sqrt(6.0 / static_cast<double>(d));
  Eigen::MatrixXd w0 = Eigen::MatrixXd::Zero(d, K);
  for (int j = 0; j < K; ++j) {
    for (int i : mask_full.support(j)) w0(i, j) = rng.uniform(-init_bound, init_bound);
  }
  TrainConfig cfg = warmup;
  cfg.seed = derive_seed(seed, 0xa6d);
  const TrainTrace warm =
      agd_train(data, mask_full, WeightMatrix::projected(w0, mask_full), cfg, nullptr);
  const WeightMatrix warm_w = WeightMatrix::projected(warm.final_weights, mask_full);

  const long keep_total =
      std::lround((1.0 - target_ratio / 100.0) * static_cast<double>(mask_full.ones_count()));

  const Eigen::MatrixXd g = masked_gradient(warm_w, data).values();
  GraspResult res{mask_full, false};
  if (g.norm() == 0.0) {
    std::cerr << "grasp_prune: degenerate gradient after warmup, "
                 "falling back to magnitude scoring\n";
    res.magnitude_fallback = true;
    res.mask = select_top_global(warm_w.values().cwiseAbs(), mask_full, keep_total);
    return res;
  }
  const Eigen::MatrixXd hg = hessian_vector_product(warm_w, data, g);
  const Eigen::MatrixXd scores = -(warm_w.values().array() * hg.array()).matrix();
  res.mask = select_top_global(scores, mask_full, keep_total);
  return res;
}

double test_error(const WeightMatrix& W, const OracleNetwork& oracle, int N_test,
                  std::uint64_t seed, bool noisy) {
  if (N_test < 1) throw std::invalid_argument("test_error: N_test must be positive");
  OracleNetwork source(oracle.weights, noisy ? oracle.noise_sigma : 0.0);
  const SampleSet test = sample_dataset(source, N_test, seed);
  const Eigen::VectorXd pred = forward_batch(W, test.inputs);
  return std::sqrt((pred - test.labels).squaredNorm() / N_test);
}

std::vector<PrunedRunRecord> imp(const SampleSet& data, const PruneSchedule& schedule,
                                 const TrainConfig& config, const WeightMatrix& W_init,
                                 const OracleNetwork* oracle_for_metrics,
                                 const ImpOptions& options) {
  schedule.validate();
  config.validate();

  std::vector<PrunedRunRecord> records;
  MaskMatrix mask = W_init.mask();
  Eigen::MatrixXd w = W_init.values();

  for (int round = 0; round <= schedule.rounds; ++round) {
    const WeightMatrix start = WeightMatrix::projected(w, mask);
    const TrainTrace trace = agd_train(data, mask, start, config, oracle_for_metrics);
    const WeightMatrix trained = WeightMatrix::projected(trace.final_weights, mask);

    PrunedRunRecord rec{round, mask, pruning_ratio(mask), -1.0, -1.0, trace.iterations, ""};
    if (oracle_for_metrics != nullptr) {
      rec.mask_accuracy = mask_accuracy(mask, oracle_for_metrics->mask());
      rec.test_error = test_error(trained, *oracle_for_metrics, options.test_samples,
                                  options.test_seed, options.noisy_test);
    }
    records.push_back(std::move(rec));
    if (round == schedule.rounds) break;

    // Remove per_round_fraction of the surviving weights, smallest
    // magnitude first across the whole layer; keep-floor of 1 per neuron.
    const long survivors = mask.ones_count();
    const long keep_total =
        survivors - std::lround(schedule.per_round_fraction * static_cast<double>(survivors));
    if (keep_total <= mask.K()) {
      records.back().stop_note = "mask floor reached, schedule stopped early";
      break;
    }
    mask = select_top_global(trained.values().cwiseAbs(), mask, keep_total);

    if (schedule.rewind == RewindMode::kToInit) {
      w = (W_init.values().array() * mask.entries()).matrix();
    } else {
      w = (trained.values().array() * mask.entries()).matrix();
    }
  }
  return records;
}

}  // namespace ticketlab
