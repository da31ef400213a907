#pragma once

#include "ticketlab/model.hpp"
#include "ticketlab/trainer.hpp"

namespace ticketlab {

enum class RewindMode { kToInit, kNone };

struct PruneSchedule {
  int rounds = 10;
  double per_round_fraction = 0.2;  // fraction of surviving weights removed each round
  RewindMode rewind = RewindMode::kToInit;

  void validate() const;
};

struct PrunedRunRecord {
  int round = 0;
  MaskMatrix mask;
  double pruning_ratio = 0.0;
  double mask_accuracy = -1.0;  // vs. oracle, -1 when no oracle given
  double test_error = -1.0;
  int train_iterations = 0;
  std::string stop_note;  // set when the schedule ends early
};

struct GraspResult {
  MaskMatrix mask;
  bool magnitude_fallback = false;  // gradient was degenerate after warmup
};

// Keeps the keep_per_neuron[j] largest-magnitude coordinates of each
// column; ties go to the lowest index.
MaskMatrix magnitude_prune(const WeightMatrix& W, const std::vector<int>& keep_per_neuron);

// Gradient-signal-preservation scoring after a short warmup: score
// s = -w .* (H g) at the early-trained weights, keep the top-scored
// weights globally to meet target_ratio. Every neuron keeps at least one
// weight.
GraspResult grasp_prune(const SampleSet& data, const MaskMatrix& mask_full,
                        const TrainConfig& warmup, double target_ratio, std::uint64_t seed);

// Hessian-vector product by forward-differencing masked_gradient along v.
Eigen::MatrixXd hessian_vector_product(const WeightMatrix& W, const SampleSet& data,
                                       const Eigen::MatrixXd& v);

struct ImpOptions {
  int test_samples = 20000;
  std::uint64_t test_seed = 0;
  bool noisy_test = true;
};

// Iterative magnitude pruning: train to termination, remove the smallest
// surviving weights globally, rewind, repeat. Masks are nested across
// rounds.
std::vector<PrunedRunRecord> imp(const SampleSet& data, const PruneSchedule& schedule,
                                 const TrainConfig& config, const WeightMatrix& W_init,
                                 const OracleNetwork* oracle_for_metrics,
                                 const ImpOptions& options = {});

// RMS prediction error on fresh samples drawn from the oracle.
double test_error(const WeightMatrix& W, const OracleNetwork& oracle, int N_test,
                  std::uint64_t seed, bool noisy = true);

}  // namespace ticketlab
