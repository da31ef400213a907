#pragma once

#include "ticketlab/pruning.hpp"
#include "ticketlab/rng.hpp"
#include "ticketlab/trainer.hpp"

namespace ticketlab {

// Deterministic parallel map: task i writes slot i, so the result is
// independent of the worker count.
void parallel_for(int n_tasks, int threads, const std::function<void(int)>& fn);

struct GridAxis {
  std::string name;
  std::vector<double> values;
};

struct TrialRecord {
  int cell_a = 0;
  int cell_b = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  bool success = false;
  double final_rel_error = 0.0;
  int iterations = 0;
  double rate = -1.0;  // convergence factor when estimated, else -1
};

struct CellAggregate {
  int cell_a = 0;
  int cell_b = 0;
  int trials = 0;
  double success_rate = 0.0;
  double mean_err = 0.0;
  double std_err = 0.0;
  double mean_rate = -1.0;  // -1 when no trial in the cell yielded a rate
  double mean_iters = 0.0;
};

struct GridResult {
  GridAxis axis_a;
  GridAxis axis_b;
  std::vector<TrialRecord> trials;
  std::vector<CellAggregate> cells;

  const CellAggregate& cell(int a, int b) const;
};

// Recomputes per-cell aggregates from the trial records.
std::vector<CellAggregate> aggregate_cells(const GridAxis& axis_a, const GridAxis& axis_b,
                                           const std::vector<TrialRecord>& trials);

struct GridBase {
  int trials_per_cell = 30;
  std::uint64_t master_seed = 1;
  int threads = 1;
  TrainConfig train;
  double lambda = 0.1;
  double success_tol = 1e-4;
};

// -- Success rate over (effective sparsity) x (initialization radius) -----

struct PhaseSpec {
  GridBase base;
  int d = 200;
  int K = 10;
  int N = 2000;
  std::vector<double> r_tilde_targets;  // per-neuron r_j drawn from [0.9 rt, 1.1 rt]
  std::vector<double> lambdas;
  OverlapMode overlap_mode = OverlapMode::kAlmostOverlapped;
};
GridResult radius_phase_diagram(const PhaseSpec& spec);

// Largest axis-b value (lambda) with success rate >= threshold, per axis-a
// cell; -1 when no cell qualifies.
std::vector<double> boundary_lambda_star(const GridResult& result, double threshold = 0.9);

// -- Convergence factor over (effective sparsity) x (momentum) ------------

struct RateSpec {
  GridBase base;
  int d = 300;
  int K = 10;
  int N = 5000;
  std::vector<double> r_tilde_targets;
  std::vector<double> betas;  // typically {0, 0.2}
  double rate_noise_floor = 1e-3;
};
GridResult rate_sweep(const RateSpec& spec);

// -- Success rate over (sample size) x (effective sparsity) ---------------

enum class SparsityAxisMode {
  kRTildeTarget,    // axis b lists r~ targets, supports almost overlapped
  kOverlapPattern,  // axis b indexes overlap modes at fixed r_j; r~ varies by architecture
};

struct SampleComplexitySpec {
  GridBase base;
  int d = 100;
  int K = 10;
  std::vector<double> sample_sizes;
  SparsityAxisMode mode = SparsityAxisMode::kRTildeTarget;
  std::vector<double> r_tilde_targets;
  OverlapMode overlap_mode = OverlapMode::kAlmostOverlapped;  // r~-target mode
  int fixed_r = 20;                   // used in overlap-pattern mode
  std::vector<OverlapMode> patterns;  // used in overlap-pattern mode
};
GridResult sample_complexity_diagram(const SampleComplexitySpec& spec);

// Smallest axis-a value (N) with success rate >= threshold, per axis-b
// cell; -1 when never reached.
std::vector<double> threshold_sample_size(const GridResult& result, double threshold = 0.9);

// -- Final error over (effective sparsity) x (noise level) ----------------

struct NoiseSpec {
  GridBase base;
  int d = 300;
  int K = 10;
  int N = 1000;
  std::vector<double> r_tilde_targets;
  std::vector<double> noise_levels;  // targets for sigma / E_y
  int reference_samples = 2000;      // for calibrating sigma from the target level
};
GridResult noise_sweep(const NoiseSpec& spec);

// -- GraSP masks: test error vs. mask accuracy / ratio / sample size ------

// How the (possibly inaccurate) student mask is produced per trial.
//  - kGrasp: gradient-signal-preservation scores after a short dense warmup.
//  - kControlled: per-trial target accuracy drawn uniformly from
//    [controlled_accuracy_lo, controlled_accuracy_hi]; each column keeps its
//    largest-magnitude generating weights up to that accuracy and fills the
//    remaining keep budget with random off-support coordinates. This models a
//    saliency-style pruner whose misses are the least important weights, and
//    reaches accuracy buckets the warmup-based scores cannot.
enum class MaskSource { kGrasp, kControlled };

struct InaccurateMaskSpec {
  GridBase base;
  int d = 100;
  int K = 5;
  int oracle_r = 20;
  std::vector<double> pruning_ratios;
  std::vector<int> sample_sizes;  // {200} reproduces the fixed-N study
  MaskSource mask_source = MaskSource::kGrasp;
  double controlled_accuracy_lo = 0.8;
  double controlled_accuracy_hi = 1.0;
  int warmup_iters = 20;
  int test_samples = 20000;
  double iteration_test_threshold = 1e-2;  // iterations-to-error tracking target
  int monitor_stride = 10;
  double accuracy_bucket_width = 0.05;
  int min_bucket_trials = 10;
};

struct MaskTrialRecord {
  int ratio_index = 0;
  int n_index = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  double pruning_ratio = 0.0;
  int sample_size = 0;
  double mask_accuracy = 0.0;
  double test_error = 0.0;
  int iterations = 0;
  int iters_to_threshold = -1;  // -1 when the threshold was never reached
};

struct MaskBucketAggregate {
  int ratio_index = 0;
  int n_index = 0;
  double bucket_lo = 0.0;  // mask-accuracy bucket [lo, lo + width)
  int trials = 0;
  double mean_test_error = 0.0;
  double mean_iters_to_threshold = -1.0;
};

struct InaccurateMaskResult {
  InaccurateMaskSpec spec;
  std::vector<MaskTrialRecord> trials;
  std::vector<MaskBucketAggregate> buckets;  // buckets under min_bucket_trials suppressed
};
InaccurateMaskResult inaccurate_mask_sweep(const InaccurateMaskSpec& spec);

std::vector<MaskBucketAggregate> bucket_mask_trials(const InaccurateMaskSpec& spec,
                                                    const std::vector<MaskTrialRecord>& trials);

// -- IMP: test error over (sample size) x (pruning round) -----------------

struct ImpSweepSpec {
  GridBase base;
  int d = 100;
  int K = 5;
  int oracle_r = 20;
  double noise_level_target = 1e-3;
  std::vector<int> sample_sizes;
  PruneSchedule schedule;
  int test_samples = 20000;
  int reference_samples = 2000;
};

struct ImpCell {
  int n_index = 0;
  int round = 0;
  double mean_pruning_ratio = 0.0;
  double mean_test_error = 0.0;
  int trials = 0;
};

struct ImpSweepResult {
  ImpSweepSpec spec;
  std::vector<ImpCell> cells;
};
ImpSweepResult imp_sweep(const ImpSweepSpec& spec);

// Per-neuron sparsities r_j ~ Uniform{[0.9 rt, 1.1 rt]} clipped to [1, d].
std::vector<int> sparsities_for_target(double r_tilde_target, int d, int K, Rng& rng);

}  // namespace ticketlab
