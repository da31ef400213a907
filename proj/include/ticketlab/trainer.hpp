#pragma once

#include <functional>

#include "ticketlab/model.hpp"

namespace ticketlab {

enum class PartitionMode {
  kReuseFull,     // every iteration uses the whole sample set
  kFreshSubsets,  // iteration t uses disjoint subset D_t; run length is the subset count
};

struct TrainConfig {
  double eta = 0.5;
  double beta = 0.2;
  int max_iters = 10000;
  double rel_change_tol = 1e-8;
  PartitionMode partition_mode = PartitionMode::kReuseFull;
  int subset_count = 1;  // T, used in fresh-subsets mode
  std::uint64_t seed = 0;

  void validate() const;
};

enum class StopReason { kConverged, kIterationCap, kDiverged };

struct TraceRecord {
  int iter = 0;
  double rel_error = -1.0;  // to aligned W* when the oracle is known, else -1
  double risk = 0.0;
  double rel_change = 0.0;
};

struct TrainTrace {
  std::vector<TraceRecord> records;
  Eigen::MatrixXd final_weights;
  StopReason reason = StopReason::kIterationCap;
  int iterations = 0;

  double final_rel_error() const { return records.empty() ? -1.0 : records.back().rel_error; }
};

struct TrialResult {
  bool success = false;
  double final_rel_error = 0.0;
  int iterations = 0;
  StopReason reason = StopReason::kIterationCap;
};

// Random point in the relative Frobenius ball of radius lambda around W*,
// supported on the learner mask. Direction uniform on the free-coordinate
// sphere, magnitude uniform in (0, lambda*||W*||_F). With an inaccurate
// learner mask the center is W* projected onto that mask.
WeightMatrix random_ball_init(const OracleNetwork& oracle, double lambda,
                              const MaskMatrix& learner_mask, std::uint64_t seed,
                              bool warn_on_inaccurate_mask = true);

// Optional in-training observer, called every `stride` iterations with the
// current iterate.
struct TrainMonitor {
  int stride = 10;
  std::function<void(int iter, const Eigen::MatrixXd& weights)> observe;
};

// Heavy-ball update with mask projection:
//   W_{t+1} = W_t - eta * M .* grad(W_t) + beta * (W_t - W_{t-1}),  W_{-1} = W_0.
TrainTrace agd_train(const SampleSet& data, const MaskMatrix& mask, const WeightMatrix& W0,
                     const TrainConfig& config,
                     const OracleNetwork* oracle_for_metrics = nullptr,
                     const TrainMonitor* monitor = nullptr);

// Geometric decay factor of the relative-error trajectory, estimated by a
// least-squares fit of log error against iteration over the segment above
// the noise floor.
double estimate_rate(const TrainTrace& trace, double noise_floor = 1e-3);

TrialResult run_trial(const OracleNetwork& oracle, int N, const MaskMatrix& learner_mask,
                      double lambda, const TrainConfig& config, double success_tol = 1e-4);

// Ordinary least squares y = a + b*x; returns {intercept, slope, r_squared}.
struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace ticketlab
