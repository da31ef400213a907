#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ticketlab {

// Binary d x K connectivity pattern; the pruning state of a network.
// Every column keeps at least one connection.
class MaskMatrix {
 public:
  explicit MaskMatrix(Eigen::ArrayXXd entries);

  static MaskMatrix full(int d, int K);

  int d() const { return static_cast<int>(entries_.rows()); }
  int K() const { return static_cast<int>(entries_.cols()); }
  const Eigen::ArrayXXd& entries() const { return entries_; }

  // Per-column connection counts r_j.
  const Eigen::VectorXi& column_counts() const { return counts_; }
  int r_min() const { return r_min_; }
  int r_max() const { return r_max_; }
  double r_ave() const { return r_ave_; }
  long ones_count() const { return ones_; }

  bool is_set(int i, int j) const { return entries_(i, j) != 0.0; }
  // True when columns j and k share at least one connected index.
  bool columns_overlap(int j, int k) const;

  // Indices of connected inputs for column j, ascending.
  std::vector<int> support(int j) const;

  bool operator==(const MaskMatrix& other) const { return (entries_ == other.entries_).all(); }

 private:
  Eigen::ArrayXXd entries_;
  Eigen::VectorXi counts_;
  int r_min_ = 0;
  int r_max_ = 0;
  double r_ave_ = 0.0;
  long ones_ = 0;
};

// Real d x K hidden-layer weights constrained to a mask's support.
class WeightMatrix {
 public:
  WeightMatrix(Eigen::MatrixXd values, MaskMatrix mask);

  // Zeroes out-of-support entries instead of rejecting them.
  static WeightMatrix projected(const Eigen::MatrixXd& values, const MaskMatrix& mask);

  int d() const { return mask_.d(); }
  int K() const { return mask_.K(); }
  const Eigen::MatrixXd& values() const { return values_; }
  const MaskMatrix& mask() const { return mask_; }

 private:
  Eigen::MatrixXd values_;
  MaskMatrix mask_;
};

// Ground-truth masked weights plus the label-noise level.
struct OracleNetwork {
  WeightMatrix weights;
  double noise_sigma = 0.0;

  OracleNetwork(WeightMatrix w, double sigma);
  const MaskMatrix& mask() const { return weights.mask(); }
};

// N input/label pairs; inputs stored row-wise (N x d).
struct SampleSet {
  Eigen::MatrixXd inputs;
  Eigen::VectorXd labels;

  SampleSet(Eigen::MatrixXd x, Eigen::VectorXd y);
  int size() const { return static_cast<int>(labels.size()); }
  int dim() const { return static_cast<int>(inputs.cols()); }
};

struct AlignmentResult {
  std::vector<int> permutation;  // learner column j matches oracle column permutation[j]
  double relative_error = 0.0;
};

enum class OverlapMode { kAlmostOverlapped, kDisjoint, kRandom };

OracleNetwork generate_oracle(int d, int K, const std::vector<int>& sparsities,
                              OverlapMode mode, std::uint64_t seed, double weight_scale = 0.5);

double forward(const WeightMatrix& weights, const Eigen::VectorXd& x);
// Batched forward over row-wise inputs.
Eigen::VectorXd forward_batch(const WeightMatrix& weights, const Eigen::MatrixXd& inputs);

SampleSet sample_dataset(const OracleNetwork& oracle, int N, std::uint64_t seed);

// sigma / RMS of the noiseless outputs on the reference inputs.
double noise_level(const OracleNetwork& oracle, const SampleSet& reference_samples);

// Overlap-weighted effective sparsity; bounded between r_ave/8 and r_ave.
double r_tilde(const MaskMatrix& mask);

double mask_accuracy(const MaskMatrix& learner_mask, const MaskMatrix& oracle_mask,
                     bool maximize_over_permutations = false);

// (1 - r_ave/d) * 100.
double pruning_ratio(const MaskMatrix& mask);

AlignmentResult align_permutation(const WeightMatrix& W, const WeightMatrix& W_star);

// Minimum-cost assignment on a square cost matrix; returns the column
// assigned to each row. O(n^3).
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

// Serialization (self-describing JSON container; masks also export as 0/1 CSV).
std::string oracle_to_json(const OracleNetwork& oracle);
OracleNetwork oracle_from_json(const std::string& json_text);
std::string samples_to_json(const SampleSet& samples);
SampleSet samples_from_json(const std::string& json_text);
std::string mask_to_csv(const MaskMatrix& mask);

}  // namespace ticketlab
