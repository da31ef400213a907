#include <cmath>

#include "doctest.h"
#include "ticketlab/pruning.hpp"
#include "ticketlab/risk.hpp"
#include "ticketlab/rng.hpp"

namespace tl = ticketlab;
using Eigen::ArrayXXd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_SUITE("pruning") {

TEST_CASE("prune schedule validation") {
  tl::PruneSchedule s;
  CHECK_NOTHROW(s.validate());
  s.per_round_fraction = 0.0;
  CHECK_THROWS(s.validate());
  s.per_round_fraction = 1.0;
  CHECK_THROWS(s.validate());
  s.per_round_fraction = 0.2;
  s.rounds = -1;
  CHECK_THROWS(s.validate());
}

TEST_CASE("magnitude_prune order statistics and keep-all") {
  MatrixXd v(3, 1);
  v << 0.9, -0.1, 0.5;
  const tl::WeightMatrix w(v, tl::MaskMatrix::full(3, 1));
  const tl::MaskMatrix kept = tl::magnitude_prune(w, {2});
  CHECK(kept.is_set(0, 0));
  CHECK_FALSE(kept.is_set(1, 0));
  CHECK(kept.is_set(2, 0));

  const tl::MaskMatrix all = tl::magnitude_prune(w, {3});
  CHECK(all == tl::MaskMatrix::full(3, 1));

  // ties break to the lowest index
  MatrixXd t(3, 1);
  t << 0.5, 0.5, 0.5;
  const tl::MaskMatrix tie = tl::magnitude_prune(tl::WeightMatrix(t, tl::MaskMatrix::full(3, 1)), {2});
  CHECK(tie.is_set(0, 0));
  CHECK(tie.is_set(1, 0));
  CHECK_FALSE(tie.is_set(2, 0));
}

TEST_CASE("magnitude pruning of a well-trained model recovers the oracle mask") {
  tl::OracleNetwork o =
      tl::generate_oracle(30, 3, {6, 6, 6}, tl::OverlapMode::kAlmostOverlapped, 64);
  o.noise_sigma = 0.0;
  const tl::SampleSet data = tl::sample_dataset(o, 2000, 13);
  const tl::WeightMatrix w0 = tl::random_ball_init(o, 0.1, tl::MaskMatrix::full(30, 3),
                                                   14, /*warn=*/false);
  tl::TrainConfig cfg;
  cfg.max_iters = 3000;
  const tl::TrainTrace trace = tl::agd_train(data, tl::MaskMatrix::full(30, 3), w0, cfg, &o);
  const tl::WeightMatrix trained(trace.final_weights, tl::MaskMatrix::full(30, 3));
  const tl::MaskMatrix pruned = tl::magnitude_prune(trained, {6, 6, 6});
  CHECK(tl::mask_accuracy(pruned, o.mask(), true) == doctest::Approx(1.0));
}

TEST_CASE("hessian_vector_product matches the dense hessian") {
  const tl::OracleNetwork o = tl::generate_oracle(12, 2, {5, 6}, tl::OverlapMode::kRandom, 81);
  const tl::SampleSet data = tl::sample_dataset(o, 200, 15);
  tl::Rng rng(3);
  MatrixXd v = MatrixXd::Zero(12, 2);
  for (int j = 0; j < 2; ++j)
    for (int i : o.mask().support(j)) v(i, j) = rng.gaussian();

  const MatrixXd hv = tl::hessian_vector_product(o.weights, data, v);
  const MatrixXd H = tl::hessian(o.weights, data);
  // flatten v in the hessian's column-major free-coordinate order
  std::vector<double> flat;
  for (int j = 0; j < 2; ++j)
    for (int i : o.mask().support(j)) flat.push_back(v(i, j));
  Eigen::Map<const VectorXd> vf(flat.data(), static_cast<long>(flat.size()));
  const VectorXd dense = H * vf;
  int b = 0;
  for (int j = 0; j < 2; ++j)
    for (int i : o.mask().support(j)) {
      CHECK(std::abs(hv(i, j) - dense(b)) < 1e-4 * std::max(1.0, dense.cwiseAbs().maxCoeff()));
      ++b;
    }
}

TEST_CASE("grasp: target ratio zero keeps the full mask") {
  const tl::OracleNetwork o = tl::generate_oracle(20, 2, {5, 5}, tl::OverlapMode::kRandom, 29);
  const tl::SampleSet data = tl::sample_dataset(o, 200, 16);
  tl::TrainConfig warmup;
  warmup.max_iters = 20;
  const tl::GraspResult res = tl::grasp_prune(data, tl::MaskMatrix::full(20, 2), warmup, 0.0, 5);
  CHECK(res.mask == tl::MaskMatrix::full(20, 2));
}

TEST_CASE("grasp meets the pruning target and keeps every neuron connected") {
  const tl::OracleNetwork o =
      tl::generate_oracle(40, 3, {8, 8, 8}, tl::OverlapMode::kAlmostOverlapped, 37);
  const tl::SampleSet data = tl::sample_dataset(o, 200, 17);
  tl::TrainConfig warmup;
  warmup.max_iters = 20;
  const double ratio = 70.0;
  const tl::GraspResult res = tl::grasp_prune(data, tl::MaskMatrix::full(40, 3), warmup, ratio, 6);
  CHECK(tl::pruning_ratio(res.mask) == doctest::Approx(ratio).epsilon(0.03));
  CHECK(res.mask.r_min() >= 1);
}

TEST_CASE("test_error: zero at the noiseless oracle, ~sigma at the noisy one") {
  tl::OracleNetwork o = tl::generate_oracle(15, 2, {5, 5}, tl::OverlapMode::kRandom, 58);
  o.noise_sigma = 0.0;
  CHECK(tl::test_error(o.weights, o, 5000, 21) == doctest::Approx(0.0).epsilon(1e-12));
  const double sigma = 0.2;
  o.noise_sigma = sigma;
  const int n_test = 20000;
  const double err = tl::test_error(o.weights, o, n_test, 22);
  CHECK(std::abs(err - sigma) < 3.0 * sigma / std::sqrt(n_test));
  // noiseless evaluation of a noisy oracle still scores the weights themselves
  CHECK(tl::test_error(o.weights, o, 5000, 23, /*noisy=*/false) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("imp: rounds=0 yields the single full-mask record") {
  tl::OracleNetwork o = tl::generate_oracle(12, 2, {4, 4}, tl::OverlapMode::kRandom, 70);
  o.noise_sigma = 0.0;
  const tl::SampleSet data = tl::sample_dataset(o, 300, 19);
  const tl::MaskMatrix full = tl::MaskMatrix::full(12, 2);
  const tl::WeightMatrix w0 = tl::random_ball_init(o, 0.2, full, 20, false);
  tl::PruneSchedule schedule;
  schedule.rounds = 0;
  tl::TrainConfig cfg;
  cfg.max_iters = 500;
  const auto records = tl::imp(data, schedule, cfg, w0, &o);
  REQUIRE(records.size() == 1);
  CHECK(records[0].mask == full);
  CHECK(records[0].pruning_ratio == doctest::Approx(0.0));
}

TEST_CASE("imp: ratios nondecreasing, masks nested, never revives weights") {
  tl::OracleNetwork o =
      tl::generate_oracle(20, 2, {6, 6}, tl::OverlapMode::kAlmostOverlapped, 73);
  o.noise_sigma = 0.0;
  const tl::SampleSet data = tl::sample_dataset(o, 500, 24);
  const tl::MaskMatrix full = tl::MaskMatrix::full(20, 2);
  const tl::WeightMatrix w0 = tl::random_ball_init(o, 0.2, full, 25, false);
  tl::PruneSchedule schedule;
  schedule.rounds = 6;
  schedule.per_round_fraction = 0.3;
  tl::TrainConfig cfg;
  cfg.max_iters = 800;
  const auto records = tl::imp(data, schedule, cfg, w0, &o);
  REQUIRE(records.size() >= 2);
  for (size_t r = 1; r < records.size(); ++r) {
    CHECK(records[r].pruning_ratio >= records[r - 1].pruning_ratio);
    // nested supports: later mask is a subset of the earlier one
    const ArrayXXd diff = records[r].mask.entries() - records[r - 1].mask.entries();
    CHECK(diff.maxCoeff() <= 0.0);
  }
  for (const auto& rec : records) {
    CHECK(rec.mask.r_min() >= 1);
    CHECK(rec.test_error >= 0.0);
    CHECK(rec.mask_accuracy >= 0.0);
  }
}

}  // TEST_SUITE
