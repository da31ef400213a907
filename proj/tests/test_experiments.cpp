#include <atomic>
#include <cmath>

#include "doctest.h"
#include "ticketlab/experiments.hpp"

namespace tl = ticketlab;

namespace {

// Small but nontrivial phase grid used by several determinism checks.
tl::PhaseSpec small_phase_spec() {
  tl::PhaseSpec spec;
  spec.d = 40;
  spec.K = 3;
  spec.N = 400;
  spec.r_tilde_targets = {6, 12};
  spec.lambdas = {0.01, 0.4};
  spec.base.trials_per_cell = 4;
  spec.base.master_seed = 11;
  spec.base.train.max_iters = 3000;
  return spec;
}

bool same_trials(const std::vector<tl::TrialRecord>& a, const std::vector<tl::TrialRecord>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].seed != b[i].seed || a[i].success != b[i].success ||
        a[i].final_rel_error != b[i].final_rel_error || a[i].iterations != b[i].iterations ||
        a[i].rate != b[i].rate) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("parallel_for is a deterministic map") {
  std::vector<int> out(100, -1);
  std::atomic<int> calls{0};
  tl::parallel_for(100, 4, [&](int i) {
    out[i] = i * i;
    ++calls;
  });
  CHECK(calls == 100);
  for (int i = 0; i < 100; ++i) CHECK(out[i] == i * i);
}

TEST_CASE("sparsities_for_target stays within the 10% band, clipped to [1,d]") {
  tl::Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const double rt = 3.0 + 40.0 * rng.uniform();
    const auto rs = tl::sparsities_for_target(rt, 50, 4, rng);
    REQUIRE(rs.size() == 4);
    for (int r : rs) {
      CHECK(r >= std::max(1, static_cast<int>(std::ceil(0.9 * rt))));
      CHECK(r <= std::min(50, static_cast<int>(std::floor(1.1 * rt))));
    }
  }
}

TEST_CASE("cell aggregates recompute exactly from the trial records") {
  const tl::GridResult res = tl::radius_phase_diagram(small_phase_spec());
  const auto recomputed = tl::aggregate_cells(res.axis_a, res.axis_b, res.trials);
  REQUIRE(recomputed.size() == res.cells.size());
  for (size_t i = 0; i < res.cells.size(); ++i) {
    CHECK(recomputed[i].success_rate == res.cells[i].success_rate);
    CHECK(recomputed[i].mean_err == res.cells[i].mean_err);
    CHECK(recomputed[i].trials == res.cells[i].trials);
  }
}

TEST_CASE("grid results are identical across thread counts and reruns") {
  tl::PhaseSpec spec = small_phase_spec();
  const tl::GridResult serial = tl::radius_phase_diagram(spec);
  spec.base.threads = 3;
  const tl::GridResult threaded = tl::radius_phase_diagram(spec);
  CHECK(same_trials(serial.trials, threaded.trials));
  const tl::GridResult again = tl::radius_phase_diagram(spec);
  CHECK(same_trials(serial.trials, again.trials));
}

TEST_CASE("tiny lambda cells succeed; boundary extraction picks the largest good lambda") {
  const tl::GridResult res = tl::radius_phase_diagram(small_phase_spec());
  // lambda -> 0 row: initialization at the optimum must succeed
  for (const tl::CellAggregate& c : res.cells) {
    if (c.cell_b == 0) CHECK(c.success_rate == doctest::Approx(1.0));
  }

  // synthetic boundary logic check
  tl::GridResult synth;
  synth.axis_a = {"r_tilde", {10, 20}};
  synth.axis_b = {"lambda", {0.1, 0.2, 0.3}};
  auto put = [&](int a, int b, double rate) {
    tl::CellAggregate c;
    c.cell_a = a;
    c.cell_b = b;
    c.success_rate = rate;
    synth.cells.push_back(c);
  };
  put(0, 0, 1.0);
  put(0, 1, 0.95);
  put(0, 2, 0.5);
  put(1, 0, 0.92);
  put(1, 1, 0.3);
  put(1, 2, 0.1);
  const auto boundary = tl::boundary_lambda_star(synth, 0.9);
  REQUIRE(boundary.size() == 2);
  CHECK(boundary[0] == doctest::Approx(0.2));
  CHECK(boundary[1] == doctest::Approx(0.1));

  tl::GridResult none = synth;
  for (auto& c : none.cells) c.success_rate = 0.0;
  CHECK(tl::boundary_lambda_star(none, 0.9)[0] == doctest::Approx(-1.0));
}

TEST_CASE("threshold_sample_size picks the smallest qualifying N") {
  tl::GridResult synth;
  synth.axis_a = {"N", {100, 200, 400}};
  synth.axis_b = {"r_tilde", {5, 10}};
  auto put = [&](int a, int b, double rate) {
    tl::CellAggregate c;
    c.cell_a = a;
    c.cell_b = b;
    c.success_rate = rate;
    synth.cells.push_back(c);
  };
  put(0, 0, 0.5);
  put(1, 0, 0.95);
  put(2, 0, 1.0);
  put(0, 1, 0.0);
  put(1, 1, 0.2);
  put(2, 1, 0.91);
  const auto n_star = tl::threshold_sample_size(synth, 0.9);
  CHECK(n_star[0] == doctest::Approx(200.0));
  CHECK(n_star[1] == doctest::Approx(400.0));
}

TEST_CASE("mask-accuracy bucketing honours width and the minimum population") {
  tl::InaccurateMaskSpec spec;
  spec.pruning_ratios = {50};
  spec.sample_sizes = {200};
  spec.accuracy_bucket_width = 0.1;
  spec.min_bucket_trials = 3;
  std::vector<tl::MaskTrialRecord> trials;
  auto add = [&](double acc, double err) {
    tl::MaskTrialRecord t;
    t.mask_accuracy = acc;
    t.test_error = err;
    t.iters_to_threshold = 10;
    trials.push_back(t);
  };
  // four trials in [0.8, 0.9), two in [0.9, 1.0]
  add(0.81, 1.0);
  add(0.84, 2.0);
  add(0.86, 3.0);
  add(0.89, 4.0);
  add(0.95, 9.0);
  add(0.99, 9.0);
  const auto buckets = tl::bucket_mask_trials(spec, trials);
  REQUIRE(buckets.size() == 1);  // the sparse bucket is suppressed
  CHECK(buckets[0].bucket_lo == doctest::Approx(0.8));
  CHECK(buckets[0].trials == 4);
  CHECK(buckets[0].mean_test_error == doctest::Approx(2.5));
}

TEST_CASE("noise sweep pairs problems across noise levels") {
  tl::NoiseSpec spec;
  spec.d = 30;
  spec.K = 2;
  spec.N = 300;
  spec.r_tilde_targets = {5};
  spec.noise_levels = {0.0, 0.01};
  spec.base.trials_per_cell = 3;
  spec.base.master_seed = 21;
  spec.base.train.max_iters = 400;
  const tl::GridResult res = tl::noise_sweep(spec);
  REQUIRE(res.trials.size() == 6);
  // same trial index at different noise levels shares its problem seed
  for (int t = 0; t < 3; ++t) {
    std::vector<std::uint64_t> seeds;
    for (const tl::TrialRecord& rec : res.trials) {
      if (rec.trial == t) seeds.push_back(rec.seed);
    }
    REQUIRE(seeds.size() == 2);
    CHECK(seeds[0] == seeds[1]);
  }
  // noiseless cells sit at (or below) the success tolerance floor
  CHECK(res.cell(0, 0).mean_err < 10.0 * spec.base.success_tol);
  CHECK(res.cell(0, 1).mean_err > res.cell(0, 0).mean_err);
}

}  // TEST_SUITE
