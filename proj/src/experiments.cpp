#include "ticketlab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <thread>

namespace ticketlab {

void parallel_for(int n_tasks, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, threads);
  if (threads == 1 || n_tasks <= 1) {
    for (int i = 0; i < n_tasks; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      for (int i = next.fetch_add(1); i < n_tasks; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

const CellAggregate& GridResult::cell(int a, int b) const {
  for (const CellAggregate& c : cells) {
    if (c.cell_a == a && c.cell_b == b) return c;
  }
  throw std::out_of_range("GridResult: no such cell");
}

std::vector<CellAggregate> aggregate_cells(const GridAxis& axis_a, const GridAxis& axis_b,
                                           const std::vector<TrialRecord>& trials) {
  const int nb = static_cast<int>(axis_b.values.size());
  std::map<std::pair<int, int>, std::vector<const TrialRecord*>> by_cell;
  for (const TrialRecord& t : trials) by_cell[{t.cell_a, t.cell_b}].push_back(&t);

  std::vector<CellAggregate> cells;
  for (int a = 0; a < static_cast<int>(axis_a.values.size()); ++a) {
    for (int b = 0; b < nb; ++b) {
      const auto it = by_cell.find({a, b});
      if (it == by_cell.end()) continue;
      const auto& recs = it->second;
      CellAggregate cell;
      cell.cell_a = a;
      cell.cell_b = b;
      cell.trials = static_cast<int>(recs.size());
      double sum_err = 0, sum_err2 = 0, sum_iters = 0, sum_rate = 0;
      int successes = 0, rated = 0;
      for (const TrialRecord* r : recs) {
        successes += r->success ? 1 : 0;
        sum_err += r->final_rel_error;
        sum_err2 += r->final_rel_error * r->final_rel_error;
        sum_iters += r->iterations;
        if (r->rate >= 0.0) {
          sum_rate += r->rate;
          ++rated;
        }
      }
      const double n = static_cast<double>(cell.trials);
      cell.success_rate = successes / n;
      cell.mean_err = sum_err / n;
      cell.std_err = std::sqrt(std::max(0.0, sum_err2 / n - cell.mean_err * cell.mean_err));
      cell.mean_iters = sum_iters / n;
      cell.mean_rate = rated > 0 ? sum_rate / rated : -1.0;
      cells.push_back(cell);
    }
  }
  return cells;
}

std::vector<int> sparsities_for_target(double r_tilde_target, int d, int K, Rng& rng) {
  std::vector<int> r(K);
  const int lo = std::max(1, static_cast<int>(std::ceil(0.9 * r_tilde_target)));
  const int hi = std::min(d, static_cast<int>(std::floor(1.1 * r_tilde_target)));
  if (lo > hi || lo > d) {
    throw std::invalid_argument("sparsities_for_target: target infeasible for given d");
  }
  for (int j = 0; j < K; ++j) r[j] = lo + rng.uniform_int(hi - lo + 1);
  return r;
}

GridResult radius_phase_diagram(const PhaseSpec& spec) {
  GridResult res;
  res.axis_a = {"r_tilde", spec.r_tilde_targets};
  res.axis_b = {"lambda", spec.lambdas};
  const int na = static_cast<int>(spec.r_tilde_targets.size());
  const int nb = static_cast<int>(spec.lambdas.size());
  const int per_cell = spec.base.trials_per_cell;
  res.trials.resize(static_cast<size_t>(na) * nb * per_cell);

  parallel_for(static_cast<int>(res.trials.size()), spec.base.threads, [&](int idx) {
    const int a = idx / (nb * per_cell);
    const int b = (idx / per_cell) % nb;
    const int t = idx % per_cell;
    const std::uint64_t seed = derive_seed(spec.base.master_seed, a, b, t);
    Rng rng(derive_seed(seed, 0));
    const std::vector<int> r =
        sparsities_for_target(spec.r_tilde_targets[a], spec.d, spec.K, rng);
    const OracleNetwork oracle =
        generate_oracle(spec.d, spec.K, r, spec.overlap_mode, derive_seed(seed, 1));
    TrainConfig cfg = spec.base.train;
    cfg.seed = derive_seed(seed, 2);
    const TrialResult trial = run_trial(oracle, spec.N, oracle.mask(), spec.lambdas[b], cfg,
                                        spec.base.success_tol);
    res.trials[idx] = {a,    b,    t, seed, trial.success, trial.final_rel_error,
                       trial.iterations, -1.0};
  });
  res.cells = aggregate_cells(res.axis_a, res.axis_b, res.trials);
  return res;
}

std::vector<double> boundary_lambda_star(const GridResult& result, double threshold) {
  std::vector<double> out(result.axis_a.values.size(), -1.0);
  for (const CellAggregate& c : result.cells) {
    if (c.success_rate >= threshold) {
      out[c.cell_a] = std::max(out[c.cell_a], result.axis_b.values[c.cell_b]);
    }
  }
  return out;
}

GridResult rate_sweep(const RateSpec& spec) {
  GridResult res;
  res.axis_a = {"r_tilde", spec.r_tilde_targets};
  res.axis_b = {"beta", spec.betas};
  const int na = static_cast<int>(spec.r_tilde_targets.size());
  const int nb = static_cast<int>(spec.betas.size());
  const int per_cell = spec.base.trials_per_cell;
  res.trials.resize(static_cast<size_t>(na) * nb * per_cell);

  parallel_for(static_cast<int>(res.trials.size()), spec.base.threads, [&](int idx) {
    const int a = idx / (nb * per_cell);
    const int b = (idx / per_cell) % nb;
    const int t = idx % per_cell;
    // Paired across beta cells: oracle, data and init depend on (a, t) only,
    // so momentum settings see identical problems.
    const std::uint64_t problem_seed = derive_seed(spec.base.master_seed, a, t);
    Rng rng(derive_seed(problem_seed, 0));
    const std::vector<int> r =
        sparsities_for_target(spec.r_tilde_targets[a], spec.d, spec.K, rng);
    const OracleNetwork oracle = generate_oracle(spec.d, spec.K, r,
                                                 OverlapMode::kAlmostOverlapped,
                                                 derive_seed(problem_seed, 1));
    const SampleSet data = sample_dataset(oracle, spec.N, derive_seed(problem_seed, 2));
    const WeightMatrix w0 = random_ball_init(oracle, spec.base.lambda, oracle.mask(),
                                             derive_seed(problem_seed, 3));
    TrainConfig cfg = spec.base.train;
    cfg.beta = spec.betas[b];
    cfg.seed = derive_seed(problem_seed, 4);
    const TrainTrace trace = agd_train(data, oracle.mask(), w0, cfg, &oracle);

    TrialRecord rec{a, b, t, problem_seed, false, trace.final_rel_error(), trace.iterations, -1.0};
    rec.success = trace.reason != StopReason::kDiverged &&
                  rec.final_rel_error >= 0.0 && rec.final_rel_error < spec.base.success_tol;
    try {
      rec.rate = estimate_rate(trace, spec.rate_noise_floor);
    } catch (const std::exception&) {
      rec.rate = -1.0;
    }
    res.trials[idx] = rec;
  });
  res.cells = aggregate_cells(res.axis_a, res.axis_b, res.trials);
  return res;
}

GridResult sample_complexity_diagram(const SampleComplexitySpec& spec) {
  GridResult res;
  res.axis_a = {"N", spec.sample_sizes};
  if (spec.mode == SparsityAxisMode::kRTildeTarget) {
    res.axis_b = {"r_tilde", spec.r_tilde_targets};
  } else {
    res.axis_b = {"pattern", {}};
    for (size_t i = 0; i < spec.patterns.size(); ++i) {
      res.axis_b.values.push_back(static_cast<double>(i));
    }
  }
  const int na = static_cast<int>(res.axis_a.values.size());
  const int nb = static_cast<int>(res.axis_b.values.size());
  const int per_cell = spec.base.trials_per_cell;
  res.trials.resize(static_cast<size_t>(na) * nb * per_cell);

  parallel_for(static_cast<int>(res.trials.size()), spec.base.threads, [&](int idx) {
    const int a = idx / (nb * per_cell);
    const int b = (idx / per_cell) % nb;
    const int t = idx % per_cell;
    const std::uint64_t seed = derive_seed(spec.base.master_seed, a, b, t);
    Rng rng(derive_seed(seed, 0));

    OverlapMode mode = spec.overlap_mode;
    std::vector<int> r;
    if (spec.mode == SparsityAxisMode::kRTildeTarget) {
      r = sparsities_for_target(spec.r_tilde_targets[b], spec.d, spec.K, rng);
    } else {
      r.assign(spec.K, spec.fixed_r);
      mode = spec.patterns[b];
    }
    const OracleNetwork oracle =
        generate_oracle(spec.d, spec.K, r, mode, derive_seed(seed, 1));
    TrainConfig cfg = spec.base.train;
    cfg.seed = derive_seed(seed, 2);
    const TrialResult trial =
        run_trial(oracle, static_cast<int>(spec.sample_sizes[a]), oracle.mask(),
                  spec.base.lambda, cfg, spec.base.success_tol);
    res.trials[idx] = {a,    b,    t, seed, trial.success, trial.final_rel_error,
                       trial.iterations, -1.0};
  });
  res.cells = aggregate_cells(res.axis_a, res.axis_b, res.trials);
  return res;
}

std::vector<double> threshold_sample_size(const GridResult& result, double threshold) {
  std::vector<double> out(result.axis_b.values.size(), -1.0);
  for (size_t b = 0; b < out.size(); ++b) {
    for (size_t a = 0; a < result.axis_a.values.size(); ++a) {
      bool found = false;
      for (const CellAggregate& c : result.cells) {
        if (c.cell_a == static_cast<int>(a) && c.cell_b == static_cast<int>(b) &&
            c.success_rate >= threshold) {
          found = true;
        }
      }
      if (found) {
        out[b] = result.axis_a.values[a];
        break;
      }
    }
  }
  return out;
}

GridResult noise_sweep(const NoiseSpec& spec) {
  GridResult res;
  res.axis_a = {"r_tilde", spec.r_tilde_targets};
  res.axis_b = {"noise_level", spec.noise_levels};
  const int na = static_cast<int>(spec.r_tilde_targets.size());
  const int nb = static_cast<int>(spec.noise_levels.size());
  const int per_cell = spec.base.trials_per_cell;
  res.trials.resize(static_cast<size_t>(na) * nb * per_cell);

  parallel_for(static_cast<int>(res.trials.size()), spec.base.threads, [&](int idx) {
    const int a = idx / (nb * per_cell);
    const int b = (idx / per_cell) % nb;
    const int t = idx % per_cell;
    // Paired across noise levels so doubling sigma is measured on the same
    // oracle, data inputs and initialization.
    const std::uint64_t problem_seed = derive_seed(spec.base.master_seed, a, t);
    Rng rng(derive_seed(problem_seed, 0));
    const std::vector<int> r =
        sparsities_for_target(spec.r_tilde_targets[a], spec.d, spec.K, rng);
    OracleNetwork oracle = generate_oracle(spec.d, spec.K, r, OverlapMode::kAlmostOverlapped,
                                           derive_seed(problem_seed, 1));
    // Calibrate sigma against the RMS of noiseless outputs.
    const SampleSet ref =
        sample_dataset(oracle, spec.reference_samples, derive_seed(problem_seed, 2));
    const double e_y = std::sqrt(ref.labels.squaredNorm() / ref.size());
    oracle.noise_sigma = spec.noise_levels[b] * e_y;

    TrainConfig cfg = spec.base.train;
    cfg.seed = derive_seed(problem_seed, 3);
    const TrialResult trial = run_trial(oracle, spec.N, oracle.mask(), spec.base.lambda, cfg,
                                        spec.base.success_tol);
    res.trials[idx] = {a,    b,    t, problem_seed, trial.success, trial.final_rel_error,
                       trial.iterations, -1.0};
  });
  res.cells = aggregate_cells(res.axis_a, res.axis_b, res.trials);
  return res;
}

namespace {

// Student mask with a prescribed overlap against the generating mask: each
// column keeps its largest-|weight| generating coordinates up to the target
// accuracy, then fills the keep budget with random off-support coordinates.
MaskMatrix controlled_accuracy_mask(const OracleNetwork& oracle, double pruning_ratio,
                                    double target_accuracy, Rng& rng) {
  const int d = oracle.weights.d();
  const int K = oracle.weights.K();
  Eigen::ArrayXXd mask = Eigen::ArrayXXd::Zero(d, K);
  for (int j = 0; j < K; ++j) {
    const std::vector<int> support = oracle.mask().support(j);
    const int r_j = static_cast<int>(support.size());
    const int keep_j = std::max(
        1, static_cast<int>(std::lround((1.0 - pruning_ratio / 100.0) * d)));
    int keep_oracle = static_cast<int>(std::lround(target_accuracy * r_j));
    keep_oracle = std::min({keep_oracle, r_j, keep_j});

    std::vector<int> by_magnitude = support;
    std::stable_sort(by_magnitude.begin(), by_magnitude.end(), [&](int a, int b) {
      return std::abs(oracle.weights.values()(a, j)) > std::abs(oracle.weights.values()(b, j));
    });
    for (int t = 0; t < keep_oracle; ++t) mask(by_magnitude[t], j) = 1.0;

    std::vector<int> off_support;
    off_support.reserve(d - r_j);
    for (int i = 0; i < d; ++i) {
      if (!oracle.mask().is_set(i, j)) off_support.push_back(i);
    }
    int fill = keep_j - keep_oracle;
    for (int t = 0; t < fill && !off_support.empty(); ++t) {
      const int pick = rng.uniform_int(static_cast<int>(off_support.size()));
      mask(off_support[pick], j) = 1.0;
      off_support.erase(off_support.begin() + pick);
    }
  }
  return MaskMatrix(std::move(mask));
}

}  // namespace

InaccurateMaskResult inaccurate_mask_sweep(const InaccurateMaskSpec& spec) {
  InaccurateMaskResult res;
  res.spec = spec;
  const int nr = static_cast<int>(spec.pruning_ratios.size());
  const int nn = static_cast<int>(spec.sample_sizes.size());
  const int per_cell = spec.base.trials_per_cell;
  res.trials.resize(static_cast<size_t>(nr) * nn * per_cell);

  parallel_for(static_cast<int>(res.trials.size()), spec.base.threads, [&](int idx) {
    const int a = idx / (nn * per_cell);
    const int b = (idx / per_cell) % nn;
    const int t = idx % per_cell;
    // Paired across pruning-ratio cells: oracle, data, accuracy draw and
    // training seed depend on (b, t) only, so ratio comparisons within an
    // accuracy bucket see identical problems and differ only in the mask.
    const std::uint64_t seed = derive_seed(spec.base.master_seed, b, t);
    const int N = spec.sample_sizes[b];

    // Almost-overlapped generating supports: shared support rows give the
    // dense warmup a common row-saliency profile, which is what the
    // score-based mask can actually recover.
    const OracleNetwork oracle =
        generate_oracle(spec.d, spec.K, std::vector<int>(spec.K, spec.oracle_r),
                        OverlapMode::kAlmostOverlapped, derive_seed(seed, 1));
    const SampleSet data = sample_dataset(oracle, N, derive_seed(seed, 2));

    MaskMatrix student_mask = MaskMatrix::full(spec.d, spec.K);
    if (spec.mask_source == MaskSource::kGrasp) {
      TrainConfig warmup = spec.base.train;
      warmup.max_iters = spec.warmup_iters;
      warmup.rel_change_tol = 1e-14;  // run the full warmup budget
      student_mask = grasp_prune(data, student_mask, warmup, spec.pruning_ratios[a],
                                 derive_seed(seed, 3))
                         .mask;
    } else {
      Rng mask_rng(derive_seed(seed, 3));
      const double target_acc =
          mask_rng.uniform(spec.controlled_accuracy_lo, spec.controlled_accuracy_hi);
      student_mask = controlled_accuracy_mask(oracle, spec.pruning_ratios[a], target_acc,
                                              mask_rng);
    }

    const WeightMatrix w0 = random_ball_init(oracle, spec.base.lambda, student_mask,
                                             derive_seed(seed, 4), /*warn=*/false);
    TrainConfig cfg = spec.base.train;
    cfg.seed = derive_seed(seed, 5);

    int iters_to_threshold = -1;
    TrainMonitor monitor;
    monitor.stride = spec.monitor_stride;
    monitor.observe = [&](int iter, const Eigen::MatrixXd& weights) {
      if (iters_to_threshold >= 0) return;
      const double err = test_error(WeightMatrix::projected(weights, student_mask), oracle,
                                    spec.test_samples / 4, derive_seed(seed, 6));
      if (err <= spec.iteration_test_threshold) iters_to_threshold = iter;
    };
    const TrainTrace trace = agd_train(data, student_mask, w0, cfg, nullptr, &monitor);
    const double err = test_error(WeightMatrix::projected(trace.final_weights, student_mask),
                                  oracle, spec.test_samples, derive_seed(seed, 7));

    MaskTrialRecord rec;
    rec.ratio_index = a;
    rec.n_index = b;
    rec.trial = t;
    rec.seed = seed;
    rec.pruning_ratio = pruning_ratio(student_mask);
    rec.sample_size = N;
    rec.mask_accuracy = mask_accuracy(student_mask, oracle.mask());
    rec.test_error = err;
    rec.iterations = trace.iterations;
    rec.iters_to_threshold = iters_to_threshold;
    res.trials[idx] = rec;
  });
  res.buckets = bucket_mask_trials(spec, res.trials);
  return res;
}

std::vector<MaskBucketAggregate> bucket_mask_trials(const InaccurateMaskSpec& spec,
                                                    const std::vector<MaskTrialRecord>& trials) {
  const double width = spec.accuracy_bucket_width;
  std::map<std::tuple<int, int, int>, std::vector<const MaskTrialRecord*>> groups;
  for (const MaskTrialRecord& t : trials) {
    const int bucket = std::min(static_cast<int>(t.mask_accuracy / width),
                                static_cast<int>(1.0 / width) - 1);
    groups[{t.ratio_index, t.n_index, bucket}].push_back(&t);
  }
  std::vector<MaskBucketAggregate> out;
  for (const auto& [key, recs] : groups) {
    if (static_cast<int>(recs.size()) < spec.min_bucket_trials) continue;
    MaskBucketAggregate agg;
    agg.ratio_index = std::get<0>(key);
    agg.n_index = std::get<1>(key);
    agg.bucket_lo = std::get<2>(key) * width;
    agg.trials = static_cast<int>(recs.size());
    double sum_err = 0.0, sum_iters = 0.0;
    int reached = 0;
    for (const MaskTrialRecord* r : recs) {
      sum_err += r->test_error;
      if (r->iters_to_threshold >= 0) {
        sum_iters += r->iters_to_threshold;
        ++reached;
      }
    }
    agg.mean_test_error = sum_err / agg.trials;
    agg.mean_iters_to_threshold = reached > 0 ? sum_iters / reached : -1.0;
    out.push_back(agg);
  }
  return out;
}

ImpSweepResult imp_sweep(const ImpSweepSpec& spec) {
  ImpSweepResult res;
  res.spec = spec;
  const int nn = static_cast<int>(spec.sample_sizes.size());
  const int per_cell = spec.base.trials_per_cell;

  std::vector<std::vector<PrunedRunRecord>> runs(static_cast<size_t>(nn) * per_cell);
  parallel_for(static_cast<int>(runs.size()), spec.base.threads, [&](int idx) {
    const int b = idx / per_cell;
    const int t = idx % per_cell;
    const std::uint64_t seed = derive_seed(spec.base.master_seed, b, t);
    const int N = spec.sample_sizes[b];

    OracleNetwork oracle =
        generate_oracle(spec.d, spec.K, std::vector<int>(spec.K, spec.oracle_r),
                        OverlapMode::kAlmostOverlapped, derive_seed(seed, 1));
    const SampleSet ref =
        sample_dataset(oracle, spec.reference_samples, derive_seed(seed, 2));
    const double e_y = std::sqrt(ref.labels.squaredNorm() / ref.size());
    oracle.noise_sigma = spec.noise_level_target * e_y;
    const SampleSet data = sample_dataset(oracle, N, derive_seed(seed, 3));

    // Dense random start, same scale as the oracle weights.
    Rng rng(derive_seed(seed, 4));
    const MaskMatrix full = MaskMatrix::full(spec.d, spec.K);
    Eigen::MatrixXd w0(spec.d, spec.K);
    for (int j = 0; j < spec.K; ++j) {
      for (int i = 0; i < spec.d; ++i) w0(i, j) = rng.uniform(-0.5, 0.5);
    }
    TrainConfig cfg = spec.base.train;
    cfg.seed = derive_seed(seed, 5);
    ImpOptions options;
    options.test_samples = spec.test_samples;
    options.test_seed = derive_seed(seed, 6);
    runs[idx] = imp(data, spec.schedule, cfg, WeightMatrix(std::move(w0), full), &oracle,
                    options);
  });

  std::map<std::pair<int, int>, ImpCell> cells;
  for (int idx = 0; idx < static_cast<int>(runs.size()); ++idx) {
    const int b = idx / per_cell;
    for (const PrunedRunRecord& rec : runs[idx]) {
      ImpCell& cell = cells[{b, rec.round}];
      cell.n_index = b;
      cell.round = rec.round;
      cell.mean_pruning_ratio += rec.pruning_ratio;
      cell.mean_test_error += rec.test_error;
      cell.trials += 1;
    }
  }
  for (auto& [key, cell] : cells) {
    cell.mean_pruning_ratio /= cell.trials;
    cell.mean_test_error /= cell.trials;
    res.cells.push_back(cell);
  }
  return res;
}

}  // namespace ticketlab
