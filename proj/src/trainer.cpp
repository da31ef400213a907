#include "ticketlab/trainer.hpp"

#include <cmath>
#include <iostream>
#include <numeric>

#include "ticketlab/risk.hpp"
#include "ticketlab/rng.hpp"

namespace ticketlab {

void TrainConfig::validate() const {
  if (!(eta > 0.0)) throw std::invalid_argument("TrainConfig: eta must be positive");
  if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("TrainConfig: beta must lie in [0,1)");
  if (max_iters < 1) throw std::invalid_argument("TrainConfig: max_iters must be positive");
  if (!(rel_change_tol > 0.0)) {
    throw std::invalid_argument("TrainConfig: rel_change_tol must be positive");
  }
  if (partition_mode == PartitionMode::kFreshSubsets && subset_count < 1) {
    throw std::invalid_argument("TrainConfig: fresh-subsets mode needs subset_count >= 1");
  }
}

WeightMatrix random_ball_init(const OracleNetwork& oracle, double lambda,
                              const MaskMatrix& learner_mask, std::uint64_t seed,
                              bool warn_on_inaccurate_mask) {
  if (!(lambda > 0.0)) throw std::invalid_argument("random_ball_init: lambda must be positive");
  const MaskMatrix& oracle_mask = oracle.mask();
  if (learner_mask.d() != oracle_mask.d() || learner_mask.K() != oracle_mask.K()) {
    throw std::invalid_argument("random_ball_init: mask shape mismatch");
  }
  bool covers = true;
  for (int j = 0; j < oracle_mask.K() && covers; ++j) {
    for (int i = 0; i < oracle_mask.d(); ++i) {
      if (oracle_mask.is_set(i, j) && !learner_mask.is_set(i, j)) {
        covers = false;
        break;
      }
    }
  }
  if (!covers && warn_on_inaccurate_mask) {
    std::cerr << "random_ball_init: learner mask does not cover the oracle support; "
                 "centering on the projected weights\n";
  }

  Rng rng(seed);
  const long P = learner_mask.ones_count();
  Eigen::VectorXd dir(P);
  for (long t = 0; t < P; ++t) dir(t) = rng.gaussian();
  dir.normalize();
  double u = rng.uniform();
  while (u == 0.0) u = rng.uniform();
  const double radius = u * lambda * oracle.weights.values().norm();

  Eigen::MatrixXd w = oracle.weights.values().array() * learner_mask.entries();
  long t = 0;
  for (int j = 0; j < learner_mask.K(); ++j) {
    for (int i : learner_mask.support(j)) w(i, j) += radius * dir(t++);
  }
  return WeightMatrix::projected(w, learner_mask);
}

namespace {

// Disjoint contiguous chunks of a seeded shuffle of [N].
std::vector<std::vector<int>> partition_indices(int N, int T, std::uint64_t seed) {
  if (T > N) throw std::invalid_argument("agd_train: more subsets than samples");
  std::vector<int> idx(N);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (int i = 0; i < N - 1; ++i) std::swap(idx[i], idx[i + rng.uniform_int(N - i)]);
  std::vector<std::vector<int>> parts(T);
  for (int n = 0; n < N; ++n) parts[n % T].push_back(idx[n]);
  return parts;
}

SampleSet subset_of(const SampleSet& data, const std::vector<int>& rows) {
  Eigen::MatrixXd x(static_cast<int>(rows.size()), data.dim());
  Eigen::VectorXd y(static_cast<int>(rows.size()));
  for (size_t t = 0; t < rows.size(); ++t) {
    x.row(static_cast<int>(t)) = data.inputs.row(rows[t]);
    y(static_cast<int>(t)) = data.labels(rows[t]);
  }
  return SampleSet(std::move(x), std::move(y));
}

}  // namespace

TrainTrace agd_train(const SampleSet& data, const MaskMatrix& mask, const WeightMatrix& W0,
                     const TrainConfig& config, const OracleNetwork* oracle_for_metrics,
                     const TrainMonitor* monitor) {
  config.validate();
  if (!(W0.mask() == mask)) {
    throw std::invalid_argument("agd_train: W0 does not conform to the training mask");
  }
  if (data.dim() != mask.d()) throw std::invalid_argument("agd_train: dimension mismatch");

  const bool fresh = config.partition_mode == PartitionMode::kFreshSubsets;
  std::vector<std::vector<int>> parts;
  if (fresh) parts = partition_indices(data.size(), config.subset_count, config.seed);
  const int iter_cap = fresh ? std::min(config.max_iters, config.subset_count)
                             : config.max_iters;

  auto rel_error_to_oracle = [&](const Eigen::MatrixXd& w) {
    if (oracle_for_metrics == nullptr) return -1.0;
    return align_permutation(WeightMatrix::projected(w, mask), oracle_for_metrics->weights)
        .relative_error;
  };

  TrainTrace trace;
  Eigen::MatrixXd w = W0.values();
  Eigen::MatrixXd w_prev = w;

  const int K = mask.K();
  const int d = mask.d();

  // The mask is fixed for the whole run, so gather each neuron's support
  // columns once and work on N x r_j panels instead of the full N x d inputs;
  // one panel pass yields activations, residual, risk, and gradient together.
  std::vector<std::vector<int>> supports(K);
  std::vector<Eigen::MatrixXd> panels(K);
  for (int j = 0; j < K; ++j) {
    supports[j] = mask.support(j);
    Eigen::MatrixXd p(data.size(), static_cast<int>(supports[j].size()));
    for (size_t c = 0; c < supports[j].size(); ++c) {
      p.col(static_cast<int>(c)) = data.inputs.col(supports[j][c]);
    }
    panels[j] = std::move(p);
  }

  struct Pass {
    Eigen::MatrixXd z;  // N x K pre-activations
    Eigen::VectorXd resid;
    double risk = 0.0;
  };
  auto evaluate = [&](const Eigen::MatrixXd& weights) {
    Pass p;
    const int N = data.size();
    p.z.resize(N, K);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(N);
    for (int j = 0; j < K; ++j) {
      Eigen::VectorXd wj(static_cast<int>(supports[j].size()));
      for (size_t c = 0; c < supports[j].size(); ++c) {
        wj(static_cast<int>(c)) = weights(supports[j][c], j);
      }
      p.z.col(j) = panels[j] * wj;
      sum += p.z.col(j).cwiseMax(0.0);
    }
    p.resid = sum / K - data.labels;
    p.risk = p.resid.squaredNorm() / (2.0 * N);
    return p;
  };
  auto gradient_of = [&](const Pass& p) {
    const double scale = static_cast<double>(data.size()) * K;
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, K);
    for (int j = 0; j < K; ++j) {
      const Eigen::VectorXd weighted =
          ((p.z.col(j).array() > 0.0).cast<double>() * p.resid.array()).matrix();
      const Eigen::VectorXd gj = panels[j].transpose() * weighted / scale;
      for (size_t c = 0; c < supports[j].size(); ++c) {
        g(supports[j][c], j) = gj(static_cast<int>(c));
      }
    }
    return g;
  };
  // Subset gradients (fresh-subsets mode) reuse the gathered panels row-wise.
  auto subset_gradient = [&](const Eigen::MatrixXd& weights, const std::vector<int>& rows) {
    const int n = static_cast<int>(rows.size());
    Eigen::MatrixXd z(n, K);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < K; ++j) {
      Eigen::VectorXd wj(static_cast<int>(supports[j].size()));
      for (size_t c = 0; c < supports[j].size(); ++c) {
        wj(static_cast<int>(c)) = weights(supports[j][c], j);
      }
      for (int t = 0; t < n; ++t) z(t, j) = panels[j].row(rows[t]).dot(wj);
      sum += z.col(j).cwiseMax(0.0);
    }
    Eigen::VectorXd resid(n);
    for (int t = 0; t < n; ++t) resid(t) = sum(t) / K - data.labels(rows[t]);
    const double scale = static_cast<double>(n) * K;
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d, K);
    for (int j = 0; j < K; ++j) {
      Eigen::VectorXd gj = Eigen::VectorXd::Zero(static_cast<int>(supports[j].size()));
      for (int t = 0; t < n; ++t) {
        if (z(t, j) > 0.0) gj += panels[j].row(rows[t]).transpose() * resid(t);
      }
      for (size_t c = 0; c < supports[j].size(); ++c) {
        g(supports[j][c], j) = gj(static_cast<int>(c)) / scale;
      }
    }
    return g;
  };

  Pass pass = evaluate(w);
  trace.records.push_back({0, rel_error_to_oracle(w), pass.risk, 0.0});

  for (int t = 0; t < iter_cap; ++t) {
    const Eigen::MatrixXd grad = fresh ? subset_gradient(w, parts[t]) : gradient_of(pass);
    Eigen::MatrixXd w_next = w - config.eta * grad + config.beta * (w - w_prev);
    w_next = (w_next.array() * mask.entries()).matrix();

    const double w_norm = w.norm();
    const double rel_change = w_norm > 0.0 ? (w_next - w).norm() / w_norm
                                           : (w_next - w).norm();
    if (!w_next.allFinite() || !std::isfinite(rel_change)) {
      trace.reason = StopReason::kDiverged;
      trace.iterations = t + 1;
      trace.records.push_back({t + 1, -1.0, std::numeric_limits<double>::infinity(), rel_change});
      trace.final_weights = w;  // last finite iterate
      return trace;
    }
    w_prev = w;
    w = w_next;

    pass = evaluate(w);
    const double risk = pass.risk;
    trace.records.push_back({t + 1, rel_error_to_oracle(w), risk, rel_change});
    trace.iterations = t + 1;
    if (monitor != nullptr && monitor->observe && (t + 1) % monitor->stride == 0) {
      monitor->observe(t + 1, w);
    }
    if (!std::isfinite(risk)) {
      trace.reason = StopReason::kDiverged;
      trace.final_weights = w;
      return trace;
    }
    if (rel_change < config.rel_change_tol) {
      trace.reason = StopReason::kConverged;
      trace.final_weights = w;
      return trace;
    }
  }
  trace.reason = StopReason::kIterationCap;
  trace.final_weights = w;
  return trace;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("fit_line: need at least two points");
  }
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("fit_line: degenerate x values");
  LineFit fit;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  const double ss_tot = syy - sy * sy / n;
  double ss_res = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (fit.intercept + fit.slope * x[i]);
    ss_res += e * e;
  }
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

double estimate_rate(const TrainTrace& trace, double noise_floor) {
  // Fit only the segment above the plateau: drop records whose error is
  // below max(noise_floor, 3x the final value).
  const double final_err = trace.final_rel_error();
  if (final_err < 0.0) throw std::invalid_argument("estimate_rate: trace has no error metric");
  const double floor = std::max(noise_floor, 3.0 * final_err);

  std::vector<double> ts, logs;
  for (const TraceRecord& rec : trace.records) {
    if (rec.rel_error <= 0.0) continue;
    if (rec.rel_error < floor && !ts.empty()) break;
    ts.push_back(static_cast<double>(rec.iter));
    logs.push_back(std::log(rec.rel_error));
  }
  if (ts.size() < 10) throw std::runtime_error("estimate_rate: no linear regime detected");
  const LineFit fit = fit_line(ts, logs);
  if (!(fit.slope < 0.0)) throw std::runtime_error("estimate_rate: no linear regime detected");
  return std::exp(fit.slope);
}

TrialResult run_trial(const OracleNetwork& oracle, int N, const MaskMatrix& learner_mask,
                      double lambda, const TrainConfig& config, double success_tol) {
  if (!(success_tol > 0.0)) throw std::invalid_argument("run_trial: success_tol must be positive");
  const SampleSet data = sample_dataset(oracle, N, derive_seed(config.seed, 1));
  const WeightMatrix w0 = random_ball_init(oracle, lambda, learner_mask, derive_seed(config.seed, 2));
  TrainConfig cfg = config;
  cfg.seed = derive_seed(config.seed, 3);
  const TrainTrace trace = agd_train(data, learner_mask, w0, cfg, &oracle);
  TrialResult res;
  res.final_rel_error = trace.final_rel_error();
  res.iterations = trace.iterations;
  res.reason = trace.reason;
  res.success = trace.reason != StopReason::kDiverged && res.final_rel_error >= 0.0 &&
                res.final_rel_error < success_tol;
  return res;
}

}  // namespace ticketlab
