#include "ticketlab/risk.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "ticketlab/rng.hpp"

namespace ticketlab {

namespace {

void check_dims(const WeightMatrix& W, const SampleSet& data) {
  if (data.dim() != W.d()) throw std::invalid_argument("risk: dimension mismatch");
}

// ReLU activity pattern, strict inequality: ties at 0 are inactive.
Eigen::ArrayXXd activity(const Eigen::MatrixXd& z) {
  return (z.array() > 0.0).cast<double>();
}

}  // namespace

double empirical_risk(const WeightMatrix& W, const SampleSet& data) {
  check_dims(W, data);
  const Eigen::VectorXd resid = forward_batch(W, data.inputs) - data.labels;
  return resid.squaredNorm() / (2.0 * data.size());
}

WeightMatrix masked_gradient(const WeightMatrix& W, const SampleSet& data) {
  check_dims(W, data);
  const int N = data.size();
  const int K = W.K();
  const Eigen::MatrixXd z = data.inputs * W.values();  // N x K
  const Eigen::ArrayXXd act = activity(z);
  const Eigen::VectorXd resid =
      (z.array().max(0.0).rowwise().sum() / K).matrix() - data.labels;
  // col j: (1/(N K)) X^T (1{z_j > 0} .* resid)
  const Eigen::MatrixXd weighted = act.colwise() * resid.array();
  Eigen::MatrixXd g = data.inputs.transpose() * weighted / (static_cast<double>(N) * K);
  return WeightMatrix::projected(g, W.mask());
}

namespace {

// Per-sample Jacobian rows stacked over the free coordinates, ordered by
// column j then ascending input index. H = B^T B / N.
Eigen::MatrixXd jacobian_rows(const WeightMatrix& W, const SampleSet& data) {
  const int N = data.size();
  const int K = W.K();
  const long P = W.mask().ones_count();
  const Eigen::MatrixXd z = data.inputs * W.values();
  const Eigen::ArrayXXd act = activity(z);
  Eigen::MatrixXd b(N, P);
  long col = 0;
  for (int j = 0; j < K; ++j) {
    for (int i : W.mask().support(j)) {
      b.col(col++) = (data.inputs.col(i).array() * act.col(j) / K).matrix();
    }
  }
  return b;
}

}  // namespace

Eigen::MatrixXd hessian(const WeightMatrix& W, const SampleSet& data, int densify_cap) {
  check_dims(W, data);
  const long P = W.mask().ones_count();
  if (P > densify_cap) {
    throw std::runtime_error(
        "hessian: " + std::to_string(P) + " free coordinates exceed the densification cap of " +
        std::to_string(densify_cap) + "; use the matrix-free eigenvalue probe instead");
  }
  const Eigen::MatrixXd b = jacobian_rows(W, data);
  return b.transpose() * b / data.size();
}

HessianProbe hessian_probe(const WeightMatrix& W, const SampleSet& data,
                           const WeightMatrix& W_star, int densify_cap) {
  const Eigen::MatrixXd h = hessian(W, data, densify_cap);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
  HessianProbe probe;
  probe.lambda_min = es.eigenvalues().minCoeff();
  probe.lambda_max = es.eigenvalues().maxCoeff();
  probe.n_params = static_cast<int>(W.mask().ones_count());
  probe.location_error = align_permutation(W, W_star).relative_error;
  return probe;
}

std::pair<double, double> extreme_eigenvalues_matfree(const WeightMatrix& W,
                                                      const SampleSet& data,
                                                      double rel_tol,
                                                      int max_iters_per_param) {
  check_dims(W, data);
  const int N = data.size();
  const int K = W.K();
  const long P = W.mask().ones_count();
  const Eigen::MatrixXd z = data.inputs * W.values();
  const Eigen::ArrayXXd act = activity(z);

  std::vector<std::vector<int>> supports(K);
  for (int j = 0; j < K; ++j) supports[j] = W.mask().support(j);

  // Hv without materializing the P x P matrix.
  auto apply = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(N);
    long off = 0;
    for (int j = 0; j < K; ++j) {
      Eigen::VectorXd xv = Eigen::VectorXd::Zero(N);
      for (int i : supports[j]) xv += data.inputs.col(i) * v(off++);
      s += (xv.array() * act.col(j) / K).matrix();
    }
    Eigen::VectorXd out(P);
    off = 0;
    for (int j = 0; j < K; ++j) {
      const Eigen::VectorXd sj = (s.array() * act.col(j) / K).matrix();
      for (int i : supports[j]) out(off++) = data.inputs.col(i).dot(sj) / N;
    }
    return out;
  };

  // Lanczos with full reorthogonalization. Running up to P steps makes the
  // tridiagonalization exact; a breakdown means an invariant subspace was
  // found, so a zero eigenvalue remains for rank-deficient operators.
  const long step_cap = std::min<long>(P, static_cast<long>(max_iters_per_param) * P);
  Rng rng(0x5eed);
  Eigen::VectorXd q(P);
  for (long i = 0; i < P; ++i) q(i) = rng.gaussian();
  q.normalize();

  std::vector<Eigen::VectorXd> basis;
  std::vector<double> alpha, beta;
  Eigen::VectorXd prev = Eigen::VectorXd::Zero(P);
  for (long step = 0; step < step_cap; ++step) {
    basis.push_back(q);
    Eigen::VectorXd w = apply(q);
    if (step > 0) w -= beta.back() * prev;
    const double a = q.dot(w);
    alpha.push_back(a);
    w -= a * q;
    for (const auto& b : basis) w -= b.dot(w) * b;
    const double bnorm = w.norm();
    if (bnorm <= rel_tol * std::max(std::abs(a), 1.0) || step + 1 == step_cap) break;
    beta.push_back(bnorm);
    prev = q;
    q = w / bnorm;
  }

  const int m = static_cast<int>(alpha.size());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    t(i, i) = alpha[i];
    if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

}  // namespace ticketlab
