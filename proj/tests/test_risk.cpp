#include <cmath>

#include "doctest.h"
#include "ticketlab/risk.hpp"
#include "ticketlab/rng.hpp"

namespace tl = ticketlab;
using Eigen::ArrayXXd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Instance {
  tl::WeightMatrix W;
  tl::SampleSet data;
};

// Random masked instance with every |w_j^T x_n| bounded away from the ReLU
// kink so finite differences are valid.
Instance random_instance(tl::Rng& rng, int d_max = 20, int K_max = 4, int N_max = 50) {
  const int d = 2 + static_cast<int>(rng.uniform_int(d_max - 1));
  const int K = 1 + static_cast<int>(rng.uniform_int(K_max));
  const int N = 5 + static_cast<int>(rng.uniform_int(N_max - 4));
  ArrayXXd m = ArrayXXd::Zero(d, K);
  for (int j = 0; j < K; ++j) {
    m(static_cast<int>(rng.uniform_int(d)), j) = 1.0;  // guarantee a connection
    for (int i = 0; i < d; ++i)
      if (rng.uniform() < 0.5) m(i, j) = 1.0;
  }
  const tl::MaskMatrix mask(m);
  MatrixXd v = MatrixXd::Zero(d, K);
  for (int j = 0; j < K; ++j)
    for (int i : mask.support(j)) v(i, j) = rng.uniform(-1.0, 1.0);
  const tl::WeightMatrix W(v, mask);

  for (int attempt = 0; attempt < 100; ++attempt) {
    MatrixXd X(N, d);
    for (int n = 0; n < N; ++n)
      for (int i = 0; i < d; ++i) X(n, i) = rng.gaussian();
    VectorXd y(N);
    for (int n = 0; n < N; ++n) y(n) = rng.gaussian();
    const MatrixXd Z = X * W.values();
    if (Z.cwiseAbs().minCoeff() > 1e-4) return {W, tl::SampleSet(X, y)};
  }
  throw std::runtime_error("no kink-free instance found");
}

double fd_gradient(const tl::WeightMatrix& W, const tl::SampleSet& data, int i, int j,
                   double h) {
  MatrixXd plus = W.values(), minus = W.values();
  plus(i, j) += h;
  minus(i, j) -= h;
  const double fp = tl::empirical_risk(tl::WeightMatrix(plus, W.mask()), data);
  const double fm = tl::empirical_risk(tl::WeightMatrix(minus, W.mask()), data);
  return (fp - fm) / (2.0 * h);
}

}  // namespace

TEST_SUITE("risk") {

TEST_CASE("empirical risk special values") {
  tl::OracleNetwork o = tl::generate_oracle(10, 3, {3, 4, 5}, tl::OverlapMode::kRandom, 41);
  o.noise_sigma = 0.0;
  const tl::SampleSet data = tl::sample_dataset(o, 60, 6);
  CHECK(tl::empirical_risk(o.weights, data) == doctest::Approx(0.0).epsilon(1e-14));

  // K=1, d=2, w=(1,0), x=(1,1), y=2: risk = (1/2)(1-2)^2 = 0.5
  MatrixXd w(2, 1);
  w << 1.0, 0.0;
  const tl::WeightMatrix W(w, tl::MaskMatrix::full(2, 1));
  MatrixXd X(1, 2);
  X << 1.0, 1.0;
  VectorXd y(1);
  y << 2.0;
  CHECK(tl::empirical_risk(W, tl::SampleSet(X, y)) == doctest::Approx(0.5));

  CHECK_THROWS(tl::SampleSet(MatrixXd(0, 2), VectorXd(0)));
}

TEST_CASE("risk at noisy optimum approaches sigma^2/2") {
  const double sigma = 0.3;
  tl::OracleNetwork o = tl::generate_oracle(10, 2, {4, 4}, tl::OverlapMode::kRandom, 8);
  o.noise_sigma = sigma;
  const int N = 20000;
  const tl::SampleSet data = tl::sample_dataset(o, N, 12);
  const double risk = tl::empirical_risk(o.weights, data);
  CHECK(std::abs(risk - sigma * sigma / 2.0) < 5.0 * sigma * sigma / std::sqrt(N));
}

TEST_CASE("risk and gradient permutation equivariance") {
  const tl::OracleNetwork o = tl::generate_oracle(8, 3, {3, 3, 4}, tl::OverlapMode::kRandom, 19);
  const tl::SampleSet data = tl::sample_dataset(o, 40, 2);
  tl::Rng rng(5);
  MatrixXd v = MatrixXd::Zero(8, 3);
  for (int j = 0; j < 3; ++j)
    for (int i : o.mask().support(j)) v(i, j) = rng.gaussian();
  const tl::WeightMatrix W(v, o.mask());

  MatrixXd pv = v;
  pv.col(0).swap(pv.col(2));
  ArrayXXd pm = o.mask().entries();
  pm.col(0).swap(pm.col(2));
  const tl::WeightMatrix Wp(pv, tl::MaskMatrix(pm));

  CHECK(tl::empirical_risk(W, data) == doctest::Approx(tl::empirical_risk(Wp, data)));
  const MatrixXd g = tl::masked_gradient(W, data).values();
  MatrixXd gp = tl::masked_gradient(Wp, data).values();
  gp.col(0).swap(gp.col(2));
  CHECK((g - gp).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("masked gradient hand example and mask projection") {
  // K=1, d=2, w=(1,0), x=(1,1), y=2: gradient (-1,-1)
  MatrixXd w(2, 1);
  w << 1.0, 0.0;
  MatrixXd X(1, 2);
  X << 1.0, 1.0;
  VectorXd y(1);
  y << 2.0;
  const tl::SampleSet data(X, y);
  const MatrixXd g =
      tl::masked_gradient(tl::WeightMatrix(w, tl::MaskMatrix::full(2, 1)), data).values();
  CHECK(g(0, 0) == doctest::Approx(-1.0));
  CHECK(g(1, 0) == doctest::Approx(-1.0));

  // masked coordinate stays exactly zero
  ArrayXXd me(2, 1);
  me << 1, 0;
  const MatrixXd gm =
      tl::masked_gradient(tl::WeightMatrix::projected(w, tl::MaskMatrix(me)), data).values();
  CHECK(gm(1, 0) == 0.0);
  CHECK(gm(0, 0) == doctest::Approx(-1.0));
}

TEST_CASE("gradient at the oracle optimum is zero") {
  tl::OracleNetwork o = tl::generate_oracle(12, 3, {4, 4, 4}, tl::OverlapMode::kRandom, 23);
  o.noise_sigma = 0.0;
  const tl::SampleSet data = tl::sample_dataset(o, 80, 3);
  CHECK(tl::masked_gradient(o.weights, data).values().cwiseAbs().maxCoeff() <
        1e-13);
}

TEST_CASE("gradient matches central finite differences on random instances") {
  tl::Rng rng(99);
  for (int trial = 0; trial < 25; ++trial) {
    const Instance inst = random_instance(rng);
    const MatrixXd g = tl::masked_gradient(inst.W, inst.data).values();
    const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
    for (int j = 0; j < inst.W.K(); ++j)
      for (int i : inst.W.mask().support(j)) {
        const double fd = fd_gradient(inst.W, inst.data, i, j, 1e-6);
        CHECK(std::abs(g(i, j) - fd) / scale < 1e-5);
      }
  }
}

TEST_CASE("hessian hand example is the all-ones 2x2") {
  // K=1, d=2, w=(1,0), x=(1,1): Gauss-Newton H = x x^T (K=1, active unit)
  MatrixXd w(2, 1);
  w << 1.0, 0.0;
  MatrixXd X(1, 2);
  X << 1.0, 1.0;
  VectorXd y(1);
  y << 2.0;
  const MatrixXd H =
      tl::hessian(tl::WeightMatrix(w, tl::MaskMatrix::full(2, 1)), tl::SampleSet(X, y));
  REQUIRE(H.rows() == 2);
  CHECK(H(0, 0) == doctest::Approx(1.0));
  CHECK(H(0, 1) == doctest::Approx(1.0));
  CHECK(H(1, 0) == doctest::Approx(1.0));
  CHECK(H(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("hessian is PSD and matches finite-differenced gradients") {
  tl::Rng rng(123);
  for (int trial = 0; trial < 10; ++trial) {
    const Instance inst = random_instance(rng, 10, 3, 30);
    const MatrixXd H = tl::hessian(inst.W, inst.data);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(H);
    CHECK(es.eigenvalues().minCoeff() > -1e-10);

    // column-major free-coordinate ordering, matching hessian()
    std::vector<std::pair<int, int>> coords;
    for (int j = 0; j < inst.W.K(); ++j)
      for (int i : inst.W.mask().support(j)) coords.emplace_back(i, j);
    const double h = 1e-6;
    const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
    for (size_t b = 0; b < coords.size(); ++b) {
      MatrixXd plus = inst.W.values(), minus = inst.W.values();
      plus(coords[b].first, coords[b].second) += h;
      minus(coords[b].first, coords[b].second) -= h;
      const MatrixXd gp = tl::masked_gradient(tl::WeightMatrix(plus, inst.W.mask()), inst.data).values();
      const MatrixXd gm = tl::masked_gradient(tl::WeightMatrix(minus, inst.W.mask()), inst.data).values();
      for (size_t a = 0; a < coords.size(); ++a) {
        const double fd = (gp(coords[a].first, coords[a].second) -
                           gm(coords[a].first, coords[a].second)) /
                          (2.0 * h);
        CHECK(std::abs(H(a, b) - fd) / scale < 1e-4);
      }
    }
  }
}

TEST_CASE("hessian_probe: positive definite near W*, rank deficient at N=1") {
  tl::OracleNetwork o = tl::generate_oracle(20, 3, {5, 5, 5}, tl::OverlapMode::kRandom, 61);
  o.noise_sigma = 0.0;
  const tl::SampleSet data = tl::sample_dataset(o, 2000, 7);
  const tl::HessianProbe probe = tl::hessian_probe(o.weights, data, o.weights);
  CHECK(probe.n_params == 15);
  CHECK(probe.location_error == doctest::Approx(0.0));
  CHECK(probe.lambda_min > 0.0);
  CHECK(probe.lambda_max >= probe.lambda_min);
  CHECK(probe.lambda_max / probe.lambda_min < 1e4);  // two-sided bound sanity

  const tl::SampleSet one(data.inputs.topRows(1), data.labels.head(1));
  const tl::HessianProbe rank1 = tl::hessian_probe(o.weights, one, o.weights);
  CHECK(rank1.lambda_min == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("dense and matrix-free extreme eigenvalues agree") {
  tl::OracleNetwork o = tl::generate_oracle(25, 2, {25, 25}, tl::OverlapMode::kRandom, 77);
  o.noise_sigma = 0.0;
  const tl::SampleSet data = tl::sample_dataset(o, 300, 5);
  const tl::HessianProbe dense = tl::hessian_probe(o.weights, data, o.weights);
  const auto [lo, hi] = tl::extreme_eigenvalues_matfree(o.weights, data);
  CHECK(std::abs(hi - dense.lambda_max) / dense.lambda_max < 1e-6);
  CHECK(std::abs(lo - dense.lambda_min) / dense.lambda_max < 1e-6);
}

TEST_CASE("hessian densify cap throws with guidance") {
  const tl::OracleNetwork o = tl::generate_oracle(30, 2, {20, 20}, tl::OverlapMode::kRandom, 2);
  const tl::SampleSet data = tl::sample_dataset(o, 10, 1);
  CHECK_THROWS(tl::hessian(o.weights, data, 16));
}

}  // TEST_SUITE
