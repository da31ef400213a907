#pragma once

#include "ticketlab/model.hpp"

namespace ticketlab {

// Extreme-eigenvalue snapshot of the risk Hessian at one probe point.
struct HessianProbe {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  int n_params = 0;          // free coordinates (ones in the mask)
  double location_error = 0.0;  // relative distance of the probe point from aligned W*
};

double empirical_risk(const WeightMatrix& W, const SampleSet& data);

WeightMatrix masked_gradient(const WeightMatrix& W, const SampleSet& data);

// Dense Hessian restricted to the mask's free coordinates, Gauss-Newton
// form. PSD by construction. Throws when the free-coordinate count exceeds
// densify_cap.
Eigen::MatrixXd hessian(const WeightMatrix& W, const SampleSet& data, int densify_cap = 5000);

HessianProbe hessian_probe(const WeightMatrix& W, const SampleSet& data,
                           const WeightMatrix& W_star, int densify_cap = 5000);

// Matrix-free extreme eigenvalues of the same operator via Lanczos
// iteration; for cross-checks and instances past the densification cap.
// Returns {lambda_min, lambda_max}.
std::pair<double, double> extreme_eigenvalues_matfree(const WeightMatrix& W,
                                                      const SampleSet& data,
                                                      double rel_tol = 1e-8,
                                                      int max_iters_per_param = 10);

}  // namespace ticketlab
