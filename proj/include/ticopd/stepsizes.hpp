#pragma once

namespace ticopd {

/// Primal-dual step sizes. alpha and beta are derived:
///   alpha = 1 / (1/alpha_tilde + theta M),  beta = alpha / alpha_tilde.
struct StepSizes {
  double alpha_tilde = 0.0;  // proximal weight
  double theta = 0.0;        // augmentation weight
  double eta = 0.0;          // dual step
  double gamma = 1.0;        // surrogate step in (0, 1]
  double alpha = 0.0;
  double beta = 0.0;
};

/// Throws std::invalid_argument unless alpha_tilde, eta, M > 0, theta >= 0
/// and gamma in (0, 1]. theta = 0 yields the unaugmented step alpha =
/// alpha_tilde, beta = 1.
StepSizes compute_stepsizes(double alpha_tilde, double theta, double eta, double gamma, double M);

}  // namespace ticopd
