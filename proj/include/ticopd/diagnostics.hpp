#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ticopd/compression.hpp"
#include "ticopd/dataset.hpp"
#include "ticopd/objectives.hpp"
#include "ticopd/stepsizes.hpp"
#include "ticopd/topology.hpp"

namespace ticopd {

/// One recorded iteration. Stacked quantities are d x n matrices with one
/// column per agent.
struct MetricsRow {
  std::size_t t = 0;
  double loss_max = 0.0;       // max_i f(X_i)
  double grad_norm_avg = 0.0;  // ||grad f(x_bar)||^2
  double consensus_err = 0.0;  // sum_i ||X_i - x_bar||^2
  std::uint64_t bits_cum = 0;
  std::optional<double> lyapunov;
  std::optional<double> test_acc;  // worst-agent held-out accuracy
  double surrogate_gap = 0.0;      // ||Xhat - X||^2, not part of the CSV
};

/// sum_i ||X_i - mean||^2.
double consensus_error(const Eigen::MatrixXd& X);

/// Applies the centering projector (I - 11^T/n) (x) I_d: subtracts the
/// agent mean from every column.
Eigen::MatrixXd center(const Eigen::MatrixXd& X);

/// <X, V>_K = (K X) . (K V).
double centered_inner(const Eigen::MatrixXd& X, const Eigen::MatrixXd& V);

/// ||V||^2 weighted by (Q (x) I_d) for an n x n matrix Q: sum_ij Q_ij <V_i, V_j>.
double weighted_norm2(const Eigen::MatrixXd& V, const Eigen::MatrixXd& Q);

/// v = alpha (lambda_i + grad f_i(x_bar)) stacked over agents.
Eigen::MatrixXd auxiliary_v(const Eigen::MatrixXd& lambda, const Objective& objective,
                            const Eigen::VectorXd& x_bar, double alpha);

/// Step-size conditions and Lyapunov weights of the convergence theorem.
struct TheoremConstants {
  double delta = 0.0;
  double eta = 0.0;
  double rho1 = 0.0;
  double rho2 = 0.0;
  double L = 0.0;
  double n = 0.0;
  double M = 0.0;
  double a = 1.0;

  double delta_tilde = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double theta_lb = 0.0;
  double alpha_ub = 0.0;  // alpha_upper_bound(theta_lb)

  /// max{16 eta, delta} / (320 theta^2) * min{1/M^2, n a / M^2, 1/rho1^2}.
  double alpha_upper_bound(double theta) const;
};

/// Throws std::invalid_argument unless delta in (0, 1] and every other input
/// is positive.
TheoremConstants theorem_constants(double delta, double eta, double rho1, double rho2, double L,
                                   std::size_t n, double M, double a = 1.0);

/// Lyapunov value
///   f(x_bar) - f* + a/(eta alpha) ||v||^2_{Q + alpha c K} + a ||X||^2_K
///   + delta1 a <X, v>_K + delta2 a ||Xhat - X||^2,
/// with c = (delta1/2)(theta + eta) - theta - delta2 theta. Throws
/// std::invalid_argument when the objective has no known optimum.
double lyapunov(const Eigen::MatrixXd& X, const Eigen::MatrixXd& lambda, const Eigen::MatrixXd& Xhat,
                const Objective& objective, const SpectralInfo& spectral,
                const TheoremConstants& constants, const StepSizes& steps);

/// Bits for one broadcast round: agent i's message goes to each neighbor.
std::uint64_t round_bits(const Graph& g, const std::vector<std::size_t>& message_bits_per_agent);

/// Running total of transmitted bits.
class BitCounter {
 public:
  void add(std::uint64_t bits) { total_ += bits; }
  void add_round(const Graph& g, const std::vector<EncodedMessage>& broadcast);
  std::uint64_t total() const { return total_; }

 private:
  std::uint64_t total_ = 0;
};

/// Minimum over agents of held-out accuracy of each agent's parameters.
/// Throws std::logic_error for objectives that are not classifiers.
double test_accuracy(const Objective& objective, const Eigen::MatrixXd& X, const Dataset& test);

}  // namespace ticopd
