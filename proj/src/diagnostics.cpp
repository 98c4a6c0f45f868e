#include "ticopd/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ticopd {

Eigen::MatrixXd center(const Eigen::MatrixXd& X) {
  const Eigen::VectorXd mean = X.rowwise().mean();
  return X.colwise() - mean;
}

double consensus_error(const Eigen::MatrixXd& X) {
  if (X.cols() == 0) return 0.0;
  return center(X).squaredNorm();
}

double centered_inner(const Eigen::MatrixXd& X, const Eigen::MatrixXd& V) {
  return center(X).cwiseProduct(center(V)).sum();
}

double weighted_norm2(const Eigen::MatrixXd& V, const Eigen::MatrixXd& Q) {
  if (Q.rows() != V.cols() || Q.cols() != V.cols())
    throw std::invalid_argument("weight matrix does not match agent count");
  return (V * Q).cwiseProduct(V).sum();
}

Eigen::MatrixXd auxiliary_v(const Eigen::MatrixXd& lambda, const Objective& objective,
                            const Eigen::VectorXd& x_bar, double alpha) {
  Eigen::MatrixXd v(lambda.rows(), lambda.cols());
  for (Eigen::Index i = 0; i < lambda.cols(); ++i)
    v.col(i) = alpha * (lambda.col(i) + objective.gradient(static_cast<std::size_t>(i), x_bar));
  return v;
}

double TheoremConstants::alpha_upper_bound(double theta) const {
  if (!(theta > 0)) throw std::invalid_argument("theta must be positive");
  const double scale = std::min({1.0 / (M * M), n * a / (M * M), 1.0 / (rho1 * rho1)});
  return std::max(16.0 * eta, delta) / (320.0 * theta * theta) * scale;
}

TheoremConstants theorem_constants(double delta, double eta, double rho1, double rho2, double L,
                                   std::size_t n, double M, double a) {
  if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must lie in (0, 1]");
  if (!(eta > 0 && rho1 > 0 && rho2 > 0 && L > 0 && n > 0 && M > 0 && a > 0))
    throw std::invalid_argument("theorem constants need positive inputs");
  TheoremConstants c;
  c.delta = delta;
  c.eta = eta;
  c.rho1 = rho1;
  c.rho2 = rho2;
  c.L = L;
  c.n = static_cast<double>(n);
  c.M = M;
  c.a = a;

  const double q = (1.0 - delta) * (1.0 - delta);
  const double h = (1.0 - delta / 2.0) * (1.0 - delta / 2.0);
  c.delta_tilde = std::max(q * h / (h - q), 1.0);
  c.delta2 = std::max(16.0 * eta / delta, 1.0);
  c.delta1 = 12.0 * std::max({2.0, 2.0 / (rho2 * eta), c.delta2 * c.delta_tilde});
  c.theta_lb = std::max(
      4.0 * L * L / (c.n * rho2 * a),
      2.0 / rho2 *
          (1.0 + 2.0 * L + 8.0 * eta * rho1 * rho1 / rho2 +
           c.delta1 * (1.5 + 3.0 * L * L + eta * rho1 + rho1 * rho1 / 2.0)));
  c.alpha_ub = c.alpha_upper_bound(c.theta_lb);
  return c;
}

double lyapunov(const Eigen::MatrixXd& X, const Eigen::MatrixXd& lambda, const Eigen::MatrixXd& Xhat,
                const Objective& objective, const SpectralInfo& spectral,
                const TheoremConstants& constants, const StepSizes& steps) {
  if (!objective.f_star()) throw std::invalid_argument("lyapunov needs a known optimal value");
  const double a = constants.a;
  const double alpha = steps.alpha;
  const double theta = steps.theta;
  const double eta = steps.eta;
  const Eigen::VectorXd x_bar = X.rowwise().mean();
  const Eigen::MatrixXd v = auxiliary_v(lambda, objective, x_bar, alpha);

  const double k_weight =
      constants.delta1 / 2.0 * (theta + eta) - theta - constants.delta2 * theta;
  const double v_norm2 =
      weighted_norm2(v, spectral.laplacian_pinv) + alpha * k_weight * center(v).squaredNorm();

  return objective.global_loss(x_bar) - *objective.f_star() + a / (eta * alpha) * v_norm2 +
         a * consensus_error(X) + constants.delta1 * a * centered_inner(X, v) +
         constants.delta2 * a * (Xhat - X).squaredNorm();
}

std::uint64_t round_bits(const Graph& g, const std::vector<std::size_t>& message_bits_per_agent) {
  if (message_bits_per_agent.size() != g.num_nodes())
    throw std::invalid_argument("one message size per agent expected");
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < g.num_nodes(); ++i)
    total += static_cast<std::uint64_t>(g.degree(i)) * message_bits_per_agent[i];
  return total;
}

void BitCounter::add_round(const Graph& g, const std::vector<EncodedMessage>& broadcast) {
  std::vector<std::size_t> bits;
  bits.reserve(broadcast.size());
  for (const auto& m : broadcast) bits.push_back(m.bit_length);
  add(round_bits(g, bits));
}

double test_accuracy(const Objective& objective, const Eigen::MatrixXd& X, const Dataset& test) {
  if (!objective.is_classifier())
    throw std::logic_error(objective.name() + " is not a classification objective");
  double worst = 1.0;
  for (Eigen::Index i = 0; i < X.cols(); ++i)
    worst = std::min(worst, objective.accuracy(X.col(i), test));
  return worst;
}

}  // namespace ticopd
