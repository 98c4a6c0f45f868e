#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ticopd/dataset.hpp"

namespace ticopd {

using VecRef = Eigen::Ref<const Eigen::VectorXd>;

/// Sum-separable objective f(x) = (1/n) sum_i f_i(x) over n agents, each
/// f_i : R^d -> R smooth. Implementations are immutable after construction
/// and safe to evaluate concurrently.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::string name() const = 0;
  std::size_t agents() const { return n_; }
  std::size_t dim() const { return d_; }

  virtual double loss(std::size_t agent, const VecRef& x) const = 0;
  virtual Eigen::VectorXd gradient(std::size_t agent, const VecRef& x) const = 0;

  double global_loss(const VecRef& x) const;
  Eigen::VectorXd global_gradient(const VecRef& x) const;

  /// Smoothness constant L shared by all f_i.
  double smoothness() const { return L_; }
  /// False when L is a configured guess rather than a proven bound.
  bool smoothness_certified() const { return L_certified_; }

  /// Optimal value of f, when known in closed form.
  const std::optional<double>& f_star() const { return f_star_; }
  const std::optional<Eigen::VectorXd>& minimizer() const { return minimizer_; }

  virtual bool is_classifier() const { return false; }
  /// Fraction of `data` classified correctly by parameters x.
  virtual double accuracy(const VecRef& x, const Dataset& data) const;

 protected:
  Objective(std::size_t n, std::size_t d) : n_(n), d_(d) {}
  void check(std::size_t agent, const VecRef& x) const;

  std::size_t n_;
  std::size_t d_;
  double L_ = 0.0;
  bool L_certified_ = true;
  std::optional<double> f_star_;
  std::optional<Eigen::VectorXd> minimizer_;
};

/// f_i(x) = 1/2 ||x - c_i||^2. Centers are the columns of `centers` (d x n).
class QuadraticConsensus final : public Objective {
 public:
  explicit QuadraticConsensus(Eigen::MatrixXd centers);
  std::string name() const override { return "quadratic"; }
  double loss(std::size_t agent, const VecRef& x) const override;
  Eigen::VectorXd gradient(std::size_t agent, const VecRef& x) const override;
  const Eigen::MatrixXd& centers() const { return centers_; }

 private:
  Eigen::MatrixXd centers_;
};

/// f_i(x) = 1/2 ||A_i x - b_i||^2.
class LeastSquares final : public Objective {
 public:
  LeastSquares(std::vector<Eigen::MatrixXd> A, std::vector<Eigen::VectorXd> b);
  std::string name() const override { return "least_squares"; }
  double loss(std::size_t agent, const VecRef& x) const override;
  Eigen::VectorXd gradient(std::size_t agent, const VecRef& x) const override;
  /// False when the stacked system is rank deficient; f_star is still the
  /// minimum value, the stored minimizer is the minimum-norm one.
  bool unique_minimizer() const { return unique_; }

 private:
  std::vector<Eigen::MatrixXd> A_;
  std::vector<Eigen::VectorXd> b_;
  bool unique_ = true;
};

/// Mean cross-entropy over each agent's shard plus (l2/2)||x||^2.
/// Two classes use a sigmoid model with d = p; more classes use softmax with
/// d = C p, parameters stored as a p x C column-major matrix.
class LogisticRegression final : public Objective {
 public:
  LogisticRegression(const Dataset& data, const DataPartition& partition, double l2);
  std::string name() const override { return "logistic"; }
  double loss(std::size_t agent, const VecRef& x) const override;
  Eigen::VectorXd gradient(std::size_t agent, const VecRef& x) const override;
  bool is_classifier() const override { return true; }
  double accuracy(const VecRef& x, const Dataset& data) const override;
  int num_classes() const { return classes_; }

 private:
  bool binary() const { return classes_ == 2; }

  std::vector<Eigen::MatrixXd> shards_;  // p x m_i
  std::vector<std::vector<int>> labels_;
  int classes_;
  double l2_;
};

struct MlpShape {
  std::size_t in = 0;
  std::size_t hidden = 0;
  std::size_t out = 0;
  std::size_t parameters() const { return hidden * in + hidden + out * hidden + out; }
};

/// Default smoothness guess for the network, which has no cheap global bound.
inline constexpr double kDefaultMlpSmoothness = 10.0;

/// in -> hidden (sigmoid) -> out (softmax) network with cross-entropy loss.
/// Parameter layout: W1 (hidden x in), b1, W2 (out x hidden), b2; matrices
/// column-major.
class TwoLayerMlp final : public Objective {
 public:
  TwoLayerMlp(MlpShape shape, const Dataset& data, const DataPartition& partition,
              double smoothness = kDefaultMlpSmoothness, double l2 = 0.0);
  std::string name() const override { return "mlp"; }
  double loss(std::size_t agent, const VecRef& x) const override;
  Eigen::VectorXd gradient(std::size_t agent, const VecRef& x) const override;
  bool is_classifier() const override { return true; }
  double accuracy(const VecRef& x, const Dataset& data) const override;

  /// Hidden activations for a batch of inputs (columns).
  Eigen::MatrixXd hidden_activations(const VecRef& x, const Eigen::MatrixXd& inputs) const;
  /// Softmax outputs for a batch of inputs (columns).
  Eigen::MatrixXd forward(const VecRef& x, const Eigen::MatrixXd& inputs) const;
  const MlpShape& shape() const { return shape_; }

 private:
  MlpShape shape_;
  std::vector<Eigen::MatrixXd> shards_;
  std::vector<std::vector<int>> labels_;
  double l2_;
};

std::unique_ptr<QuadraticConsensus> quadratic_consensus(Eigen::MatrixXd centers);
std::unique_ptr<LeastSquares> least_squares(std::vector<Eigen::MatrixXd> A,
                                            std::vector<Eigen::VectorXd> b);
std::unique_ptr<LogisticRegression> logistic_regression(const Dataset& data,
                                                        const DataPartition& partition, double l2);
std::unique_ptr<TwoLayerMlp> two_layer_mlp(MlpShape shape, const Dataset& data,
                                           const DataPartition& partition,
                                           double smoothness = kDefaultMlpSmoothness);

/// max_{i,j} ||grad f_i(x) - grad f_j(x)||, a heterogeneity measure.
double gradient_dispersion(const Objective& obj, const VecRef& x);

}  // namespace ticopd
