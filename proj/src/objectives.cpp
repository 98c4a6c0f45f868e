#include "ticopd/objectives.hpp"

#include <cmath>
#include <stdexcept>

namespace ticopd {

namespace {

double largest_eigenvalue(const Eigen::MatrixXd& symmetric) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetric, Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(solver.eigenvalues().size() - 1);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Column-wise softmax in place; returns per-column log-sum-exp.
Eigen::VectorXd softmax_columns(Eigen::MatrixXd& scores) {
  Eigen::VectorXd lse(scores.cols());
  for (Eigen::Index j = 0; j < scores.cols(); ++j) {
    const double mx = scores.col(j).maxCoeff();
    scores.col(j) = (scores.col(j).array() - mx).exp();
    const double sum = scores.col(j).sum();
    scores.col(j) /= sum;
    lse(j) = mx + std::log(sum);
  }
  return lse;
}

void split_data(const Dataset& data, const DataPartition& partition,
                std::vector<Eigen::MatrixXd>& shards, std::vector<std::vector<int>>& labels) {
  for (const auto& idx : partition.shards) {
    if (idx.empty()) throw std::invalid_argument("agent has an empty data shard");
    Dataset part = subset(data, idx);
    shards.push_back(std::move(part.features));
    labels.push_back(std::move(part.labels));
  }
}

Eigen::MatrixXd one_hot(const std::vector<int>& labels, int classes) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(classes, static_cast<Eigen::Index>(labels.size()));
  for (std::size_t j = 0; j < labels.size(); ++j) y(labels[j], static_cast<Eigen::Index>(j)) = 1.0;
  return y;
}

int argmax(const Eigen::Ref<const Eigen::VectorXd>& v) {
  Eigen::Index best = 0;
  v.maxCoeff(&best);
  return static_cast<int>(best);
}

}  // namespace

void Objective::check(std::size_t agent, const VecRef& x) const {
  if (agent >= n_) throw std::out_of_range("agent index out of range");
  if (static_cast<std::size_t>(x.size()) != d_)
    throw std::invalid_argument("parameter dimension " + std::to_string(x.size()) +
                                " does not match objective dimension " + std::to_string(d_));
}

double Objective::global_loss(const VecRef& x) const {
  double sum = 0.0;
  for (std::size_t i = 0; i < n_; ++i) sum += loss(i, x);
  return sum / static_cast<double>(n_);
}

Eigen::VectorXd Objective::global_gradient(const VecRef& x) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d_));
  for (std::size_t i = 0; i < n_; ++i) g += gradient(i, x);
  return g / static_cast<double>(n_);
}

double Objective::accuracy(const VecRef&, const Dataset&) const {
  throw std::logic_error(name() + " is not a classification objective");
}

// ---------------------------------------------------------------------------

QuadraticConsensus::QuadraticConsensus(Eigen::MatrixXd centers)
    : Objective(static_cast<std::size_t>(centers.cols()), static_cast<std::size_t>(centers.rows())),
      centers_(std::move(centers)) {
  if (n_ < 1 || d_ < 1) throw std::invalid_argument("quadratic objective needs centers");
  L_ = 1.0;
  const Eigen::VectorXd mean = centers_.rowwise().mean();
  minimizer_ = mean;
  f_star_ = global_loss(mean);
}

double QuadraticConsensus::loss(std::size_t agent, const VecRef& x) const {
  check(agent, x);
  return 0.5 * (x - centers_.col(static_cast<Eigen::Index>(agent))).squaredNorm();
}

Eigen::VectorXd QuadraticConsensus::gradient(std::size_t agent, const VecRef& x) const {
  check(agent, x);
  return x - centers_.col(static_cast<Eigen::Index>(agent));
}

// ---------------------------------------------------------------------------

LeastSquares::LeastSquares(std::vector<Eigen::MatrixXd> A, std::vector<Eigen::VectorXd> b)
    : Objective(A.size(), A.empty() ? 0 : static_cast<std::size_t>(A.front().cols())),
      A_(std::move(A)),
      b_(std::move(b)) {
  if (A_.empty() || A_.size() != b_.size())
    throw std::invalid_argument("least squares needs one (A_i, b_i) per agent");
  Eigen::Index rows = 0;
  for (std::size_t i = 0; i < A_.size(); ++i) {
    if (static_cast<std::size_t>(A_[i].cols()) != d_ || A_[i].rows() != b_[i].size())
      throw std::invalid_argument("inconsistent least-squares shapes for agent " +
                                  std::to_string(i));
    rows += A_[i].rows();
    L_ = std::max(L_, largest_eigenvalue(A_[i].transpose() * A_[i]));
  }
  Eigen::MatrixXd stacked(rows, static_cast<Eigen::Index>(d_));
  Eigen::VectorXd rhs(rows);
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < A_.size(); ++i) {
    stacked.middleRows(r, A_[i].rows()) = A_[i];
    rhs.segment(r, A_[i].rows()) = b_[i];
    r += A_[i].rows();
  }
  const auto cod = stacked.completeOrthogonalDecomposition();
  unique_ = cod.rank() == static_cast<Eigen::Index>(d_);
  const Eigen::VectorXd xs = cod.solve(rhs);
  minimizer_ = xs;
  f_star_ = global_loss(xs);
}

double LeastSquares::loss(std::size_t agent, const VecRef& x) const {
  check(agent, x);
  return 0.5 * (A_[agent] * x - b_[agent]).squaredNorm();
}

Eigen::VectorXd LeastSquares::gradient(std::size_t agent, const VecRef& x) const {
  check(agent, x);
  return A_[agent].transpose() * (A_[agent] * x - b_[agent]);
}

// ---------------------------------------------------------------------------

LogisticRegression::LogisticRegression(const Dataset& data, const DataPartition& partition,
                                       double l2)
    : Objective(partition.shards.size(),
                data.num_classes == 2 ? data.feature_dim()
                                      : data.feature_dim() * static_cast<std::size_t>(data.num_classes)),
      classes_(data.num_classes),
      l2_(l2) {
  if (classes_ < 2) throw std::invalid_argument("logistic regression needs >= 2 classes");
  if (l2 < 0) throw std::invalid_argument("l2 must be non-negative");
  for (int y : data.labels)
    if (y < 0 || y >= classes_) throw std::invalid_argument("label out of range");
  split_data(data, partition, shards_, labels_);
  // Softmax cross-entropy curvature is at most 1/2 per sample (1/4 for the
  // sigmoid), times the largest eigenvalue of the shard's second moment.
  const double curvature = binary() ? 0.25 : 0.5;
  for (const auto& f : shards_) {
    const double m = static_cast<double>(f.cols());
    L_ = std::max(L_, curvature * largest_eigenvalue(f * f.transpose()) / m + l2_);
  }
}

double LogisticRegression::loss(std::size_t agent, const VecRef& x) const {
  check(agent, x);
  const auto& f = shards_[agent];
  const auto& y = labels_[agent];
  const double m = static_cast<double>(f.cols());
  double sum = 0.0;
  if (binary()) {
    const Eigen::VectorXd z = f.transpose() * x;
    for (Eigen::Index j = 0; j < z.size(); ++j)
      sum += softplus(z(j)) - (y[static_cast<std::size_t>(j)] == 1 ? z(j) : 0.0);
  } else {
    const Eigen::Map<const Eigen::MatrixXd> w(x.data(), f.rows(), classes_);
    Eigen::MatrixXd scores = w.transpose() * f;
    Eigen::MatrixXd probs = scores;
    const Eigen::VectorXd lse = softmax_columns(probs);
    for (Eigen::Index j = 0; j < scores.cols(); ++j)
      sum += lse(j) - scores(y[static_cast<std::size_t>(j)], j);
  }
  return sum / m + 0.5 * l2_ * x.squaredNorm();
}

Eigen::VectorXd LogisticRegression::gradient(std::size_t agent, const VecRef& x) const {
  check(agent, x);
  const auto& f = shards_[agent];
  const auto& y = labels_[agent];
  const double m = static_cast<double>(f.cols());
  if (binary()) {
    Eigen::VectorXd r = f.transpose() * x;
    for (Eigen::Index j = 0; j < r.size(); ++j)
      r(j) = sigmoid(r(j)) - (y[static_cast<std::size_t>(j)] == 1 ? 1.0 : 0.0);
    return f * r / m + l2_ * x;
  }
  const Eigen::Map<const Eigen::MatrixXd> w(x.data(), f.rows(), classes_);
  Eigen::MatrixXd probs = w.transpose() * f;
  softmax_columns(probs);
  for (Eigen::Index j = 0; j < probs.cols(); ++j) probs(y[static_cast<std::size_t>(j)], j) -= 1.0;
  Eigen::MatrixXd g = f * probs.transpose() / m;
  return Eigen::Map<const Eigen::VectorXd>(g.data(), g.size()) + l2_ * x;
}

double LogisticRegression::accuracy(const VecRef& x, const Dataset& data) const {
  if (static_cast<std::size_t>(x.size()) != d_) throw std::invalid_argument("dimension mismatch");
  if (data.size() == 0) throw std::invalid_argument("empty evaluation set");
  std::size_t correct = 0;
  if (binary()) {
    const Eigen::VectorXd z = data.features.transpose() * x;
    for (std::size_t j = 0; j < data.size(); ++j)
      correct += ((z(static_cast<Eigen::Index>(j)) > 0.0 ? 1 : 0) == data.labels[j]) ? 1 : 0;
  } else {
    const Eigen::Map<const Eigen::MatrixXd> w(x.data(), data.features.rows(), classes_);
    const Eigen::MatrixXd scores = w.transpose() * data.features;
    for (std::size_t j = 0; j < data.size(); ++j)
      correct += argmax(scores.col(static_cast<Eigen::Index>(j))) == data.labels[j] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------

namespace {

struct MlpView {
  Eigen::Map<const Eigen::MatrixXd> w1;
  Eigen::Map<const Eigen::VectorXd> b1;
  Eigen::Map<const Eigen::MatrixXd> w2;
  Eigen::Map<const Eigen::VectorXd> b2;

  MlpView(const MlpShape& s, const double* p)
      : w1(p, static_cast<Eigen::Index>(s.hidden), static_cast<Eigen::Index>(s.in)),
        b1(p + s.hidden * s.in, static_cast<Eigen::Index>(s.hidden)),
        w2(p + s.hidden * s.in + s.hidden, static_cast<Eigen::Index>(s.out),
           static_cast<Eigen::Index>(s.hidden)),
        b2(p + s.hidden * s.in + s.hidden + s.out * s.hidden, static_cast<Eigen::Index>(s.out)) {}
};

Eigen::MatrixXd sigmoid_layer(const MlpView& v, const Eigen::MatrixXd& inputs) {
  Eigen::MatrixXd h = v.w1 * inputs;
  h.colwise() += v.b1;
  return h.unaryExpr([](double z) { return sigmoid(z); });
}

}  // namespace

TwoLayerMlp::TwoLayerMlp(MlpShape shape, const Dataset& data, const DataPartition& partition,
                         double smoothness, double l2)
    : Objective(partition.shards.size(), shape.parameters()), shape_(shape), l2_(l2) {
  if (shape.in == 0 || shape.hidden == 0 || shape.out < 2)
    throw std::invalid_argument("invalid network shape");
  if (data.feature_dim() != shape.in)
    throw std::invalid_argument("input width does not match feature dimension");
  if (static_cast<int>(shape.out) < data.num_classes)
    throw std::invalid_argument("output width smaller than the number of classes");
  if (!(smoothness > 0)) throw std::invalid_argument("smoothness must be positive");
  split_data(data, partition, shards_, labels_);
  L_ = smoothness;
  L_certified_ = false;
}

Eigen::MatrixXd TwoLayerMlp::hidden_activations(const VecRef& x,
                                                const Eigen::MatrixXd& inputs) const {
  if (static_cast<std::size_t>(x.size()) != d_) throw std::invalid_argument("dimension mismatch");
  return sigmoid_layer(MlpView(shape_, x.data()), inputs);
}

Eigen::MatrixXd TwoLayerMlp::forward(const VecRef& x, const Eigen::MatrixXd& inputs) const {
  const MlpView v(shape_, x.data());
  Eigen::MatrixXd s = v.w2 * hidden_activations(x, inputs);
  s.colwise() += v.b2;
  softmax_columns(s);
  return s;
}

double TwoLayerMlp::loss(std::size_t agent, const VecRef& x) const {
  check(agent, x);
  const MlpView v(shape_, x.data());
  const auto& y = labels_[agent];
  Eigen::MatrixXd scores = v.w2 * sigmoid_layer(v, shards_[agent]);
  scores.colwise() += v.b2;
  Eigen::MatrixXd probs = scores;
  const Eigen::VectorXd lse = softmax_columns(probs);
  double sum = 0.0;
  for (Eigen::Index j = 0; j < scores.cols(); ++j) sum += lse(j) - scores(y[static_cast<std::size_t>(j)], j);
  return sum / static_cast<double>(scores.cols()) + 0.5 * l2_ * x.squaredNorm();
}

Eigen::VectorXd TwoLayerMlp::gradient(std::size_t agent, const VecRef& x) const {
  check(agent, x);
  const MlpView v(shape_, x.data());
  const auto& f = shards_[agent];
  const double m = static_cast<double>(f.cols());
  const Eigen::MatrixXd h = sigmoid_layer(v, f);
  Eigen::MatrixXd ds = v.w2 * h;
  ds.colwise() += v.b2;
  softmax_columns(ds);
  ds -= one_hot(labels_[agent], static_cast<int>(shape_.out));
  ds /= m;
  const Eigen::MatrixXd dh = ((v.w2.transpose() * ds).array() * h.array() * (1.0 - h.array())).matrix();

  Eigen::VectorXd g(static_cast<Eigen::Index>(d_));
  std::size_t off = 0;
  auto put = [&](const Eigen::MatrixXd& block) {
    g.segment(static_cast<Eigen::Index>(off), block.size()) =
        Eigen::Map<const Eigen::VectorXd>(block.data(), block.size());
    off += static_cast<std::size_t>(block.size());
  };
  put(dh * f.transpose());
  put(dh.rowwise().sum());
  put(ds * h.transpose());
  put(ds.rowwise().sum());
  return g + l2_ * x;
}

double TwoLayerMlp::accuracy(const VecRef& x, const Dataset& data) const {
  if (data.size() == 0) throw std::invalid_argument("empty evaluation set");
  const Eigen::MatrixXd p = forward(x, data.features);
  std::size_t correct = 0;
  for (std::size_t j = 0; j < data.size(); ++j)
    correct += argmax(p.col(static_cast<Eigen::Index>(j))) == data.labels[j] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------

std::unique_ptr<QuadraticConsensus> quadratic_consensus(Eigen::MatrixXd centers) {
  return std::make_unique<QuadraticConsensus>(std::move(centers));
}

std::unique_ptr<LeastSquares> least_squares(std::vector<Eigen::MatrixXd> A,
                                            std::vector<Eigen::VectorXd> b) {
  return std::make_unique<LeastSquares>(std::move(A), std::move(b));
}

std::unique_ptr<LogisticRegression> logistic_regression(const Dataset& data,
                                                        const DataPartition& partition, double l2) {
  return std::make_unique<LogisticRegression>(data, partition, l2);
}

std::unique_ptr<TwoLayerMlp> two_layer_mlp(MlpShape shape, const Dataset& data,
                                           const DataPartition& partition, double smoothness) {
  return std::make_unique<TwoLayerMlp>(shape, data, partition, smoothness);
}

double gradient_dispersion(const Objective& obj, const VecRef& x) {
  std::vector<Eigen::VectorXd> grads;
  for (std::size_t i = 0; i < obj.agents(); ++i) grads.push_back(obj.gradient(i, x));
  double worst = 0.0;
  for (std::size_t i = 0; i < grads.size(); ++i)
    for (std::size_t j = i + 1; j < grads.size(); ++j)
      worst = std::max(worst, (grads[i] - grads[j]).norm());
  return worst;
}

}  // namespace ticopd
