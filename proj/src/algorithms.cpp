#include "ticopd/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ticopd {

namespace {

Eigen::MatrixXd stack(const NetworkState& state, Eigen::VectorXd AgentState::*field) {
  if (state.empty()) return {};
  Eigen::MatrixXd out((state.front().*field).size(), static_cast<Eigen::Index>(state.size()));
  for (std::size_t i = 0; i < state.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = state[i].*field;
  return out;
}

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

AlgorithmKind parse_algorithm_kind(const std::string& name) {
  if (name == "ticopd") return AlgorithmKind::TiCoPD;
  if (name == "exact_pd") return AlgorithmKind::ExactPD;
  if (name == "dgd") return AlgorithmKind::Dgd;
  if (name == "dgd_quantized") return AlgorithmKind::DgdQuantized;
  if (name == "choco") return AlgorithmKind::Choco;
  throw std::invalid_argument("unknown algorithm: " + name);
}

std::string to_string(AlgorithmKind kind) {
  switch (kind) {
    case AlgorithmKind::TiCoPD: return "ticopd";
    case AlgorithmKind::ExactPD: return "exact_pd";
    case AlgorithmKind::Dgd: return "dgd";
    case AlgorithmKind::DgdQuantized: return "dgd_quantized";
    case AlgorithmKind::Choco: return "choco";
  }
  return "unknown";
}

InitMode parse_init_mode(const std::string& name) {
  if (name == "zeros") return InitMode::Zeros;
  if (name == "gaussian") return InitMode::Gaussian;
  if (name == "identical") return InitMode::Identical;
  throw std::invalid_argument("unknown init mode: " + name);
}

std::string to_string(InitMode mode) {
  switch (mode) {
    case InitMode::Zeros: return "zeros";
    case InitMode::Gaussian: return "gaussian";
    case InitMode::Identical: return "identical";
  }
  return "unknown";
}

StepSizes compute_stepsizes(double alpha_tilde, double theta, double eta, double gamma, double M) {
  if (!(alpha_tilde > 0)) throw std::invalid_argument("alpha_tilde must be positive");
  if (!(theta >= 0)) throw std::invalid_argument("theta must be non-negative");
  if (!(eta > 0)) throw std::invalid_argument("eta must be positive");
  if (!(gamma > 0 && gamma <= 1)) throw std::invalid_argument("gamma must lie in (0, 1]");
  if (!(M > 0)) throw std::invalid_argument("M must be positive");
  StepSizes s;
  s.alpha_tilde = alpha_tilde;
  s.theta = theta;
  s.eta = eta;
  s.gamma = gamma;
  s.alpha = 1.0 / (1.0 / alpha_tilde + theta * M);
  s.beta = s.alpha / alpha_tilde;
  return s;
}

Eigen::MatrixXd stack_primal(const NetworkState& state) { return stack(state, &AgentState::X); }
Eigen::MatrixXd stack_dual(const NetworkState& state) { return stack(state, &AgentState::lambda); }
Eigen::MatrixXd stack_surrogate(const NetworkState& state) { return stack(state, &AgentState::Xhat); }

NetworkState init_state(const Graph& g, const Eigen::MatrixXd& X0) {
  if (static_cast<std::size_t>(X0.cols()) != g.num_nodes())
    throw std::invalid_argument("initial point needs one column per agent");
  NetworkState state(g.num_nodes());
  const Eigen::Index d = X0.rows();
  for (std::size_t i = 0; i < state.size(); ++i) {
    auto& a = state[i];
    a.X = X0.col(static_cast<Eigen::Index>(i));
    a.Xhat = a.X;
    a.lambda = Eigen::VectorXd::Zero(d);
    a.Xhat_neighbors = Eigen::VectorXd::Zero(d);
    for (auto j : g.neighbors()[i]) {
      a.neighbor_surrogates.push_back(X0.col(static_cast<Eigen::Index>(j)));
      a.Xhat_neighbors += a.neighbor_surrogates.back();
    }
  }
  return state;
}

NetworkState init_state(const Objective& objective, const Graph& g, InitMode mode,
                        std::uint64_t seed, double scale) {
  if (objective.agents() != g.num_nodes())
    throw std::invalid_argument("objective has " + std::to_string(objective.agents()) +
                                " agents but the graph has " + std::to_string(g.num_nodes()));
  const auto d = static_cast<Eigen::Index>(objective.dim());
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  Eigen::MatrixXd X0 = Eigen::MatrixXd::Zero(d, n);
  auto draw = [&](std::size_t agent) {
    RngStream rng(seed, agent, 0, Purpose::Initialization, 0);
    Eigen::VectorXd v(d);
    for (Eigen::Index r = 0; r < d; ++r) v(r) = scale * rng.normal();
    return v;
  };
  switch (mode) {
    case InitMode::Zeros: break;
    case InitMode::Gaussian:
      for (Eigen::Index i = 0; i < n; ++i) X0.col(i) = draw(static_cast<std::size_t>(i));
      break;
    case InitMode::Identical: {
      const Eigen::VectorXd v = draw(0);
      for (Eigen::Index i = 0; i < n; ++i) X0.col(i) = v;
      break;
    }
  }
  return init_state(g, X0);
}

ExchangeMode exchange_mode(const CompressorSpec& spec, double gamma) {
  return spec.lossless() && gamma == 1.0 ? ExchangeMode::Replace : ExchangeMode::Difference;
}

std::vector<EncodedMessage> surrogate_update(NetworkState& state, const CompressorSpec& spec,
                                             double gamma, std::uint64_t seed,
                                             std::size_t iteration, std::size_t substep,
                                             AgentExecutor& exec) {
  if (!(gamma > 0 && gamma <= 1)) throw std::invalid_argument("gamma must lie in (0, 1]");
  const ExchangeMode mode = exchange_mode(spec, gamma);
  std::vector<EncodedMessage> out(state.size());
  exec.for_each(state.size(), [&](std::size_t i) {
    auto& a = state[i];
    RngStream rng(seed, i, iteration, Purpose::Compression, substep);
    if (mode == ExchangeMode::Replace) {
      out[i] = encode(a.X, spec, rng);
      a.Xhat = decode(out[i]);
    } else {
      out[i] = encode(a.X - a.Xhat, spec, rng);
      a.Xhat += gamma * decode(out[i]);
    }
  });
  return out;
}

Inbox deliver(const Graph& g, const std::vector<EncodedMessage>& broadcast) {
  if (broadcast.size() != g.num_nodes()) throw std::invalid_argument("one broadcast per agent expected");
  Inbox inbox(g.num_nodes());
  for (std::size_t i = 0; i < g.num_nodes(); ++i)
    for (auto j : g.neighbors()[i]) inbox[i].push_back(Received{j, &broadcast[j]});
  return inbox;
}

void aggregate_messages(NetworkState& state, const Graph& g, const Inbox& inbox, ExchangeMode mode,
                        double gamma, AgentExecutor& exec) {
  if (inbox.size() != state.size() || state.size() != g.num_nodes())
    throw std::invalid_argument("inbox does not match the network");
  // Validate delivery up front so a bad inbox leaves the state untouched.
  std::vector<std::vector<const EncodedMessage*>> slots(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) {
    const auto& nb = g.neighbors()[i];
    slots[i].assign(nb.size(), nullptr);
    for (const auto& r : inbox[i]) {
      const auto it = std::lower_bound(nb.begin(), nb.end(), r.sender);
      if (it == nb.end() || *it != r.sender)
        throw std::runtime_error("agent " + std::to_string(i) + " received a message from non-neighbor " +
                                 std::to_string(r.sender));
      auto& slot = slots[i][static_cast<std::size_t>(it - nb.begin())];
      if (slot != nullptr)
        throw std::runtime_error("agent " + std::to_string(i) + " received a duplicate message from " +
                                 std::to_string(r.sender));
      slot = r.message;
    }
    for (std::size_t k = 0; k < nb.size(); ++k)
      if (slots[i][k] == nullptr)
        throw std::runtime_error("agent " + std::to_string(i) + " is missing the message from " +
                                 std::to_string(nb[k]));
  }
  exec.for_each(state.size(), [&](std::size_t i) {
    auto& a = state[i];
    a.Xhat_neighbors.setZero();
    for (std::size_t k = 0; k < slots[i].size(); ++k) {
      const Eigen::VectorXd q = decode(*slots[i][k]);
      if (mode == ExchangeMode::Replace)
        a.neighbor_surrogates[k] = q;
      else
        a.neighbor_surrogates[k] += gamma * q;
      a.Xhat_neighbors += a.neighbor_surrogates[k];
    }
  });
}

DivergenceError::DivergenceError(std::size_t iteration, std::size_t agent)
    : std::runtime_error("non-finite iterate at agent " + std::to_string(agent) + ", iteration " +
                         std::to_string(iteration)),
      iteration_(iteration),
      agent_(agent) {}

void primal_dual_step(NetworkState& state, const Objective& objective, const StepSizes& steps,
                      const Graph& g, std::size_t iteration, AgentExecutor& exec) {
  std::vector<char> bad(state.size(), 0);
  exec.for_each(state.size(), [&](std::size_t i) {
    auto& a = state[i];
    const Eigen::VectorXd grad = objective.gradient(i, a.X);
    const Eigen::VectorXd lap = static_cast<double>(g.degree(i)) * a.Xhat - a.Xhat_neighbors;
    Eigen::VectorXd x_next = steps.beta * a.X + (1.0 - steps.beta) * a.Xhat -
                             steps.alpha * (grad + a.lambda + steps.theta * lap);
    Eigen::VectorXd lambda_next = a.lambda + steps.eta * lap;
    bad[i] = !(all_finite(x_next) && all_finite(lambda_next));
    a.X = std::move(x_next);
    a.lambda = std::move(lambda_next);
  });
  for (std::size_t i = 0; i < bad.size(); ++i)
    if (bad[i]) throw DivergenceError(iteration, i);
}

CompressorSpec effective_compressor(const AlgorithmConfig& config, const Objective& objective) {
  CompressorSpec spec = config.compressor;
  if (config.kind == AlgorithmKind::Dgd || config.kind == AlgorithmKind::ExactPD)
    spec = CompressorSpec{CompressorKind::Identity, 1, 1, 1};
  spec.d = objective.dim();
  spec.validate();
  return spec;
}

StepSizes effective_stepsizes(const AlgorithmConfig& config, const Objective& objective,
                              const Graph& g) {
  const CompressorSpec spec = effective_compressor(config, objective);
  const double eta = config.eta.value_or(certified_delta(spec));
  const double gamma = config.kind == AlgorithmKind::ExactPD ? 1.0 : config.gamma;
  return compute_stepsizes(config.alpha_tilde, config.theta, eta, gamma, spectral_info(g).M);
}

namespace {

class Recorder {
 public:
  Recorder(const AlgorithmConfig& config, const Objective& objective, const Graph& g,
           const RunOptions& options, AgentExecutor& exec)
      : config_(config), objective_(objective), g_(g), options_(options), exec_(exec) {
    if (config.stride < 1) throw std::invalid_argument("stride must be >= 1");
    if (options.test && !objective.is_classifier())
      throw std::invalid_argument("test accuracy needs a classification objective");
  }

  void enable_lyapunov(const StepSizes& steps, double delta) {
    if (!objective_.f_star()) return;
    spectral_ = spectral_info(g_);
    steps_ = steps;
    constants_ = theorem_constants(delta, steps.eta, spectral_->rho1, spectral_->rho2,
                                   objective_.smoothness(), g_.num_nodes(), spectral_->M,
                                   config_.lyapunov_a);
  }

  bool due(std::size_t t) const { return t % config_.stride == 0; }

  void record(std::size_t t, const NetworkState& state, std::uint64_t bits, bool has_surrogate) {
    const Eigen::MatrixXd X = stack_primal(state);
    const Eigen::VectorXd x_bar = X.rowwise().mean();
    const std::size_t n = state.size();
    std::vector<double> losses(n);
    std::vector<Eigen::VectorXd> grads(n);
    exec_.for_each(n, [&](std::size_t i) {
      losses[i] = objective_.global_loss(X.col(static_cast<Eigen::Index>(i)));
      grads[i] = objective_.gradient(i, x_bar);
    });
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(x_bar.size());
    for (const auto& gi : grads) grad += gi;
    grad /= static_cast<double>(n);

    MetricsRow row;
    row.t = t;
    row.loss_max = *std::max_element(losses.begin(), losses.end());
    row.grad_norm_avg = grad.squaredNorm();
    row.consensus_err = consensus_error(X);
    row.bits_cum = bits;
    if (has_surrogate) row.surrogate_gap = (stack_surrogate(state) - X).squaredNorm();
    if (constants_)
      row.lyapunov = lyapunov(X, stack_dual(state), stack_surrogate(state), objective_, *spectral_,
                              *constants_, *steps_);
    if (options_.test) row.test_acc = test_accuracy(objective_, X, *options_.test);
    rows.push_back(row);
  }

  std::vector<MetricsRow> rows;

 private:
  const AlgorithmConfig& config_;
  const Objective& objective_;
  const Graph& g_;
  const RunOptions& options_;
  AgentExecutor& exec_;
  std::optional<SpectralInfo> spectral_;
  std::optional<TheoremConstants> constants_;
  std::optional<StepSizes> steps_;
};

NetworkState starting_state(const AlgorithmConfig& config, const Objective& objective,
                            const Graph& g, const RunOptions& options) {
  if (objective.agents() != g.num_nodes())
    throw std::invalid_argument("objective and graph disagree on the number of agents");
  if (options.x0) {
    if (static_cast<std::size_t>(options.x0->rows()) != objective.dim())
      throw std::invalid_argument("initial point has the wrong dimension");
    return init_state(g, *options.x0);
  }
  return init_state(objective, g, config.init, config.seed, config.init_scale);
}

RunResult finish(Recorder& rec, NetworkState state) {
  RunResult res;
  res.rows = std::move(rec.rows);
  res.final_state = std::move(state);
  return res;
}

RunResult diverged(Recorder& rec, NetworkState state, const DivergenceError& e) {
  RunResult res = finish(rec, std::move(state));
  res.status = RunStatus::Diverged;
  res.diverged_at = e.iteration();
  res.message = e.what();
  return res;
}

/// One DGD mixing step with (possibly compressed) neighbor values.
void dgd_step(NetworkState& state, const Objective& objective, const Graph& g,
              const Eigen::MatrixXd& W, double stepsize, const std::vector<Eigen::VectorXd>* received,
              std::size_t iteration, AgentExecutor& exec) {
  std::vector<Eigen::VectorXd> next(state.size());
  std::vector<char> bad(state.size(), 0);
  exec.for_each(state.size(), [&](std::size_t i) {
    const auto ii = static_cast<Eigen::Index>(i);
    Eigen::VectorXd acc = W(ii, ii) * state[i].X;
    for (auto j : g.neighbors()[i]) {
      const Eigen::VectorXd& xj = received ? (*received)[j] : state[j].X;
      acc += W(ii, static_cast<Eigen::Index>(j)) * xj;
    }
    acc -= stepsize * objective.gradient(i, state[i].X);
    bad[i] = !all_finite(acc);
    next[i] = std::move(acc);
  });
  for (std::size_t i = 0; i < bad.size(); ++i)
    if (bad[i]) throw DivergenceError(iteration, i);
  for (std::size_t i = 0; i < state.size(); ++i) {
    state[i].X = std::move(next[i]);
    state[i].Xhat = state[i].X;
  }
}

void require_dgd_params(const AlgorithmConfig& config) {
  if (!(config.stepsize > 0)) throw std::invalid_argument("stepsize must be positive");
}

}  // namespace

RunResult run_ticopd(const AlgorithmConfig& config, const Objective& objective, const Graph& g,
                     const RunOptions& options) {
  if (!(config.theta > 0)) throw std::invalid_argument("theta must be positive");
  if (config.inner_steps < 1) throw std::invalid_argument("inner_steps must be >= 1");
  const CompressorSpec spec = effective_compressor(config, objective);
  const StepSizes steps = effective_stepsizes(config, objective, g);
  const ExchangeMode mode = exchange_mode(spec, steps.gamma);

  AgentExecutor exec(config.threads);
  Recorder rec(config, objective, g, options, exec);
  if (config.lyapunov) rec.enable_lyapunov(steps, certified_delta(spec));
  NetworkState state = starting_state(config, objective, g, options);
  BitCounter bits;
  rec.record(0, state, 0, true);
  try {
    for (std::size_t t = 0; t < config.T; ++t) {
      for (std::size_t k = 0; k < config.inner_steps; ++k) {
        const auto broadcast = surrogate_update(state, spec, steps.gamma, config.seed, t, k, exec);
        bits.add_round(g, broadcast);
        aggregate_messages(state, g, deliver(g, broadcast), mode, steps.gamma, exec);
      }
      primal_dual_step(state, objective, steps, g, t + 1, exec);
      if (rec.due(t + 1)) rec.record(t + 1, state, bits.total(), true);
    }
  } catch (const DivergenceError& e) {
    return diverged(rec, std::move(state), e);
  }
  return finish(rec, std::move(state));
}

RunResult run_dgd(const AlgorithmConfig& config, const Objective& objective, const Graph& g,
                  const RunOptions& options) {
  require_dgd_params(config);
  const Eigen::MatrixXd W = metropolis_weights(g);
  const std::size_t raw_bits = objective.dim() * kFloatBits;
  AgentExecutor exec(config.threads);
  Recorder rec(config, objective, g, options, exec);
  NetworkState state = starting_state(config, objective, g, options);
  BitCounter bits;
  rec.record(0, state, 0, false);
  try {
    for (std::size_t t = 0; t < config.T; ++t) {
      dgd_step(state, objective, g, W, config.stepsize, nullptr, t + 1, exec);
      bits.add(round_bits(g, std::vector<std::size_t>(g.num_nodes(), raw_bits)));
      if (rec.due(t + 1)) rec.record(t + 1, state, bits.total(), false);
    }
  } catch (const DivergenceError& e) {
    return diverged(rec, std::move(state), e);
  }
  return finish(rec, std::move(state));
}

RunResult run_dgd_quantized(const AlgorithmConfig& config, const Objective& objective,
                            const Graph& g, const RunOptions& options) {
  require_dgd_params(config);
  const CompressorSpec spec = effective_compressor(config, objective);
  const Eigen::MatrixXd W = metropolis_weights(g);
  AgentExecutor exec(config.threads);
  Recorder rec(config, objective, g, options, exec);
  NetworkState state = starting_state(config, objective, g, options);
  BitCounter bits;
  rec.record(0, state, 0, false);
  std::vector<EncodedMessage> broadcast(state.size());
  std::vector<Eigen::VectorXd> received(state.size());
  try {
    for (std::size_t t = 0; t < config.T; ++t) {
      exec.for_each(state.size(), [&](std::size_t j) {
        RngStream rng(config.seed, j, t, Purpose::Compression, 0);
        broadcast[j] = encode(state[j].X, spec, rng);
        received[j] = decode(broadcast[j]);
      });
      bits.add_round(g, broadcast);
      dgd_step(state, objective, g, W, config.stepsize, &received, t + 1, exec);
      if (rec.due(t + 1)) rec.record(t + 1, state, bits.total(), false);
    }
  } catch (const DivergenceError& e) {
    return diverged(rec, std::move(state), e);
  }
  return finish(rec, std::move(state));
}

RunResult run_choco(const AlgorithmConfig& config, const Objective& objective, const Graph& g,
                    const RunOptions& options) {
  require_dgd_params(config);
  if (!(config.gossip > 0 && config.gossip <= 1))
    throw std::invalid_argument("gossip stepsize must lie in (0, 1]");
  const CompressorSpec spec = effective_compressor(config, objective);
  const ExchangeMode mode = exchange_mode(spec, 1.0);
  const Eigen::MatrixXd W = metropolis_weights(g);
  AgentExecutor exec(config.threads);
  Recorder rec(config, objective, g, options, exec);
  NetworkState state = starting_state(config, objective, g, options);
  BitCounter bits;
  rec.record(0, state, 0, true);
  try {
    for (std::size_t t = 0; t < config.T; ++t) {
      std::vector<char> bad(state.size(), 0);
      exec.for_each(state.size(), [&](std::size_t i) {
        auto& a = state[i];
        const auto ii = static_cast<Eigen::Index>(i);
        Eigen::VectorXd mix = Eigen::VectorXd::Zero(a.X.size());
        const auto& nb = g.neighbors()[i];
        for (std::size_t k = 0; k < nb.size(); ++k)
          mix += W(ii, static_cast<Eigen::Index>(nb[k])) * (a.neighbor_surrogates[k] - a.Xhat);
        a.X = a.X - config.stepsize * objective.gradient(i, a.X) + config.gossip * mix;
        bad[i] = !all_finite(a.X);
      });
      for (std::size_t i = 0; i < bad.size(); ++i)
        if (bad[i]) throw DivergenceError(t + 1, i);
      const auto broadcast = surrogate_update(state, spec, 1.0, config.seed, t, 0, exec);
      bits.add_round(g, broadcast);
      aggregate_messages(state, g, deliver(g, broadcast), mode, 1.0, exec);
      if (rec.due(t + 1)) rec.record(t + 1, state, bits.total(), true);
    }
  } catch (const DivergenceError& e) {
    return diverged(rec, std::move(state), e);
  }
  return finish(rec, std::move(state));
}

RunResult run(const AlgorithmConfig& config, const Objective& objective, const Graph& g,
              const RunOptions& options) {
  switch (config.kind) {
    case AlgorithmKind::TiCoPD:
    case AlgorithmKind::ExactPD: return run_ticopd(config, objective, g, options);
    case AlgorithmKind::Dgd: return run_dgd(config, objective, g, options);
    case AlgorithmKind::DgdQuantized: return run_dgd_quantized(config, objective, g, options);
    case AlgorithmKind::Choco: return run_choco(config, objective, g, options);
  }
  throw std::invalid_argument("unknown algorithm");
}

}  // namespace ticopd
