#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ticopd/compression.hpp"
#include "ticopd/diagnostics.hpp"
#include "ticopd/executor.hpp"
#include "ticopd/objectives.hpp"
#include "ticopd/stepsizes.hpp"
#include "ticopd/topology.hpp"

namespace ticopd {

enum class AlgorithmKind { TiCoPD, ExactPD, Dgd, DgdQuantized, Choco };
enum class InitMode { Zeros, Gaussian, Identical };

AlgorithmKind parse_algorithm_kind(const std::string& name);
std::string to_string(AlgorithmKind kind);
InitMode parse_init_mode(const std::string& name);
std::string to_string(InitMode mode);

/// Per-agent iterate of the compressed primal-dual method.
struct AgentState {
  Eigen::VectorXd X;               // primal iterate
  Eigen::VectorXd lambda;          // dual iterate after substitution A^T lambda
  Eigen::VectorXd Xhat;            // own public surrogate
  Eigen::VectorXd Xhat_neighbors;  // sum of neighbor surrogates
  /// Local copies of each neighbor's surrogate, ordered as
  /// Graph::neighbors()[i]; Xhat_neighbors is their sum in that order.
  std::vector<Eigen::VectorXd> neighbor_surrogates;
};

using NetworkState = std::vector<AgentState>;

/// d x n matrices with one column per agent.
Eigen::MatrixXd stack_primal(const NetworkState& state);
Eigen::MatrixXd stack_dual(const NetworkState& state);
Eigen::MatrixXd stack_surrogate(const NetworkState& state);

/// X0 drawn per `mode`; Xhat0 = X0; lambda0 = 0; neighbor copies hold the
/// neighbors' X0.
NetworkState init_state(const Objective& objective, const Graph& g, InitMode mode,
                        std::uint64_t seed, double scale = 1.0);
/// Same with an explicit d x n starting point.
NetworkState init_state(const Graph& g, const Eigen::MatrixXd& X0);

/// How a surrogate message is applied. Difference is the general
/// error-feedback update Xhat += gamma * DEC(ENC(X - Xhat)). Replace is used
/// for lossless exchange with gamma = 1, where the message carries X itself:
/// identical in exact arithmetic and free of cancellation error.
enum class ExchangeMode { Difference, Replace };

ExchangeMode exchange_mode(const CompressorSpec& spec, double gamma);

/// Surrogate step for every agent: builds ENC(X_i - Xhat_i) with randomness
/// from stream (seed, i, iteration, Compression, substep), applies the
/// decoded message to Xhat_i, and returns the broadcast messages.
std::vector<EncodedMessage> surrogate_update(NetworkState& state, const CompressorSpec& spec,
                                             double gamma, std::uint64_t seed,
                                             std::size_t iteration, std::size_t substep,
                                             AgentExecutor& exec);

struct Received {
  std::size_t sender = 0;
  const EncodedMessage* message = nullptr;
};
using Inbox = std::vector<std::vector<Received>>;

/// Reliable single delivery of each agent's broadcast to its neighbors.
Inbox deliver(const Graph& g, const std::vector<EncodedMessage>& broadcast);

/// Applies received messages to each agent's neighbor copies and refreshes
/// Xhat_neighbors. Throws std::runtime_error when an inbox lacks a
/// neighbor, repeats one, or holds a non-neighbor.
void aggregate_messages(NetworkState& state, const Graph& g, const Inbox& inbox, ExchangeMode mode,
                        double gamma, AgentExecutor& exec);

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t iteration, std::size_t agent);
  std::size_t iteration() const { return iteration_; }
  std::size_t agent() const { return agent_; }

 private:
  std::size_t iteration_;
  std::size_t agent_;
};

/// Simultaneous primal and dual update for all agents:
///   X_i <- beta X_i + (1-beta) Xhat_i
///          - alpha [grad f_i(X_i) + lambda_i + theta (|N_i| Xhat_i - Xhat_{i,-i})]
///   lambda_i <- lambda_i + eta (|N_i| Xhat_i - Xhat_{i,-i})
/// Throws DivergenceError on a non-finite result.
void primal_dual_step(NetworkState& state, const Objective& objective, const StepSizes& steps,
                      const Graph& g, std::size_t iteration, AgentExecutor& exec);

struct AlgorithmConfig {
  AlgorithmKind kind = AlgorithmKind::TiCoPD;
  // Primal-dual parameters.
  double alpha_tilde = 0.01;
  double theta = 1.0;
  std::optional<double> eta;  // defaults to the compressor's certified delta
  double gamma = 1.0;
  std::size_t inner_steps = 1;
  // DGD / CHOCO parameters.
  double stepsize = 0.01;
  double gossip = 1.0;

  CompressorSpec compressor;  // dimension is taken from the objective
  std::size_t T = 1000;
  std::uint64_t seed = 0;
  InitMode init = InitMode::Zeros;
  double init_scale = 1.0;
  std::size_t stride = 1;
  int threads = 1;
  bool lyapunov = false;
  double lyapunov_a = 1.0;
};

/// Compressor actually used by a run: dimension set to the objective's,
/// identity for the uncompressed methods.
CompressorSpec effective_compressor(const AlgorithmConfig& config, const Objective& objective);

/// Step sizes a TiCoPD/ExactPD run will use on graph g.
StepSizes effective_stepsizes(const AlgorithmConfig& config, const Objective& objective,
                              const Graph& g);

struct RunOptions {
  const Dataset* test = nullptr;       // enables the test_acc column
  std::optional<Eigen::MatrixXd> x0;  // overrides the init mode
};

enum class RunStatus { Completed, Diverged };

struct RunResult {
  std::vector<MetricsRow> rows;
  RunStatus status = RunStatus::Completed;
  std::size_t diverged_at = 0;
  std::string message;
  NetworkState final_state;
};

RunResult run(const AlgorithmConfig& config, const Objective& objective, const Graph& g,
              const RunOptions& options = {});

RunResult run_ticopd(const AlgorithmConfig& config, const Objective& objective, const Graph& g,
                     const RunOptions& options = {});
RunResult run_dgd(const AlgorithmConfig& config, const Objective& objective, const Graph& g,
                  const RunOptions& options = {});
RunResult run_dgd_quantized(const AlgorithmConfig& config, const Objective& objective,
                            const Graph& g, const RunOptions& options = {});
RunResult run_choco(const AlgorithmConfig& config, const Objective& objective, const Graph& g,
                    const RunOptions& options = {});

}  // namespace ticopd
