#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace ticopd {

using Edge = std::pair<std::size_t, std::size_t>;

/// Undirected, connected, simple graph on nodes 0..n-1. Edges are stored
/// as (lower, higher) pairs in lexicographic order.
class Graph {
 public:
  /// Normalizes and deduplicates `edges`. Throws std::invalid_argument on
  /// n < 2, out-of-range endpoints, self-loops, or a disconnected result.
  Graph(std::size_t n, std::vector<Edge> edges);

  std::size_t num_nodes() const { return n_; }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }

  /// Sorted neighbor lists, one per node.
  const std::vector<std::vector<std::size_t>>& neighbors() const { return neighbors_; }
  std::size_t degree(std::size_t i) const { return neighbors_[i].size(); }

 private:
  std::size_t n_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> neighbors_;
};

enum class GraphKind { Ring, Path, Complete, Star, ErdosRenyi };

struct GraphSpec {
  GraphKind kind = GraphKind::Ring;
  std::size_t n = 10;
  double p = 0.5;          // Erdos-Renyi edge probability
  std::uint64_t seed = 0;  // Erdos-Renyi sampling seed
};

GraphKind parse_graph_kind(const std::string& name);
std::string to_string(GraphKind kind);

/// Redraws allowed for an Erdos-Renyi graph before giving up.
inline constexpr int kRandomGraphRetries = 100;

Graph build_graph(const GraphSpec& spec);

/// Edge list of the requested family without the connectivity requirement.
/// For Erdos-Renyi this is the first draw.
std::vector<Edge> raw_edges(const GraphSpec& spec, int attempt = 0);

bool is_connected(std::size_t n, const std::vector<Edge>& edges);

/// Oriented incidence matrix: row e = (i, j), i < j, holds +1 in column i
/// and -1 in column j.
class IncidenceOperator {
 public:
  explicit IncidenceOperator(const Graph& g);

  const Eigen::MatrixXi& matrix() const { return a_; }
  std::size_t rows() const { return static_cast<std::size_t>(a_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(a_.cols()); }

  /// A^T A in exact integer arithmetic.
  Eigen::MatrixXi gram() const { return a_.transpose() * a_; }

 private:
  Eigen::MatrixXi a_;
};

IncidenceOperator incidence(const Graph& g);

/// Degree matrix minus adjacency, built directly from the edge list.
Eigen::MatrixXi laplacian(std::size_t n, const std::vector<Edge>& edges);

struct SpectralInfo {
  double rho1 = 0.0;  // largest eigenvalue of A^T A
  double rho2 = 0.0;  // smallest nonzero eigenvalue (Fiedler value)
  double M = 0.0;     // spectral norm of A^T A
  Eigen::VectorXd eigenvalues;     // ascending
  Eigen::MatrixXd laplacian_pinv;  // Moore-Penrose pseudoinverse of A^T A
};

/// Throws std::runtime_error when the Laplacian has more than one zero
/// eigenvalue.
SpectralInfo spectral_info(const Graph& g);

/// Ascending Laplacian eigenvalues of an arbitrary edge list. Used by the
/// graph check, which must report on disconnected inputs too.
Eigen::VectorXd laplacian_eigenvalues(std::size_t n, const std::vector<Edge>& edges);

/// Relative threshold below which a Laplacian eigenvalue counts as zero.
inline constexpr double kZeroEigenvalueTol = 1e-9;

std::vector<std::vector<std::size_t>> neighbor_sets(const Graph& g);

/// Doubly stochastic Metropolis-Hastings weights.
Eigen::MatrixXd metropolis_weights(const Graph& g);

}  // namespace ticopd
