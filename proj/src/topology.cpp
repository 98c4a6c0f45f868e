#include "ticopd/topology.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>

#include "ticopd/rng.hpp"

namespace ticopd {

Graph::Graph(std::size_t n, std::vector<Edge> edges) : n_(n) {
  if (n < 2) throw std::invalid_argument("graph needs at least 2 nodes");
  for (auto& [i, j] : edges) {
    if (i >= n || j >= n) throw std::invalid_argument("edge endpoint out of range");
    if (i == j) throw std::invalid_argument("self-loop on node " + std::to_string(i));
    if (i > j) std::swap(i, j);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  if (!is_connected(n, edges)) throw std::invalid_argument("graph is not connected");
  edges_ = std::move(edges);

  neighbors_.assign(n, {});
  for (const auto& [i, j] : edges_) {
    neighbors_[i].push_back(j);
    neighbors_[j].push_back(i);
  }
  for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
}

GraphKind parse_graph_kind(const std::string& name) {
  if (name == "ring") return GraphKind::Ring;
  if (name == "path") return GraphKind::Path;
  if (name == "complete") return GraphKind::Complete;
  if (name == "star") return GraphKind::Star;
  if (name == "erdos_renyi") return GraphKind::ErdosRenyi;
  throw std::invalid_argument("unknown graph kind: " + name);
}

std::string to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::Ring: return "ring";
    case GraphKind::Path: return "path";
    case GraphKind::Complete: return "complete";
    case GraphKind::Star: return "star";
    case GraphKind::ErdosRenyi: return "erdos_renyi";
  }
  return "unknown";
}

std::vector<Edge> raw_edges(const GraphSpec& spec, int attempt) {
  const std::size_t n = spec.n;
  if (n < 2) throw std::invalid_argument("graph needs at least 2 nodes");
  std::vector<Edge> edges;
  switch (spec.kind) {
    case GraphKind::Ring:
      for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
      if (n > 2) edges.emplace_back(0, n - 1);
      break;
    case GraphKind::Path:
      for (std::size_t i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
      break;
    case GraphKind::Complete:
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) edges.emplace_back(i, j);
      break;
    case GraphKind::Star:
      for (std::size_t j = 1; j < n; ++j) edges.emplace_back(0, j);
      break;
    case GraphKind::ErdosRenyi: {
      if (!(spec.p >= 0.0 && spec.p <= 1.0))
        throw std::invalid_argument("edge probability must lie in [0, 1]");
      RngStream rng(spec.seed, 0, 0, Purpose::GraphSampling, static_cast<std::uint64_t>(attempt));
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
          if (rng.uniform() < spec.p) edges.emplace_back(i, j);
      break;
    }
  }
  return edges;
}

Graph build_graph(const GraphSpec& spec) {
  if (spec.kind != GraphKind::ErdosRenyi) return Graph(spec.n, raw_edges(spec));
  for (int attempt = 0; attempt < kRandomGraphRetries; ++attempt) {
    auto edges = raw_edges(spec, attempt);
    if (is_connected(spec.n, edges)) return Graph(spec.n, std::move(edges));
  }
  throw std::runtime_error("no connected Erdos-Renyi draw within " +
                           std::to_string(kRandomGraphRetries) + " attempts");
}

bool is_connected(std::size_t n, const std::vector<Edge>& edges) {
  if (n == 0) return false;
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& [i, j] : edges) {
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  std::vector<bool> seen(n, false);
  std::deque<std::size_t> queue{0};
  seen[0] = true;
  std::size_t visited = 1;
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    for (auto v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++visited;
        queue.push_back(v);
      }
    }
  }
  return visited == n;
}

IncidenceOperator::IncidenceOperator(const Graph& g)
    : a_(Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(g.num_edges()),
                               static_cast<Eigen::Index>(g.num_nodes()))) {
  Eigen::Index row = 0;
  for (const auto& [i, j] : g.edges()) {
    a_(row, static_cast<Eigen::Index>(i)) = 1;
    a_(row, static_cast<Eigen::Index>(j)) = -1;
    ++row;
  }
}

IncidenceOperator incidence(const Graph& g) { return IncidenceOperator(g); }

Eigen::MatrixXi laplacian(std::size_t n, const std::vector<Edge>& edges) {
  const auto size = static_cast<Eigen::Index>(n);
  Eigen::MatrixXi lap = Eigen::MatrixXi::Zero(size, size);
  for (const auto& [i, j] : edges) {
    const auto a = static_cast<Eigen::Index>(i);
    const auto b = static_cast<Eigen::Index>(j);
    lap(a, a) += 1;
    lap(b, b) += 1;
    lap(a, b) -= 1;
    lap(b, a) -= 1;
  }
  return lap;
}

Eigen::VectorXd laplacian_eigenvalues(std::size_t n, const std::vector<Edge>& edges) {
  const Eigen::MatrixXd lap = laplacian(n, edges).cast<double>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

SpectralInfo spectral_info(const Graph& g) {
  const Eigen::MatrixXd lap = incidence(g).gram().cast<double>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
  if (solver.info() != Eigen::Success) throw std::runtime_error("Laplacian eigensolve failed");

  const Eigen::VectorXd& evals = solver.eigenvalues();
  const Eigen::MatrixXd& evecs = solver.eigenvectors();
  const double top = evals(evals.size() - 1);
  const double zero_tol = kZeroEigenvalueTol * std::max(1.0, top);

  SpectralInfo info;
  info.eigenvalues = evals;
  info.rho1 = top;
  info.M = top;
  info.laplacian_pinv = Eigen::MatrixXd::Zero(lap.rows(), lap.cols());
  int zeros = 0;
  for (Eigen::Index k = 0; k < evals.size(); ++k) {
    if (std::abs(evals(k)) <= zero_tol) {
      ++zeros;
      continue;
    }
    if (info.rho2 == 0.0) info.rho2 = evals(k);
    info.laplacian_pinv.noalias() += (1.0 / evals(k)) * evecs.col(k) * evecs.col(k).transpose();
  }
  if (zeros != 1)
    throw std::runtime_error("Laplacian has " + std::to_string(zeros) +
                             " zero eigenvalues; graph is disconnected");
  return info;
}

std::vector<std::vector<std::size_t>> neighbor_sets(const Graph& g) { return g.neighbors(); }

Eigen::MatrixXd metropolis_weights(const Graph& g) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [i, j] : g.edges()) {
    const double wij = 1.0 / (1.0 + static_cast<double>(std::max(g.degree(i), g.degree(j))));
    w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = wij;
    w(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = wij;
  }
  for (Eigen::Index i = 0; i < n; ++i) w(i, i) = 1.0 - w.row(i).sum();
  return w;
}

}  // namespace ticopd
