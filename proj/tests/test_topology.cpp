#include <gtest/gtest.h>

#include "oracles.hpp"
#include "ticopd/topology.hpp"

using namespace ticopd;

namespace {

std::vector<GraphSpec> sample_specs() {
  std::vector<GraphSpec> specs;
  for (std::size_t n = 2; n <= 12; ++n) {
    for (auto kind : {GraphKind::Ring, GraphKind::Path, GraphKind::Complete, GraphKind::Star}) {
      if (kind == GraphKind::Ring && n < 3) continue;
      specs.push_back({kind, n, 0.5, 0});
    }
    for (std::uint64_t seed = 0; seed < 3; ++seed) specs.push_back({GraphKind::ErdosRenyi, n, 0.4, seed});
  }
  return specs;
}

}  // namespace

TEST(Graph, RingOfTen) {
  const Graph g = build_graph({GraphKind::Ring, 10});
  EXPECT_EQ(g.num_edges(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(g.degree(i), 2u);
}

TEST(Graph, CompleteOfThreeIsTriangle) {
  const Graph g = build_graph({GraphKind::Complete, 3});
  EXPECT_EQ(g.edges(), (std::vector<Edge>{{0, 1}, {0, 2}, {1, 2}}));
}

TEST(Graph, PathOfTwoIsOneEdge) {
  const Graph g = build_graph({GraphKind::Path, 2});
  EXPECT_EQ(g.edges(), (std::vector<Edge>{{0, 1}}));
}

TEST(Graph, RejectsBadInput) {
  EXPECT_THROW(Graph(1, {}), std::invalid_argument);
  EXPECT_THROW(Graph(3, {{0, 0}, {1, 2}}), std::invalid_argument);
  EXPECT_THROW(Graph(3, {{0, 5}}), std::invalid_argument);
  EXPECT_THROW(Graph(4, {{0, 1}, {2, 3}}), std::invalid_argument);
  EXPECT_THROW(build_graph({GraphKind::Ring, 1}), std::invalid_argument);
}

TEST(Graph, NormalizesAndDeduplicates) {
  const Graph g(3, {{1, 0}, {0, 1}, {2, 1}});
  EXPECT_EQ(g.edges(), (std::vector<Edge>{{0, 1}, {1, 2}}));
}

TEST(Graph, ErdosRenyiGivesUpWhenHopeless) {
  EXPECT_THROW(build_graph({GraphKind::ErdosRenyi, 10, 0.0, 1}), std::runtime_error);
}

TEST(Graph, ErdosRenyiIsSeeded) {
  const GraphSpec spec{GraphKind::ErdosRenyi, 12, 0.3, 42};
  EXPECT_EQ(build_graph(spec).edges(), build_graph(spec).edges());
}

TEST(Incidence, PathOfTwo) {
  const auto A = incidence(build_graph({GraphKind::Path, 2}));
  Eigen::MatrixXi expected(1, 2);
  expected << 1, -1;
  EXPECT_EQ(A.matrix(), expected);
  Eigen::MatrixXi gram(2, 2);
  gram << 1, -1, -1, 1;
  EXPECT_EQ(A.gram(), gram);
}

TEST(Incidence, TriangleGram) {
  const auto gram = incidence(build_graph({GraphKind::Complete, 3})).gram();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_EQ(gram(i, j), i == j ? 2 : -1);
}

TEST(Incidence, GramIsLaplacianForAllFamilies) {
  for (const auto& spec : sample_specs()) {
    const Graph g = build_graph(spec);
    const auto A = incidence(g);
    for (Eigen::Index e = 0; e < A.matrix().rows(); ++e) {
      EXPECT_EQ(A.matrix().row(e).sum(), 0);
      EXPECT_EQ((A.matrix().row(e).array() == 1).count(), 1);
      EXPECT_EQ((A.matrix().row(e).array() == -1).count(), 1);
    }
    const Eigen::MatrixXd L = oracle::laplacian(g.num_nodes(), g.edges());
    EXPECT_EQ(A.gram().cast<double>(), L);
    EXPECT_EQ(laplacian(g.num_nodes(), g.edges()), A.gram());
    // Integer arithmetic: constants are annihilated exactly.
    const Eigen::VectorXi ones = Eigen::VectorXi::Ones(static_cast<Eigen::Index>(g.num_nodes()));
    EXPECT_TRUE((A.gram() * ones).isZero());
    EXPECT_TRUE((ones.transpose() * A.gram()).isZero());
  }
}

TEST(Spectral, SmallGraphsMatchHandValues) {
  const auto tri = spectral_info(build_graph({GraphKind::Complete, 3}));
  EXPECT_NEAR(tri.rho1, 3.0, 1e-12);
  EXPECT_NEAR(tri.rho2, 3.0, 1e-12);
  EXPECT_NEAR(tri.M, 3.0, 1e-12);
  const auto ring = spectral_info(build_graph({GraphKind::Ring, 4}));
  EXPECT_NEAR(ring.rho1, 4.0, 1e-12);
  EXPECT_NEAR(ring.rho2, 2.0, 1e-12);
  const auto path = spectral_info(build_graph({GraphKind::Path, 2}));
  EXPECT_NEAR(path.rho1, 2.0, 1e-12);
  EXPECT_NEAR(path.rho2, 2.0, 1e-12);
}

TEST(Spectral, AgreesWithJacobiOracleAndPseudoinverse) {
  for (const auto& spec : sample_specs()) {
    const Graph g = build_graph(spec);
    const auto info = spectral_info(g);
    const auto n = static_cast<Eigen::Index>(g.num_nodes());
    const auto ev = oracle::jacobi_eigenvalues(oracle::laplacian(g.num_nodes(), g.edges()));
    EXPECT_NEAR(info.rho1, ev.back(), 1e-9);
    EXPECT_NEAR(info.rho2, ev[1], 1e-9);
    EXPECT_DOUBLE_EQ(info.M, info.rho1);
    EXPECT_GE(info.rho1, info.rho2);
    EXPECT_GT(info.rho2, 0.0);
    const Eigen::MatrixXd K = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
    const Eigen::MatrixXd QL = info.laplacian_pinv * incidence(g).gram().cast<double>();
    EXPECT_LE((QL - K).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Spectral, Rho2PositiveIffConnected) {
  for (std::size_t n = 2; n <= 12; ++n) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto edges = raw_edges({GraphKind::ErdosRenyi, n, 0.25, seed});
      const bool bfs = oracle::connected(n, edges);
      EXPECT_EQ(is_connected(n, edges), bfs);
      const auto ev = laplacian_eigenvalues(n, edges);
      EXPECT_EQ(ev(1) > 1e-9 * std::max(1.0, ev(ev.size() - 1)), bfs) << "n=" << n << " seed=" << seed;
    }
  }
}

TEST(Neighbors, SortedLists) {
  EXPECT_EQ(neighbor_sets(build_graph({GraphKind::Ring, 4}))[0], (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(neighbor_sets(build_graph({GraphKind::Complete, 3}))[2], (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(neighbor_sets(build_graph({GraphKind::Star, 4}))[0], (std::vector<std::size_t>{1, 2, 3}));
}

TEST(Metropolis, DoublyStochasticAndSymmetric) {
  for (const auto& spec : sample_specs()) {
    const Eigen::MatrixXd W = metropolis_weights(build_graph(spec));
    EXPECT_TRUE(W.isApprox(W.transpose(), 0.0));
    for (Eigen::Index i = 0; i < W.rows(); ++i) EXPECT_NEAR(W.row(i).sum(), 1.0, 1e-15);
    EXPECT_GE(W.minCoeff(), 0.0);
  }
}
