#include <gtest/gtest.h>

#include <bit>
#include <cmath>

#include "oracles.hpp"
#include "ticopd/algorithms.hpp"

using namespace ticopd;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  RngStream rng(seed, 0, 0, Purpose::Testing);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.normal();
  return m;
}

bool bitwise_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a.data()[i]) != std::bit_cast<std::uint64_t>(b.data()[i])) return false;
  return true;
}

bool same_rows(const std::vector<MetricsRow>& a, const std::vector<MetricsRow>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].t != b[k].t || a[k].bits_cum != b[k].bits_cum) return false;
    for (auto [x, y] : {std::pair{a[k].loss_max, b[k].loss_max},
                        {a[k].grad_norm_avg, b[k].grad_norm_avg},
                        {a[k].consensus_err, b[k].consensus_err}})
      if (std::bit_cast<std::uint64_t>(x) != std::bit_cast<std::uint64_t>(y)) return false;
  }
  return true;
}

struct LsInstance {
  std::vector<Eigen::MatrixXd> A;
  std::vector<Eigen::VectorXd> b;
  std::unique_ptr<LeastSquares> obj;
};

/// Agents with different curvature, so constant-step DGD is biased.
LsInstance heterogeneous_ls(std::size_t n, Eigen::Index d, std::uint64_t seed) {
  LsInstance inst;
  for (std::size_t i = 0; i < n; ++i) {
    inst.A.push_back(random_matrix(d + 2, d, seed + i) * ((0.5 + 0.15 * static_cast<double>(i)) / std::sqrt(d + 2.0)));
    inst.b.push_back(random_matrix(d + 2, 1, seed + 100 + i).col(0));
  }
  inst.obj = least_squares(inst.A, inst.b);
  return inst;
}

AlgorithmConfig ticopd_config(CompressorSpec c, std::size_t T) {
  AlgorithmConfig cfg;
  cfg.kind = AlgorithmKind::TiCoPD;
  cfg.alpha_tilde = 0.1;
  cfg.theta = 1.0;
  cfg.compressor = c;
  cfg.T = T;
  cfg.seed = 5;
  return cfg;
}

const CompressorSpec kIdentity{CompressorKind::Identity, 1, 1, 1};
const CompressorSpec kQsgd4{CompressorKind::Qsgd, 4, 1, 1};

}  // namespace

TEST(StepSizes, Examples) {
  auto s = compute_stepsizes(0.1, 1, 1, 1, 4);
  EXPECT_DOUBLE_EQ(s.alpha, 1.0 / 14);
  EXPECT_DOUBLE_EQ(s.beta, 10.0 / 14);
  s = compute_stepsizes(1, 2, 1, 1, 3);
  EXPECT_DOUBLE_EQ(s.alpha, 1.0 / 7);
  EXPECT_DOUBLE_EQ(s.beta, 1.0 / 7);
  s = compute_stepsizes(0.3, 0, 1, 1, 3);
  EXPECT_EQ(s.alpha, 0.3);
  EXPECT_EQ(s.beta, 1.0);
  EXPECT_DOUBLE_EQ(s.alpha, s.beta * s.alpha_tilde);
  EXPECT_THROW(compute_stepsizes(0.1, 1, 1, 1.5, 4), std::invalid_argument);
  EXPECT_THROW(compute_stepsizes(-0.1, 1, 1, 1, 4), std::invalid_argument);
}

TEST(Init, Modes) {
  const auto q = quadratic_consensus(random_matrix(3, 4, 1));
  const Graph g = build_graph({GraphKind::Ring, 4});
  EXPECT_EQ(consensus_error(stack_primal(init_state(*q, g, InitMode::Zeros, 1))), 0.0);
  EXPECT_EQ(consensus_error(stack_primal(init_state(*q, g, InitMode::Identical, 1))), 0.0);
  const auto gauss = init_state(*q, g, InitMode::Gaussian, 1);
  EXPECT_GT(consensus_error(stack_primal(gauss)), 0.0);
  for (const auto& a : gauss) {
    EXPECT_EQ(a.Xhat, a.X);
    EXPECT_TRUE(a.lambda.isZero(0.0));
  }
  Eigen::MatrixXd X0(1, 2);
  X0 << 1, 3;
  EXPECT_DOUBLE_EQ(consensus_error(stack_primal(init_state(build_graph({GraphKind::Path, 2}), X0))), 2.0);
}

TEST(Surrogate, IdentityCopiesIterate) {
  const Graph g = build_graph({GraphKind::Ring, 5});
  auto state = init_state(g, random_matrix(4, 5, 2));
  for (std::size_t i = 0; i < 5; ++i) state[i].X = random_matrix(4, 1, 10 + i).col(0);
  AgentExecutor exec;
  CompressorSpec spec = kIdentity;
  spec.d = 4;
  surrogate_update(state, spec, 1.0, 1, 0, 0, exec);
  for (const auto& a : state) EXPECT_TRUE(bitwise_equal(a.Xhat, a.X));
}

TEST(Surrogate, AtFixedPointMessagesAreZero) {
  const Graph g = build_graph({GraphKind::Ring, 5});
  auto state = init_state(g, random_matrix(6, 5, 3));
  AgentExecutor exec;
  CompressorSpec spec = kQsgd4;
  spec.d = 6;
  const auto msgs = surrogate_update(state, spec, 1.0, 1, 0, 0, exec);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_TRUE(decode(msgs[i]).isZero(0.0));
    EXPECT_EQ(state[i].Xhat, state[i].X);
  }
}

TEST(Surrogate, GeometricTrackingWithFrozenIterate) {
  const std::size_t d = 16, K = 50, seeds = 200;
  const CompressorSpec spec{CompressorKind::Qsgd, 4, 1, d};
  const double gamma = 1.0, delta = certified_delta(spec);
  const Graph g = build_graph({GraphKind::Path, 2});
  std::vector<double> mean(K + 1, 0.0);
  AgentExecutor exec;
  for (std::size_t s = 0; s < seeds; ++s) {
    auto state = init_state(g, Eigen::MatrixXd::Zero(d, 2));
    state[0].X = random_matrix(d, 1, 1000 + s).col(0);
    const double e0 = (state[0].Xhat - state[0].X).squaredNorm();
    for (std::size_t k = 1; k <= K; ++k) {
      surrogate_update(state, spec, gamma, s, 0, k, exec);
      mean[k] += (state[0].Xhat - state[0].X).squaredNorm() / e0 / seeds;
    }
  }
  for (std::size_t k = 1; k <= K; ++k) EXPECT_LE(mean[k], std::pow(1 - gamma * delta, k)) << "k=" << k;
}

TEST(Aggregate, ZeroMessagesLeaveSumsUnchanged) {
  const Graph g = build_graph({GraphKind::Ring, 6});
  auto state = init_state(g, random_matrix(3, 6, 4));
  const auto before = state;
  AgentExecutor exec;
  CompressorSpec spec = kQsgd4;
  spec.d = 3;
  const auto msgs = surrogate_update(state, spec, 1.0, 1, 0, 0, exec);
  aggregate_messages(state, g, deliver(g, msgs), ExchangeMode::Difference, 1.0, exec);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(state[i].Xhat_neighbors, before[i].Xhat_neighbors);
}

TEST(Aggregate, IdentityColdStartSumsNeighbors) {
  const Graph g = build_graph({GraphKind::Star, 5});
  auto state = init_state(g, Eigen::MatrixXd::Zero(2, 5));
  const Eigen::MatrixXd X = random_matrix(2, 5, 9);
  for (std::size_t i = 0; i < 5; ++i) state[i].X = X.col(static_cast<Eigen::Index>(i));
  AgentExecutor exec;
  CompressorSpec spec = kIdentity;
  spec.d = 2;
  const auto msgs = surrogate_update(state, spec, 1.0, 1, 0, 0, exec);
  aggregate_messages(state, g, deliver(g, msgs), exchange_mode(spec, 1.0), 1.0, exec);
  for (std::size_t i = 0; i < 5; ++i) {
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(2);
    for (auto j : g.neighbors()[i]) expected += X.col(static_cast<Eigen::Index>(j));
    EXPECT_TRUE(bitwise_equal(state[i].Xhat_neighbors, expected));
  }
}

TEST(Aggregate, EnforcesSingleDelivery) {
  const Graph g = build_graph({GraphKind::Ring, 4});
  auto state = init_state(g, Eigen::MatrixXd::Zero(2, 4));
  AgentExecutor exec;
  CompressorSpec spec = kQsgd4;
  spec.d = 2;
  const auto msgs = surrogate_update(state, spec, 1.0, 1, 0, 0, exec);
  Inbox missing = deliver(g, msgs);
  missing[0].pop_back();
  EXPECT_THROW(aggregate_messages(state, g, missing, ExchangeMode::Difference, 1.0, exec), std::runtime_error);
  Inbox dup = deliver(g, msgs);
  dup[1].push_back(dup[1].front());
  EXPECT_THROW(aggregate_messages(state, g, dup, ExchangeMode::Difference, 1.0, exec), std::runtime_error);
  Inbox stranger = deliver(g, msgs);
  stranger[0][0].sender = 2;  // 2 is not adjacent to 0 on a 4-ring
  EXPECT_THROW(aggregate_messages(state, g, stranger, ExchangeMode::Difference, 1.0, exec), std::runtime_error);
}

TEST(Aggregate, MaintainedSumMatchesRecomputation) {
  const auto q = quadratic_consensus(random_matrix(8, 7, 5));
  const Graph g = build_graph({GraphKind::ErdosRenyi, 7, 0.5, 3});
  for (double gamma : {1.0, 0.6}) {
    AlgorithmConfig cfg = ticopd_config(kQsgd4, 37);
    cfg.gamma = gamma;
    cfg.init = InitMode::Gaussian;
    const auto res = run(cfg, *q, g);
    for (std::size_t i = 0; i < 7; ++i) {
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(8);
      for (auto j : g.neighbors()[i]) sum += res.final_state[j].Xhat;
      EXPECT_TRUE(bitwise_equal(res.final_state[i].Xhat_neighbors, sum));
    }
  }
}

TEST(PrimalDual, HandEvaluatedStep) {
  Eigen::MatrixXd c(1, 2);
  c << 0, 2;
  const auto q = quadratic_consensus(c);
  const Graph g = build_graph({GraphKind::Path, 2});
  auto state = init_state(g, c);  // X = (0, 2) and, with X-hat = X, exact aggregates
  const double eta = 0.7;
  const auto steps = compute_stepsizes(0.1, 1.0, eta, 1.0, spectral_info(g).M);
  EXPECT_DOUBLE_EQ(steps.alpha, 1.0 / 12);
  EXPECT_DOUBLE_EQ(steps.beta, 5.0 / 6);
  AgentExecutor exec;
  primal_dual_step(state, *q, steps, g, 1, exec);
  EXPECT_NEAR(state[0].X(0), 1.0 / 6, 1e-15);
  EXPECT_NEAR(state[0].lambda(0), -2 * eta, 1e-15);
  EXPECT_NEAR(state[1].X(0), 2 - 1.0 / 6, 1e-15);
  EXPECT_NEAR(state[0].lambda(0) + state[1].lambda(0), 0.0, 1e-15);
}

TEST(PrimalDual, StationaryPointIsFixed) {
  const auto q = quadratic_consensus(Eigen::MatrixXd::Constant(3, 4, 0.25));
  const Graph g = build_graph({GraphKind::Ring, 4});
  auto state = init_state(g, Eigen::MatrixXd::Constant(3, 4, 0.25));
  const auto before = stack_primal(state);
  AgentExecutor exec;
  primal_dual_step(state, *q, compute_stepsizes(0.1, 1, 1, 1, 4), g, 1, exec);
  EXPECT_TRUE(bitwise_equal(stack_primal(state), before));
  EXPECT_TRUE(stack_dual(state).isZero(0.0));
}

TEST(PrimalDual, DivergenceIsReported) {
  const auto q = quadratic_consensus(random_matrix(2, 3, 1));
  const Graph g = build_graph({GraphKind::Ring, 3});
  auto state = init_state(g, random_matrix(2, 3, 2));
  state[1].X(0) = std::numeric_limits<double>::infinity();
  AgentExecutor exec;
  try {
    primal_dual_step(state, *q, compute_stepsizes(0.1, 1, 1, 1, 3), g, 17, exec);
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.iteration(), 17u);
    EXPECT_EQ(e.agent(), 1u);
  }
}

TEST(Run, DualSumIsConserved) {
  const auto q = quadratic_consensus(random_matrix(5, 8, 3) * 3);
  const Graph g = build_graph({GraphKind::Ring, 8});
  for (std::size_t T : {1u, 10u, 300u}) {
    const auto res = run(ticopd_config(kQsgd4, T), *q, g);
    const Eigen::MatrixXd L = stack_dual(res.final_state);
    EXPECT_LE(L.rowwise().sum().norm(), 1e-8 * std::max(1.0, L.norm()));
  }
}

TEST(Run, IdentityCompressorConverges) {
  const auto q = quadratic_consensus(random_matrix(20, 10, 7));
  const Graph g = build_graph({GraphKind::Ring, 10});
  const auto res = run(ticopd_config(kIdentity, 5000), *q, g);
  ASSERT_EQ(res.status, RunStatus::Completed);
  EXPECT_LE(res.rows.back().grad_norm_avg, 1e-10);
  EXPECT_LE(res.rows.back().consensus_err, 1e-10);
  const Eigen::VectorXd x_bar = stack_primal(res.final_state).rowwise().mean();
  EXPECT_LE((x_bar - *q->minimizer()).norm(), 1e-6);
  // Two measurement paths for the stationarity gap agree.
  EXPECT_NEAR(q->global_gradient(x_bar).squaredNorm(), res.rows.back().grad_norm_avg, 1e-20);
}

TEST(Run, ExactPdMatchesOracleRecursionBitwise) {
  const auto q = quadratic_consensus(random_matrix(4, 6, 8));
  const Graph g = build_graph({GraphKind::Ring, 6});
  AlgorithmConfig cfg = ticopd_config(kIdentity, 0);
  cfg.init = InitMode::Gaussian;
  const auto info = spectral_info(g);
  const double eta = 1.0;  // certified delta of the identity compressor
  oracle::ExactPd ref;
  ref.X = stack_primal(init_state(*q, g, InitMode::Gaussian, cfg.seed));
  ref.Lambda = Eigen::MatrixXd::Zero(4, 6);
  ref.L = oracle::laplacian(6, g.edges());
  ref.alpha = 1.0 / (1.0 / cfg.alpha_tilde + cfg.theta * info.M);
  ref.beta = ref.alpha / cfg.alpha_tilde;
  ref.theta = cfg.theta;
  ref.eta = eta;
  ref.grad = [&](std::size_t i, const Eigen::VectorXd& x) { return q->gradient(i, x); };
  for (std::size_t T = 1; T <= 25; ++T) {
    ref.step();
    cfg.T = T;
    const auto res = run(cfg, *q, g);
    ASSERT_TRUE(bitwise_equal(stack_primal(res.final_state), ref.X)) << "T=" << T;
    ASSERT_TRUE(bitwise_equal(stack_dual(res.final_state), ref.Lambda)) << "T=" << T;
  }
}

TEST(Run, DeterministicAcrossRepeatsAndThreads) {
  const auto q = quadratic_consensus(random_matrix(10, 10, 9));
  const Graph g = build_graph({GraphKind::Ring, 10});
  for (auto kind : {AlgorithmKind::TiCoPD, AlgorithmKind::DgdQuantized, AlgorithmKind::Choco}) {
    AlgorithmConfig cfg = ticopd_config(kQsgd4, 200);
    cfg.kind = kind;
    cfg.stepsize = 0.1;
    cfg.gossip = 0.3;
    cfg.init = InitMode::Gaussian;
    const auto a = run(cfg, *q, g);
    const auto b = run(cfg, *q, g);
    cfg.threads = 4;
    const auto c = run(cfg, *q, g);
    EXPECT_TRUE(same_rows(a.rows, b.rows));
    EXPECT_TRUE(same_rows(a.rows, c.rows));
    EXPECT_TRUE(bitwise_equal(stack_primal(a.final_state), stack_primal(c.final_state)));
  }
}

TEST(Run, RowsFollowStride) {
  const auto q = quadratic_consensus(random_matrix(3, 4, 1));
  const Graph g = build_graph({GraphKind::Ring, 4});
  AlgorithmConfig cfg = ticopd_config(kQsgd4, 95);
  cfg.stride = 10;
  const auto res = run(cfg, *q, g);
  ASSERT_EQ(res.rows.size(), 10u);
  for (std::size_t k = 0; k < res.rows.size(); ++k) EXPECT_EQ(res.rows[k].t, 10 * k);
  for (std::size_t k = 1; k < res.rows.size(); ++k) EXPECT_GE(res.rows[k].bits_cum, res.rows[k - 1].bits_cum);
  EXPECT_EQ(res.rows.front().bits_cum, 0u);
}

TEST(Run, InnerStepsShrinkSurrogateGap) {
  const auto q = quadratic_consensus(random_matrix(16, 8, 2) * 2);
  const Graph g = build_graph({GraphKind::Ring, 8});
  const std::size_t T = 30;
  std::vector<double> gap1(T + 1, 0.0), gap20(T + 1, 0.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    AlgorithmConfig cfg = ticopd_config(kQsgd4, T);
    cfg.seed = seed;
    cfg.init = InitMode::Gaussian;
    const auto one = run(cfg, *q, g);
    cfg.inner_steps = 20;
    const auto many = run(cfg, *q, g);
    EXPECT_EQ(many.rows.back().bits_cum, 20 * one.rows.back().bits_cum);
    for (std::size_t t = 0; t <= T; ++t) {
      gap1[t] += one.rows[t].surrogate_gap;
      gap20[t] += many.rows[t].surrogate_gap;
    }
  }
  // The gap at t = 1 is the first primal move, before inner steps differ.
  for (std::size_t t = 2; t <= T; ++t) EXPECT_LT(gap20[t], gap1[t]) << "t=" << t;
}

TEST(Run, DivergingRunIsTruncatedAndFlagged) {
  const auto q = quadratic_consensus(random_matrix(3, 4, 1) * 10);
  const Graph g = build_graph({GraphKind::Ring, 4});
  AlgorithmConfig cfg;
  cfg.kind = AlgorithmKind::Dgd;
  cfg.stepsize = 50.0;
  cfg.T = 5000;
  const auto res = run(cfg, *q, g);
  EXPECT_EQ(res.status, RunStatus::Diverged);
  EXPECT_GT(res.diverged_at, 0u);
  EXPECT_LT(res.rows.size(), 5001u);
  EXPECT_LT(res.rows.back().t, res.diverged_at);
}

TEST(Dgd, HomogeneousConverges) {
  const auto q = quadratic_consensus(random_matrix(5, 1, 3).replicate(1, 6));
  const Graph g = build_graph({GraphKind::Ring, 6});
  AlgorithmConfig cfg;
  cfg.kind = AlgorithmKind::Dgd;
  cfg.stepsize = 0.2;
  cfg.T = 400;
  cfg.init = InitMode::Gaussian;
  const auto res = run(cfg, *q, g);
  const Eigen::MatrixXd X = stack_primal(res.final_state);
  for (Eigen::Index i = 0; i < 6; ++i) EXPECT_LE((X.col(i) - *q->minimizer()).norm(), 1e-8);
}

TEST(Dgd, HeterogeneousFixedPointBias) {
  auto inst = heterogeneous_ls(6, 3, 40);
  const Graph g = build_graph({GraphKind::Ring, 6});
  AlgorithmConfig cfg;
  cfg.kind = AlgorithmKind::Dgd;
  cfg.stepsize = 0.1;
  cfg.T = 20000;
  cfg.stride = 100;
  const auto res = run(cfg, *inst.obj, g);
  const Eigen::MatrixXd fixed = oracle::dgd_fixed_point(metropolis_weights(g), inst.A, inst.b, cfg.stepsize);
  EXPECT_LE((stack_primal(res.final_state) - fixed).norm(), 1e-8);
  const double plateau = inst.obj->global_gradient(fixed.rowwise().mean()).squaredNorm();
  EXPECT_GT(plateau, 1e-6);
  EXPECT_NEAR(res.rows.back().grad_norm_avg, plateau, 1e-8 * std::max(1.0, plateau));
}

TEST(Dgd, QuantizedIdentityEqualsDgdBitwise) {
  const auto q = quadratic_consensus(random_matrix(4, 5, 4));
  const Graph g = build_graph({GraphKind::Ring, 5});
  AlgorithmConfig cfg;
  cfg.kind = AlgorithmKind::Dgd;
  cfg.stepsize = 0.15;
  cfg.T = 200;
  cfg.init = InitMode::Gaussian;
  const auto plain = run(cfg, *q, g);
  cfg.kind = AlgorithmKind::DgdQuantized;
  cfg.compressor = kIdentity;
  const auto quant = run(cfg, *q, g);
  EXPECT_TRUE(same_rows(plain.rows, quant.rows));
  EXPECT_TRUE(bitwise_equal(stack_primal(plain.final_state), stack_primal(quant.final_state)));
}

TEST(Dgd, QuantizedKeepsConsensusFloor) {
  const auto q = quadratic_consensus(random_matrix(20, 10, 5));
  const Graph g = build_graph({GraphKind::Ring, 10});
  AlgorithmConfig cfg;
  cfg.kind = AlgorithmKind::DgdQuantized;
  cfg.stepsize = 0.05;
  cfg.compressor = kQsgd4;
  cfg.T = 5000;
  const auto res = run(cfg, *q, g);
  double floor = INFINITY;
  for (std::size_t k = res.rows.size() * 4 / 5; k < res.rows.size(); ++k)
    floor = std::min(floor, res.rows[k].consensus_err);
  EXPECT_GT(floor, 1e-2);
}

TEST(Dgd, QuantizedStaysAtZeroFixedPoint) {
  const auto q = quadratic_consensus(Eigen::MatrixXd::Zero(4, 5));
  const Graph g = build_graph({GraphKind::Ring, 5});
  AlgorithmConfig cfg;
  cfg.kind = AlgorithmKind::DgdQuantized;
  cfg.compressor = kQsgd4;
  cfg.T = 50;
  EXPECT_TRUE(stack_primal(run(cfg, *q, g).final_state).isZero(0.0));
}

TEST(Choco, IdentityFullGossipHasDgdFixedPoint) {
  auto inst = heterogeneous_ls(5, 3, 60);
  const Graph g = build_graph({GraphKind::Ring, 5});
  AlgorithmConfig cfg;
  cfg.kind = AlgorithmKind::Choco;
  cfg.compressor = kIdentity;
  cfg.gossip = 1.0;
  cfg.stepsize = 0.1;
  cfg.T = 20000;
  cfg.stride = 1000;
  const auto res = run(cfg, *inst.obj, g);
  const Eigen::MatrixXd fixed = oracle::dgd_fixed_point(metropolis_weights(g), inst.A, inst.b, cfg.stepsize);
  EXPECT_LE((stack_primal(res.final_state) - fixed).norm(), 1e-8);
}

TEST(Choco, HomogeneousConverges) {
  const auto q = quadratic_consensus(random_matrix(6, 1, 8).replicate(1, 8));
  const Graph g = build_graph({GraphKind::Ring, 8});
  AlgorithmConfig cfg;
  cfg.kind = AlgorithmKind::Choco;
  cfg.compressor = kQsgd4;
  cfg.gossip = 0.3;
  cfg.stepsize = 0.1;
  cfg.T = 3000;
  cfg.init = InitMode::Gaussian;
  const auto res = run(cfg, *q, g);
  const Eigen::MatrixXd X = stack_primal(res.final_state);
  for (Eigen::Index i = 0; i < 8; ++i) EXPECT_LE((X.col(i) - *q->minimizer()).norm(), 1e-6);
}

TEST(Choco, PlateausAboveTiCoPDAtMatchedBits) {
  auto inst = heterogeneous_ls(8, 4, 80);
  const Graph g = build_graph({GraphKind::Ring, 8});
  AlgorithmConfig choco;
  choco.kind = AlgorithmKind::Choco;
  choco.compressor = kQsgd4;
  choco.gossip = 0.3;
  choco.stepsize = 0.05;
  choco.T = 6000;
  AlgorithmConfig pd = ticopd_config(kQsgd4, 6000);
  pd.alpha_tilde = 0.05;
  const auto a = run(choco, *inst.obj, g);
  const auto b = run(pd, *inst.obj, g);
  ASSERT_EQ(a.rows.back().bits_cum, b.rows.back().bits_cum);
  EXPECT_LT(b.rows.back().grad_norm_avg, a.rows.back().grad_norm_avg);
  EXPECT_GT(a.rows.back().grad_norm_avg, 1e-8);
}
