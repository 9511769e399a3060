#include <gtest/gtest.h>

#include <cmath>

#include "ergm/exact.hpp"
#include "ergm/mcmle.hpp"
#include "ergm/sampler.hpp"

using namespace ergm;

namespace {

const ModelSpec kEdgesTriangles({Edges{}, Triangles{}});

SampleBatch draw(const Theta& theta, std::size_t n, std::size_t L, std::uint64_t seed) {
  SamplerConfig c = default_sampler_config(n);
  c.sample_size = L;
  c.seed = seed;
  return sample(kEdgesTriangles, theta, Network(n), c);
}

/// A seven-node network with T = (10, 5).
Network seven_node_observed() {
  // 4-clique, node 4 closing one more triangle on (0, 1), then a path 4-5-6.
  Network net(7);
  for (std::uint32_t i = 0; i < 4; ++i)
    for (std::uint32_t j = i + 1; j < 4; ++j) net.toggle(i, j);
  net.toggle(0, 4);
  net.toggle(1, 4);
  net.toggle(4, 5);
  net.toggle(5, 6);
  return net;
}

}  // namespace

TEST(ApproxLoglik, ZeroAtTheta0) {
  const SampleBatch b = draw(Theta{{-1.0, 0.5}}, 7, 500, 1);
  const Theta th0{{-1.0, 0.5}};
  EXPECT_EQ(approx_loglik_diff(th0, th0, StatVector{{10.0, 5.0}}, b), 0.0);
}

TEST(ApproxLoglik, InvariantToCommonShift) {
  SampleBatch b = draw(Theta{{-1.0, 0.5}}, 7, 500, 2);
  const Theta th0{{-1.0, 0.5}}, th{{-0.8, 0.3}};
  StatVector t{{10.0, 5.0}};
  const double before = approx_loglik_diff(th, th0, t, b);
  const Eigen::RowVector2d c(123.0, -45.0);
  b.stats.rowwise() += c;
  t += c.transpose();
  EXPECT_NEAR(approx_loglik_diff(th, th0, t, b), before, 1e-12);
}

TEST(ApproxLoglik, OverflowSafe) {
  SampleBatch b = draw(Theta::Zero(2), 7, 200, 3);
  b.stats *= 1e4;
  const double v = approx_loglik_diff(Theta{{1.0, 1.0}}, Theta::Zero(2), StatVector{{1e5, 5e4}}, b);
  EXPECT_TRUE(std::isfinite(v));
}

TEST(Degeneracy, EmptyBatchFlagged) {
  SampleBatch b;
  b.stats = Eigen::MatrixXd::Zero(100, 2);
  b.edge_counts.assign(100, 0);
  EXPECT_TRUE(degeneracy_check(b, 9).flagged);
}

TEST(Degeneracy, UniformDistributionNotFlagged) {
  EXPECT_FALSE(degeneracy_check(draw(Theta::Zero(2), 9, 1000, 4), 9).flagged);
}

TEST(Degeneracy, HeavyTriangleWeightFlagged) {
  // Regression fixture: the chain locks onto the complete graph.
  const SampleBatch b = draw(Theta{{-1.0, 2.0}}, 9, 1000, 5);
  const DegeneracyDiagnostics d = degeneracy_check(b, 9);
  EXPECT_TRUE(d.flagged);
  EXPECT_GT(d.extreme_fraction, 0.95);
}

TEST(MomentZ, ZeroAtBatchMean) {
  const SampleBatch b = draw(Theta{{-0.5, 0.2}}, 8, 800, 6);
  EXPECT_LE(moment_z(b, b.mean()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(MomentZ, FarFromMleIsDetected) {
  SamplerConfig c = default_sampler_config(9);
  c.sample_size = 10000;
  c.seed = 7;
  const Eigen::VectorXd z =
      moment_check(kEdgesTriangles, Theta::Zero(2), StatVector{{18.0, 13.0}}, Network(9), c);
  EXPECT_GT(z.cwiseAbs().maxCoeff(), 3.0);
}

TEST(MomentZ, WithinToleranceAtExactMle) {
  const EnumerationTable table = enumerate(kEdgesTriangles, 7);
  const StatVector t{{10.0, 5.0}};
  const ExactMleResult mle = exact_mle(table, t);
  ASSERT_TRUE(mle.exists);
  SamplerConfig c = default_sampler_config(7);
  c.sample_size = 10000;
  c.seed = 8;
  EXPECT_LE(moment_check(kEdgesTriangles, mle.theta, t, Network(7), c).cwiseAbs().maxCoeff(), 3.0);
}

TEST(InnerStep, ConcaveMaximumHasZeroGradient) {
  const SampleBatch b = draw(Theta{{-0.7, 0.3}}, 7, 5000, 9);
  const StatVector t{{10.0, 5.0}};
  const Eigen::MatrixXd centered = b.stats.rowwise() - t.transpose();
  const InnerStep s = maximize_loglik_ratio(centered, 10.0);
  ASSERT_FALSE(s.on_boundary);
  EXPECT_LE(s.max_abs_gradient, 1e-6);
  // Nearby points are no better.
  const Theta th0{{-0.7, 0.3}};
  const double best = approx_loglik_diff(th0 + s.delta, th0, t, b);
  for (double dx : {-0.01, 0.01})
    for (double dy : {-0.01, 0.01})
      EXPECT_LE(approx_loglik_diff(th0 + s.delta + Theta{{dx, dy}}, th0, t, b), best + 1e-12);
}

TEST(InnerStep, TrustRegionRespected) {
  const SampleBatch b = draw(Theta::Zero(2), 7, 2000, 10);
  const Eigen::MatrixXd centered = b.stats.rowwise() - StatVector{{4.0, 0.0}}.transpose();
  const InnerStep s = maximize_loglik_ratio(centered, 0.25);
  EXPECT_LE(s.delta.lpNorm<Eigen::Infinity>(), 0.25 + 1e-12);
  EXPECT_TRUE(s.on_boundary);
}

TEST(McmleFit, StartingAtExactMleConvergesQuickly) {
  const Network obs = seven_node_observed();
  ASSERT_EQ(stat_vector(kEdgesTriangles, obs), (StatVector{{10.0, 5.0}}));
  const ExactMleResult mle = exact_mle(enumerate(kEdgesTriangles, 7), StatVector{{10.0, 5.0}});
  McmleConfig c;
  c.sampler = default_sampler_config(7);
  c.sampler.sample_size = 10000;
  c.seed = 11;
  const McmleResult r = mcmle_fit(kEdgesTriangles, obs, mle.theta, c);
  EXPECT_EQ(r.status, McmleStatus::Converged);
  EXPECT_LE(r.outer_iterations, 2);
  EXPECT_LE((r.theta - mle.theta).lpNorm<Eigen::Infinity>(), 0.05);
}

TEST(McmleFit, ConvergedImpliesMomentCriterion) {
  const Network obs = seven_node_observed();
  McmleConfig c;
  c.sampler = default_sampler_config(7);
  c.sampler.sample_size = 4000;
  c.seed = 12;
  const McmleResult r = mcmle_fit(kEdgesTriangles, obs, Theta::Zero(2), c);
  ASSERT_EQ(r.status, McmleStatus::Converged);
  EXPECT_LE(r.final_moment_z.cwiseAbs().maxCoeff(), c.convergence_tolerance);
  ASSERT_EQ(r.trace.size(), static_cast<std::size_t>(r.outer_iterations));
  for (const auto& it : r.trace) EXPECT_LE((it.theta_next - it.theta0).lpNorm<Eigen::Infinity>(), 0.5 + 1e-12);
}

TEST(McmleFit, DeterministicUnderSeed) {
  const Network obs = seven_node_observed();
  McmleConfig c;
  c.sampler = default_sampler_config(7);
  c.sampler.sample_size = 1000;
  c.seed = 13;
  const McmleResult a = mcmle_fit(kEdgesTriangles, obs, Theta::Zero(2), c);
  const McmleResult b = mcmle_fit(kEdgesTriangles, obs, Theta::Zero(2), c);
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_EQ(a.outer_iterations, b.outer_iterations);
}

TEST(McmleFit, DegenerateStartReportedNotThrown) {
  const Network obs = seven_node_observed();
  McmleConfig c;
  c.sampler = default_sampler_config(7);
  c.seed = 14;
  const McmleResult r = mcmle_fit(kEdgesTriangles, obs, Theta{{-1.0, 3.0}}, c);
  EXPECT_EQ(r.status, McmleStatus::Degenerate);
  EXPECT_TRUE(r.degeneracy.flagged);
  EXPECT_THROW(mcmle_fit(kEdgesTriangles, obs, Theta{{NAN, 0.0}}, c), std::invalid_argument);
}
