#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ergm/annealer.hpp"
#include "ergm/pseudolikelihood.hpp"
#include "ergm/sampler.hpp"

using namespace ergm;

namespace {

const ModelSpec kEdgesTriangles({Edges{}, Triangles{}});

Eigen::VectorXd score(const ModelSpec& spec, const Network& net, const Theta& theta) {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(theta.size());
  for (const DesignRow& r : design_rows(spec, net)) {
    const double p = 1.0 / (1.0 + std::exp(-r.covariates.dot(theta)));
    s += (static_cast<double>(r.response) - p) * r.covariates;
  }
  return s;
}

}  // namespace

TEST(DesignRows, EmptyAndComplete) {
  const auto empty = design_rows(ModelSpec({Edges{}}), Network(3));
  ASSERT_EQ(empty.size(), 3u);
  for (const auto& r : empty) {
    EXPECT_FALSE(r.response);
    EXPECT_EQ(r.covariates, ChangeVector::Ones(1));
  }
  const auto k3 = design_rows(kEdgesTriangles, complete_network(3));
  ASSERT_EQ(k3.size(), 3u);
  for (const auto& r : k3) {
    EXPECT_TRUE(r.response);
    EXPECT_EQ(r.covariates, ChangeVector::Ones(2));
  }
}

TEST(DesignRows, OneRowPerDyad) {
  Rng rng(1);
  for (std::size_t n : {2u, 5u, 13u})
    EXPECT_EQ(design_rows(kEdgesTriangles, erdos_renyi(n, 0.4, rng)).size(), dyad_count(n));
}

TEST(Mple, EdgesOnlyIsLogitDensity) {
  Network net(8);  // 28 dyads, 7 ties: density 0.25
  for (std::uint32_t k = 1; k < 8; ++k) net.toggle(0, k);
  const MpleResult r = mple(ModelSpec({Edges{}}), net);
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.theta[0], std::log(1.0 / 3.0), 1e-10);
  EXPECT_NEAR(r.theta[0], -1.0986, 1e-4);

  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const Network g = erdos_renyi(15, 0.1 + 0.8 * rng.uniform(), rng);
    const double d = density(g);
    EXPECT_NEAR(mple(ModelSpec({Edges{}}), g).theta[0], std::log(d / (1 - d)), 1e-10);
  }
}

TEST(Mple, ScoreVanishesAtSolution) {
  Rng rng(3);
  const ModelSpec spec({Edges{}, Triangles{}, KStar{2}});
  int fitted = 0;
  for (int t = 0; t < 30; ++t) {
    const Network net = erdos_renyi(12, 0.3, rng);
    try {
      const MpleResult r = mple(spec, net);
      ASSERT_TRUE(r.converged);
      EXPECT_LE(r.max_abs_score, 1e-8);
      EXPECT_LE(score(spec, net, r.theta).lpNorm<Eigen::Infinity>(), 1e-7);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r.covariance);
      EXPECT_GE(eig.eigenvalues().minCoeff(), 0.0);
      EXPECT_LE((r.covariance - r.covariance.transpose()).cwiseAbs().maxCoeff(), 1e-12);
      ++fitted;
    } catch (const SeparationError&) {
    }
  }
  EXPECT_GT(fitted, 20);
}

TEST(Mple, SeparationAndSingularity) {
  EXPECT_THROW(mple(ModelSpec({Edges{}}), Network(6)), SeparationError);
  EXPECT_THROW(mple(ModelSpec({Edges{}}), complete_network(6)), SeparationError);
  // A constant node covariate makes the second column twice the first.
  Rng rng(4);
  const Network net = erdos_renyi(10, 0.4, rng);
  const ModelSpec collinear({Edges{}, NodeCovariateSum{std::vector<double>(10, 1.0), "one"}});
  EXPECT_THROW(mple(collinear, net), SingularInformationError);
  // Every triangle-closing dyad is a tie and every other one is not.
  Network sep(6);
  sep.toggle(0, 1);
  sep.toggle(1, 2);
  sep.toggle(0, 2);
  EXPECT_THROW(mple(kEdgesTriangles, sep), NumericalError);
}

TEST(Mple, RelabelingInvariance) {
  Rng rng(5);
  for (int t = 0; t < 10; ++t) {
    const Network net = erdos_renyi(11, 0.35, rng);
    std::vector<std::size_t> perm(11);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = 10; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    const Theta a = mple(kEdgesTriangles, net).theta;
    const Theta b = mple(kEdgesTriangles, permute(net, perm)).theta;
    EXPECT_LE((a - b).lpNorm<Eigen::Infinity>(), 1e-8);
  }
}

TEST(Mple, EqualStatisticsDifferentEstimates) {
  // Annealed networks sharing T = (18, 13) on nine nodes.
  const StatVector target{{18.0, 13.0}};
  std::vector<Theta> fits;
  for (std::uint64_t s = 0; s < 12; ++s) {
    AnnealConfig c;
    c.seed = s;
    c.init = FromErdosRenyi{0.5};
    const AnnealResult a = anneal(kEdgesTriangles, target, 9, c);
    ASSERT_TRUE(a.success);
    try {
      fits.push_back(mple(kEdgesTriangles, a.network).theta);
    } catch (const NumericalError&) {
    }
  }
  ASSERT_GE(fits.size(), 2u);
  double widest = 0.0;
  for (const auto& f : fits) widest = std::max(widest, (f - fits.front()).lpNorm<Eigen::Infinity>());
  EXPECT_GT(widest, 1e-4);
}

TEST(MpleCloud, RecordsFailuresWithoutThrowing) {
  Rng rng(6);
  std::vector<Network> nets = {erdos_renyi(8, 0.4, rng), Network(8), erdos_renyi(8, 0.5, rng)};
  const auto out = mple_cloud(ModelSpec({Edges{}}), nets);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_TRUE(out[0].ok());
  EXPECT_FALSE(out[1].ok());
  EXPECT_FALSE(out[1].error.empty());
  EXPECT_TRUE(out[2].ok());
  std::vector<Network> mixed = {Network(3), Network(4)};
  EXPECT_THROW(mple_cloud(ModelSpec({Edges{}}), mixed), std::invalid_argument);
}

TEST(MpleCloud, IsomorphicNetworksAgree) {
  Rng rng(7);
  const Network net = erdos_renyi(10, 0.4, rng);
  const std::vector<std::size_t> perm = {9, 8, 7, 6, 5, 4, 3, 2, 1, 0};
  std::vector<Network> nets = {net, permute(net, perm)};
  const auto out = mple_cloud(kEdgesTriangles, nets, {}, 2);
  ASSERT_TRUE(out[0].ok() && out[1].ok());
  EXPECT_LE((out[0].result->theta - out[1].result->theta).lpNorm<Eigen::Infinity>(), 1e-8);
}
