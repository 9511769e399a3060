#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ergm/model.hpp"
#include "ergm/network.hpp"
#include "ergm/rng.hpp"
#include "ergm/sampler.hpp"
#include "oracles.hpp"

using namespace ergm;

namespace {

ModelSpec everything(std::size_t n) {
  std::vector<double> cov(n);
  for (std::size_t i = 0; i < n; ++i) cov[i] = 0.5 * static_cast<double>(i) - 1.25;
  return ModelSpec({Edges{}, Triangles{}, KStar{2}, KStar{3}, DegreeCount{0}, DegreeCount{2},
                    DegreeCount{3}, GwDegree(0.25), GwDegree(1.5),
                    NodeCovariateSum{cov, "x"}});
}

Network path3() {
  Network net(3);
  net.toggle(0, 1);
  net.toggle(1, 2);
  return net;
}

}  // namespace

TEST(Stats, TriangleGraph) {
  const ModelSpec spec({Edges{}, Triangles{}});
  const StatVector t = stat_vector(spec, complete_network(3));
  EXPECT_EQ(t, (StatVector{{3.0, 1.0}}));
}

TEST(Stats, GwDegreeOnThreeStar) {
  // Degrees (3, 1, 1, 1), decay 0.25:
  //   e^0.25 * ([1 - r^3] + 3 [1 - r]),  r = 1 - e^-0.25
  // evaluated independently as 4.270128310498418.
  Network star(4);
  for (std::uint32_t k = 1; k < 4; ++k) star.toggle(0, k);
  const ModelSpec spec({Edges{}, GwDegree(0.25)});
  const StatVector t = stat_vector(spec, star);
  EXPECT_EQ(t[0], 3.0);
  EXPECT_NEAR(t[1], 4.270128310498418, 1e-12);
}

TEST(Stats, MatchesDefinitionOracle) {
  Rng rng(101);
  for (int r = 0; r < 200; ++r) {
    const std::size_t n = 2 + rng.below(12);
    const Network net = erdos_renyi(n, rng.uniform(), rng);
    const ModelSpec spec = everything(n);
    const StatVector t = stat_vector(spec, net);
    const auto ref = oracle::stats(spec, net);
    for (std::size_t k = 0; k < spec.size(); ++k)
      ASSERT_NEAR(t[static_cast<Eigen::Index>(k)], ref[k], 1e-10) << spec.names()[k];
  }
}

TEST(ChangeStats, SimpleCases) {
  const ModelSpec spec({Edges{}, Triangles{}});
  const ChangeVector c = change_vector(spec, path3(), Dyad{0, 2});
  EXPECT_EQ(c[0], 1.0);
  EXPECT_EQ(c[1], 1.0);
  // Same value whether or not the dyad is currently a tie.
  EXPECT_EQ(change_vector(spec, complete_network(3), Dyad{0, 2}), c);
}

TEST(ChangeStats, IncrementalAgreesWithTwoRecomputations) {
  Rng rng(7);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 2 + rng.below(11);
    const ModelSpec spec = everything(n);
    const Network net = erdos_renyi(n, rng.uniform(), rng);
    const Dyad d = random_dyad(n, rng);
    Network plus = net, minus = net;
    plus.set_tie(d.i, d.j, true);
    minus.set_tie(d.i, d.j, false);
    const StatVector diff = stat_vector(spec, plus) - stat_vector(spec, minus);
    const ChangeVector c = change_vector(spec, net, d);
    for (std::size_t k = 0; k < spec.size(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      if (is_integer_valued(spec.term(k))) ASSERT_EQ(c[kk], diff[kk]) << spec.names()[k];
      else ASSERT_NEAR(c[kk], diff[kk], 1e-12) << spec.names()[k];
    }
  }
}

TEST(ChangeStats, TriangleChangeIsCommonNeighbours) {
  Rng rng(8);
  const ModelSpec spec({Triangles{}});
  for (int trial = 0; trial < 500; ++trial) {
    const Network net = erdos_renyi(15, 0.4, rng);
    const Dyad d = random_dyad(15, rng);
    const auto a = oracle::dense(net);
    int common = 0;
    for (std::size_t k = 0; k < 15; ++k) common += a[d.i][k] && a[d.j][k];
    ASSERT_EQ(change_vector(spec, net, d)[0], common);
  }
}

TEST(ChangeStats, DegreeChangeBounded) {
  Rng rng(9);
  const ModelSpec spec({DegreeCount{0}, DegreeCount{1}, DegreeCount{2}, DegreeCount{5}});
  for (int trial = 0; trial < 2000; ++trial) {
    const Network net = erdos_renyi(10, rng.uniform(), rng);
    const ChangeVector c = change_vector(spec, net, random_dyad(10, rng));
    ASSERT_TRUE((c.array() >= -2).all() && (c.array() <= 2).all());
  }
}

TEST(ChangeStats, EdgesChangeSumsToDyadCount) {
  Rng rng(10);
  const ModelSpec spec({Edges{}});
  const Network net = erdos_renyi(12, 0.3, rng);
  double sum = 0.0;
  for (std::uint32_t i = 0; i < 12; ++i)
    for (std::uint32_t j = i + 1; j < 12; ++j) sum += change_vector(spec, net, Dyad{i, j})[0];
  EXPECT_EQ(sum, static_cast<double>(dyad_count(12)));
}

TEST(StatDelta, SignedIncrement) {
  const ModelSpec e({Edges{}});
  EXPECT_EQ(stat_delta_on_toggle(e, Network(5), Dyad{1, 3})[0], 1.0);
  const ModelSpec t({Triangles{}});
  EXPECT_EQ(stat_delta_on_toggle(t, complete_network(3), Dyad{0, 1})[0], -1.0);
}

TEST(StatDelta, ExactOverRandomToggles) {
  Rng rng(12);
  const ModelSpec spec({Edges{}, Triangles{}, KStar{2}, DegreeCount{3}});
  Network net = erdos_renyi(9, 0.5, rng);
  StatVector running = stat_vector(spec, net);
  for (int t = 0; t < 10000; ++t) {
    const Dyad d = random_dyad(9, rng);
    running += stat_delta_on_toggle(spec, net, d);
    net.toggle(d);
    ASSERT_EQ(running, stat_vector(spec, net));
  }
}

TEST(ModelSpec, ParsesDeclarativeFormat) {
  const ModelSpec spec = parse_model(
      "# E. coli model\nedges\ndegree 2 3 4 6\ngwdegree 0.25\ntriangles\nkstar 2\n");
  EXPECT_EQ(spec.size(), 8u);
  EXPECT_EQ(spec.names(), (std::vector<std::string>{"edges", "degree2", "degree3", "degree4",
                                                    "degree6", "gwdegree0.25", "triangle",
                                                    "kstar2"}));
  EXPECT_FALSE(spec.integer_valued());
  EXPECT_TRUE(parse_model("edges\ntriangles\n").integer_valued());
}

TEST(ModelSpec, RejectsBadInput) {
  EXPECT_THROW(parse_model(""), ParseError);
  EXPECT_THROW(parse_model("edges 3\n"), ParseError);
  EXPECT_THROW(parse_model("kstar 1\n"), ParseError);
  EXPECT_THROW(parse_model("degree -1\n"), ParseError);
  EXPECT_THROW(parse_model("gwdegree 0\n"), ParseError);
  EXPECT_THROW(parse_model("gwdegree abc\n"), ParseError);
  EXPECT_THROW(parse_model("wibble\n"), ParseError);
  EXPECT_THROW(GwDegree(-1.0), std::invalid_argument);
}

TEST(ModelSpec, NodeCovariateFromFile) {
  const auto dir = std::filesystem::temp_directory_path() / "ergm-test-cov";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "age.txt") << "1 2 3\n";
  std::ofstream(dir / "model.txt") << "edges\nnodecov age.txt\n";
  const ModelSpec spec = load_model(dir / "model.txt");
  Network net(3);
  net.toggle(0, 2);
  EXPECT_EQ(stat_vector(spec, net)[1], 4.0);
  EXPECT_THROW(stat_vector(spec, Network(4)), std::invalid_argument);
}

TEST(ModelSpec, FingerprintTracksContent) {
  EXPECT_EQ(parse_model("edges\ntriangles\n").fingerprint(),
            ModelSpec({Edges{}, Triangles{}}).fingerprint());
  EXPECT_NE(parse_model("edges\ntriangles\n").fingerprint(),
            parse_model("triangles\nedges\n").fingerprint());
  EXPECT_NE(parse_model("gwdegree 0.25\n").fingerprint(), parse_model("gwdegree 0.5\n").fingerprint());
}
