#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "ergm/edgelist.hpp"
#include "ergm/network.hpp"
#include "ergm/rng.hpp"
#include "ergm/sampler.hpp"

using namespace ergm;

namespace {

std::uint64_t recount(const Network& net) {
  std::uint64_t e = 0;
  for (std::size_t i = 0; i < net.size(); ++i)
    for (std::size_t j = i + 1; j < net.size(); ++j) e += net.has_tie(i, j);
  return e;
}

}  // namespace

TEST(Network, ToggleAddsAndRemovesTies) {
  Network net(3);
  net.toggle(0, 1);
  EXPECT_EQ(net.edge_count(), 1u);
  EXPECT_TRUE(net.has_tie(0, 1));
  EXPECT_TRUE(net.has_tie(1, 0));

  Network k4 = complete_network(4);
  EXPECT_EQ(k4.edge_count(), 6u);
  EXPECT_EQ(toggle(k4, Dyad{2, 3}).edge_count(), 5u);
  EXPECT_EQ(k4.edge_count(), 6u);  // value-level toggle leaves the input alone
}

TEST(Network, ToggleIsAnInvolution) {
  Rng rng(3);
  Network net = erdos_renyi(20, 0.3, rng);
  const Network before = net;
  for (int t = 0; t < 500; ++t) {
    const Dyad d = random_dyad(20, rng);
    net.toggle(d);
    net.toggle(d);
    ASSERT_EQ(net, before);
  }
}

TEST(Network, RejectsInvalidDyads) {
  Network net(4);
  EXPECT_THROW(net.toggle(0, 4), std::out_of_range);
  EXPECT_THROW(net.toggle(2, 2), std::out_of_range);
  EXPECT_THROW(dyad_from_index(4, 6), std::out_of_range);
}

TEST(Network, DyadCount) {
  EXPECT_EQ(dyad_count(1), 0u);
  EXPECT_EQ(dyad_count(9), 36u);
  EXPECT_EQ(dyad_count(10), 45u);
  // 2^45 networks on ten nodes, a little over 3.5e13.
  EXPECT_NEAR(std::ldexp(1.0, 45), 3.52e13, 0.01e13);
}

TEST(Network, DyadIndexRoundTrip) {
  for (std::uint64_t n : {2u, 5u, 9u, 70u}) {
    std::uint64_t k = 0;
    for (std::uint32_t i = 0; i < n; ++i)
      for (std::uint32_t j = i + 1; j < n; ++j, ++k) {
        ASSERT_EQ(dyad_index(n, i, j), k);
        ASSERT_EQ(dyad_from_index(n, k), (Dyad{i, j}));
      }
  }
}

TEST(Network, Density) {
  EXPECT_DOUBLE_EQ(density(complete_network(5)), 1.0);
  EXPECT_DOUBLE_EQ(density(Network(5)), 0.0);
  EXPECT_THROW(density(Network(1)), std::invalid_argument);
  EXPECT_NEAR(519.0 / static_cast<double>(dyad_count(418)), 0.005955, 5e-7);
}

TEST(Network, CachesMatchRecountUnderRandomToggles) {
  Rng rng(17);
  for (std::size_t n : {2u, 7u, 64u, 65u, 130u}) {
    Network net(n);
    for (int t = 0; t < 3000; ++t) {
      net.toggle(random_dyad(n, rng));
      if (t % 97 == 0) {
        ASSERT_EQ(net.edge_count(), recount(net));
        ASSERT_EQ(net.ties().size(), net.edge_count());
        for (std::size_t i = 0; i < n; ++i) {
          std::uint32_t d = 0;
          for (std::size_t j = 0; j < n; ++j) d += i != j && net.has_tie(i, j);
          ASSERT_EQ(net.degree(i), d);
        }
      }
    }
  }
}

TEST(Network, SharedPartnersCountsCommonNeighbours) {
  Network net(70);
  for (std::uint32_t k : {2u, 5u, 64u, 69u}) {
    net.toggle(0, k);
    net.toggle(1, k);
  }
  net.toggle(0, 3);
  EXPECT_EQ(net.shared_partners(0, 1), 4u);
}

TEST(Network, PermuteRelabelsNodes) {
  Network net(4);
  net.toggle(0, 1);
  net.toggle(1, 2);
  const std::vector<std::size_t> perm = {3, 2, 1, 0};
  const Network p = permute(net, perm);
  EXPECT_TRUE(p.has_tie(3, 2));
  EXPECT_TRUE(p.has_tie(2, 1));
  EXPECT_EQ(p.edge_count(), 2u);
}

TEST(EdgeList, RoundTripIsIdentity) {
  Rng rng(5);
  for (int r = 0; r < 20; ++r) {
    const Network net = erdos_renyi(1 + rng.below(40), 0.2, rng);
    std::ostringstream os;
    write_edge_list(os, net);
    ASSERT_EQ(parse_edge_list(os.str()), net);
  }
}

TEST(EdgeList, DuplicatesAndSelfLoops) {
  std::istringstream in("n 4\n0 1\n1 0\n0 1\n2 2\n# comment\n\n1 3\n");
  const LoadedNetwork as_is = read_edge_list(in);
  EXPECT_EQ(as_is.network.edge_count(), 2u);
  EXPECT_EQ(as_is.report.duplicates, 2u);
  EXPECT_EQ(as_is.report.self_loops, 1u);

  std::istringstream directed("n 4\n0 1\n1 0\n0 1\n2 2\n1 3\n");
  const LoadedNetwork folded = read_edge_list(directed, Preprocessing::UndirectedNoLoops);
  EXPECT_EQ(folded.network.edge_count(), 2u);
  EXPECT_EQ(folded.report.merged, 1u);
  EXPECT_EQ(folded.report.duplicates, 1u);
  EXPECT_EQ(folded.report.self_loops, 1u);
}

TEST(EdgeList, HeaderOnlyIsEmptyNetwork) {
  const Network net = parse_edge_list("n 5\n");
  EXPECT_EQ(net.size(), 5u);
  EXPECT_EQ(net.edge_count(), 0u);
}

TEST(EdgeList, ParseErrorsCarryLineNumbers) {
  try {
    parse_edge_list("n 3\n0 1\n0 7\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
  }
  EXPECT_THROW(parse_edge_list("0 1\n"), ParseError);
  EXPECT_THROW(parse_edge_list("n 3\n0 x\n"), ParseError);
  EXPECT_THROW(load_network("/nonexistent/file.txt"), IoError);
}
