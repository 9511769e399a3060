#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <thread>
#include <variant>
#include <vector>

#include "ergm/model.hpp"
#include "ergm/network.hpp"
#include "ergm/rng.hpp"

namespace ergm {

/// Propose a dyad uniformly at random.
struct UniformDyad {};

/// With probability tie_prob propose an existing tie, otherwise a uniform
/// dyad. Mixes far better than UniformDyad on sparse networks.
struct TieNoTie {
  double tie_prob = 0.5;
};

using Proposal = std::variant<UniformDyad, TieNoTie>;

struct SamplerConfig {
  std::uint64_t burn_in = 0;
  std::uint64_t interval = 1;
  std::size_t sample_size = 1000;
  Proposal proposal = UniformDyad{};
  std::uint64_t seed = 0;
  unsigned chains = 1;   ///< independent chains, seeded derive_seed(seed, c)
  unsigned threads = 1;  ///< chains run concurrently when > 1
  bool keep_networks = false;

  void validate() const {
    if (interval < 1) throw std::invalid_argument("sampler interval must be >= 1");
    if (sample_size < 1) throw std::invalid_argument("sampler sample_size must be >= 1");
    if (chains < 1) throw std::invalid_argument("sampler needs at least one chain");
    if (const auto* t = std::get_if<TieNoTie>(&proposal);
        t && !(t->tie_prob > 0.0 && t->tie_prob < 1.0))
      throw std::invalid_argument("tie_prob must lie in (0, 1)");
  }
};

/// Burn-in 10 sweeps, one sweep between draws, 1000 draws; a sweep is one
/// proposal per dyad.
inline SamplerConfig default_sampler_config(std::size_t n) {
  SamplerConfig c;
  c.burn_in = 10 * dyad_count(n);
  c.interval = std::max<std::uint64_t>(1, dyad_count(n));
  c.sample_size = 1000;
  return c;
}

struct SampleBatch {
  Eigen::MatrixXd stats;                  ///< row i = T of the i-th retained network
  std::vector<std::uint64_t> edge_counts; ///< ties in each retained network
  Network final_network;                  ///< last state of the last chain
  double acceptance_rate = 0.0;
  std::vector<Network> networks;          ///< filled when keep_networks

  std::size_t size() const noexcept { return static_cast<std::size_t>(stats.rows()); }
  StatVector mean() const { return stats.colwise().mean().transpose(); }
};

/// Ties of a network in an array with O(1) insert, erase and uniform choice.
class TieIndex {
 public:
  TieIndex() = default;
  explicit TieIndex(const Network& net) : n_(net.size()), position_(net.dyads(), -1) {
    for (const Dyad& d : net.ties()) insert(d);
  }

  std::size_t size() const noexcept { return ties_.size(); }
  bool empty() const noexcept { return ties_.empty(); }
  Dyad choose(Rng& rng) const { return ties_[rng.below(ties_.size())]; }

  /// Keeps the index in step with a toggle of d that has just been applied.
  void on_toggle(Dyad d, bool now_tie) {
    if (now_tie) insert(d);
    else erase(d);
  }

 private:
  void insert(Dyad d) {
    position_[dyad_index(n_, d.i, d.j)] = static_cast<std::int64_t>(ties_.size());
    ties_.push_back(d);
  }
  void erase(Dyad d) {
    const auto idx = dyad_index(n_, d.i, d.j);
    const auto pos = static_cast<std::size_t>(position_[idx]);
    const Dyad last = ties_.back();
    ties_[pos] = last;
    position_[dyad_index(n_, last.i, last.j)] = static_cast<std::int64_t>(pos);
    ties_.pop_back();
    position_[idx] = -1;
  }

  std::size_t n_ = 0;
  std::vector<Dyad> ties_;
  std::vector<std::int64_t> position_;
};

/// Uniformly random unordered pair of distinct nodes.
inline Dyad random_dyad(std::size_t n, Rng& rng) {
  auto i = static_cast<std::uint32_t>(rng.below(n));
  auto j = static_cast<std::uint32_t>(rng.below(n - 1));
  if (j >= i) ++j;
  return i < j ? Dyad{i, j} : Dyad{j, i};
}

/// Metropolis-Hastings single-toggle chain targeting P_theta. Maintains the
/// statistic vector incrementally and, for TieNoTie, an indexable tie list.
class MhChain {
 public:
  MhChain(const ModelSpec& spec, Network start, Theta theta, Proposal proposal,
          std::uint64_t seed)
      : spec_(&spec),
        net_(std::move(start)),
        theta_(std::move(theta)),
        proposal_(proposal),
        rng_(seed),
        change_(spec.size()) {
    if (theta_.size() != static_cast<Eigen::Index>(spec.size()))
      throw std::invalid_argument("theta dimension does not match model");
    if (net_.size() < 2) throw std::invalid_argument("sampling needs n >= 2");
    stats_ = stat_vector(spec, net_);
    if (std::holds_alternative<TieNoTie>(proposal_)) ties_ = TieIndex(net_);
  }

  const Network& network() const noexcept { return net_; }
  const StatVector& stats() const noexcept { return stats_; }
  std::uint64_t proposals() const noexcept { return proposals_; }
  std::uint64_t accepted() const noexcept { return accepted_; }

  /// One proposal; returns whether the toggle was accepted.
  bool step() {
    const std::uint64_t dyads = net_.dyads();
    const std::size_t n = net_.size();
    double tie_prob = 0.0;
    Dyad d;
    if (const auto* t = std::get_if<TieNoTie>(&proposal_)) {
      tie_prob = t->tie_prob;
      if (!ties_.empty() && rng_.uniform() < tie_prob) {
        d = ties_.choose(rng_);
      } else {
        d = random_dyad(n, rng_);
      }
    } else {
      d = random_dyad(n, rng_);
    }
    ++proposals_;

    const bool tie = net_.has_tie(d);
    change_stats(*spec_, net_, d, change_);
    double dot = 0.0;
    for (std::size_t k = 0; k < change_.size(); ++k) dot += theta_[static_cast<Eigen::Index>(k)] * change_[k];
    double log_ratio = tie ? -dot : dot;
    if (tie_prob > 0.0) {
      const auto e = static_cast<double>(ties_.size());
      const double base = (1.0 - tie_prob) / static_cast<double>(dyads);
      // Selection probability of d before and after the toggle.
      const double forward = (e == 0.0) ? 1.0 / static_cast<double>(dyads)
                                        : base + (tie ? tie_prob / e : 0.0);
      const double e_after = tie ? e - 1.0 : e + 1.0;
      const double backward = (e_after == 0.0) ? 1.0 / static_cast<double>(dyads)
                                               : base + (tie ? 0.0 : tie_prob / e_after);
      log_ratio += std::log(backward) - std::log(forward);
    }
    if (log_ratio < 0.0 && std::log(rng_.uniform()) >= log_ratio) return false;

    const double sign = tie ? -1.0 : 1.0;
    for (std::size_t k = 0; k < change_.size(); ++k) stats_[static_cast<Eigen::Index>(k)] += sign * change_[k];
    net_.toggle_unchecked(d);
    if (tie_prob > 0.0) ties_.on_toggle(d, !tie);
    ++accepted_;
    return true;
  }

  void run(std::uint64_t steps) {
    for (std::uint64_t s = 0; s < steps; ++s) step();
  }

 private:
  const ModelSpec* spec_;
  Network net_;
  Theta theta_;
  Proposal proposal_;
  Rng rng_;
  StatVector stats_;
  std::vector<double> change_;
  TieIndex ties_;
  std::uint64_t proposals_ = 0;
  std::uint64_t accepted_ = 0;
};

/// Single MH proposal on net in place. Convenience form of MhChain::step for
/// callers that do not keep a chain; O(dyads) setup per call for TieNoTie.
inline bool mh_step(const ModelSpec& spec, Network& net, const Theta& theta,
                    const Proposal& proposal, Rng& rng) {
  MhChain chain(spec, net, theta, proposal, rng.next());
  const bool accepted = chain.step();
  if (accepted) net = chain.network();
  return accepted;
}

/// Draws config.sample_size statistic vectors from P_theta, starting every
/// chain at `start`. Reproducible for a fixed seed regardless of thread count.
inline SampleBatch sample(const ModelSpec& spec, const Theta& theta, const Network& start,
                          const SamplerConfig& config) {
  config.validate();
  const auto q = static_cast<Eigen::Index>(spec.size());
  const unsigned chains = config.chains;
  struct ChainOut {
    Eigen::MatrixXd stats;
    std::vector<std::uint64_t> edges;
    std::vector<Network> networks;
    Network last;
    std::uint64_t proposals = 0, accepted = 0;
  };
  std::vector<ChainOut> outs(chains);
  auto run_chain = [&](unsigned c) {
    const std::size_t draws = config.sample_size / chains + (c < config.sample_size % chains ? 1 : 0);
    MhChain chain(spec, start, theta, config.proposal, derive_seed(config.seed, c));
    chain.run(config.burn_in);
    ChainOut& o = outs[c];
    o.stats.resize(static_cast<Eigen::Index>(draws), q);
    o.edges.reserve(draws);
    for (std::size_t s = 0; s < draws; ++s) {
      chain.run(config.interval);
      o.stats.row(static_cast<Eigen::Index>(s)) = chain.stats().transpose();
      o.edges.push_back(chain.network().edge_count());
      if (config.keep_networks) o.networks.push_back(chain.network());
    }
    o.last = chain.network();
    o.proposals = chain.proposals();
    o.accepted = chain.accepted();
  };
  if (config.threads > 1 && chains > 1) {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < std::min(config.threads, chains); ++w)
      pool.emplace_back([&, w] {
        for (unsigned c = w; c < chains; c += config.threads) run_chain(c);
      });
    for (auto& t : pool) t.join();
  } else {
    for (unsigned c = 0; c < chains; ++c) run_chain(c);
  }

  SampleBatch batch;
  batch.stats.resize(static_cast<Eigen::Index>(config.sample_size), q);
  Eigen::Index row = 0;
  std::uint64_t proposals = 0, accepted = 0;
  for (auto& o : outs) {
    batch.stats.middleRows(row, o.stats.rows()) = o.stats;
    row += o.stats.rows();
    batch.edge_counts.insert(batch.edge_counts.end(), o.edges.begin(), o.edges.end());
    for (auto& net : o.networks) batch.networks.push_back(std::move(net));
    proposals += o.proposals;
    accepted += o.accepted;
  }
  batch.final_network = std::move(outs.back().last);
  batch.acceptance_rate =
      proposals ? static_cast<double>(accepted) / static_cast<double>(proposals) : 0.0;
  return batch;
}

/// Each dyad independently a tie with probability p.
inline Network erdos_renyi(std::size_t n, double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("erdos_renyi needs p in [0, 1]");
  Network net(n);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = i + 1; j < n; ++j)
      if (rng.uniform() < p) net.toggle_unchecked({i, j});
  return net;
}

}  // namespace ergm
