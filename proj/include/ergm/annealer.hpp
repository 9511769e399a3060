#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "ergm/model.hpp"
#include "ergm/network.hpp"
#include "ergm/pseudolikelihood.hpp"
#include "ergm/rng.hpp"
#include "ergm/sampler.hpp"

namespace ergm {

/// Weighted L1 distance sum_k w_k |T_k(net) - target_k|.
inline double energy(const StatVector& stats, const StatVector& target,
                     const Eigen::VectorXd& weights) {
  return (weights.array() * (stats - target).array().abs()).sum();
}

inline double energy(const ModelSpec& spec, const Network& net, const StatVector& target,
                     const Eigen::VectorXd& weights) {
  if ((weights.array() <= 0).any()) throw std::invalid_argument("energy weights must be positive");
  return energy(stat_vector(spec, net), target, weights);
}

/// 1 / max(1, |target_k|): keeps large counts from swamping small ones.
inline Eigen::VectorXd default_weights(const StatVector& target) {
  return target.cwiseAbs().cwiseMax(1.0).cwiseInverse();
}

/// Start the search at the observed network.
struct FromObserved {};
/// Start at an Erdos-Renyi draw; p defaults to the observed density (or the
/// target edge count's density when no observed network is supplied).
struct FromErdosRenyi {
  std::optional<double> p;
};
struct FromNetwork {
  Network network;
};
using AnnealInit = std::variant<FromObserved, FromErdosRenyi, FromNetwork>;

struct AnnealConfig {
  std::optional<double> initial_temperature;  ///< unset: calibrated from probes
  double cooling_rate = 0.999;
  std::uint64_t steps_per_temperature = 0;    ///< 0: one per dyad
  std::uint64_t max_steps = 1'000'000;
  std::optional<double> target_tolerance;     ///< unset: 0, integer specs only
  std::optional<Eigen::VectorXd> stat_weights;
  AnnealInit init = FromErdosRenyi{};
  double tie_prob = 0.0;        ///< > 0: propose an existing tie with this probability
  double probe_acceptance = 0.8;
  std::size_t probes = 1000;
  std::uint64_t stall_sweeps = 50;  ///< reheat after this many sweeps without improvement
  int max_reheats = 3;
  std::uint64_t checkpoint_every = 10'000;
  std::uint64_t trace_every = 0;  ///< 0: no energy trace
  std::uint64_t seed = 0;
};

struct AnnealTracePoint {
  std::uint64_t step;
  double temperature;
  double energy;
};

struct AnnealResult {
  Network network;
  double achieved_distance = std::numeric_limits<double>::infinity();
  std::uint64_t steps_used = 0;
  bool success = false;
  double initial_temperature = 0.0;
  int reheats = 0;
  std::vector<AnnealTracePoint> energy_trace;
};

/// Raised when an annealer consistency checkpoint finds the incrementally
/// maintained statistics out of step with a full recomputation.
class AnnealerInvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {

inline double edges_density_hint(const ModelSpec& spec, const StatVector& target, std::size_t n) {
  for (std::size_t k = 0; k < spec.size(); ++k)
    if (std::holds_alternative<Edges>(spec.term(k)))
      return std::clamp(target[static_cast<Eigen::Index>(k)] / static_cast<double>(dyad_count(n)), 0.0, 1.0);
  return 0.5;
}

inline Network initial_network(const ModelSpec& spec, const StatVector& target, std::size_t n,
                               const AnnealConfig& config, const Network* observed, Rng& rng) {
  return std::visit(
      [&](const auto& init) -> Network {
        using T = std::decay_t<decltype(init)>;
        if constexpr (std::is_same_v<T, FromObserved>) {
          if (!observed) throw std::invalid_argument("FromObserved needs an observed network");
          return *observed;
        } else if constexpr (std::is_same_v<T, FromErdosRenyi>) {
          const double p = init.p ? *init.p
                                  : observed ? density(*observed)
                                             : edges_density_hint(spec, target, n);
          return erdos_renyi(n, p, rng);
        } else {
          return init.network;
        }
      },
      config.init);
}

}  // namespace detail

/// Simulated annealing over single-dyad toggles toward a network whose
/// statistics match `target`.
///
/// Energy is the weighted L1 distance to the target. A toggle is accepted
/// when it does not raise the energy, otherwise with probability
/// exp(-dE / temperature). The temperature is multiplied by cooling_rate every
/// steps_per_temperature proposals and is reset to half its initial value
/// (at most max_reheats times) after stall_sweeps sweeps without a new best
/// energy. The search stops at energy <= tolerance or after max_steps.
inline AnnealResult anneal(const ModelSpec& spec, const StatVector& target, std::size_t n,
                           const AnnealConfig& config, const Network* observed = nullptr) {
  const auto q = static_cast<Eigen::Index>(spec.size());
  if (target.size() != q) throw std::invalid_argument("target dimension does not match model");
  if (n < 2) throw std::invalid_argument("annealing needs n >= 2");
  if (!(config.cooling_rate > 0.0 && config.cooling_rate < 1.0))
    throw std::invalid_argument("cooling_rate must lie in (0, 1)");
  const bool integer = spec.integer_valued();
  if (!integer && !config.target_tolerance)
    throw std::invalid_argument("continuous statistics need an explicit target_tolerance");
  const double tolerance = config.target_tolerance.value_or(0.0);
  if (tolerance < 0) throw std::invalid_argument("target_tolerance must be >= 0");
  const Eigen::VectorXd weights = config.stat_weights.value_or(default_weights(target));
  if (weights.size() != q || (weights.array() <= 0).any())
    throw std::invalid_argument("stat_weights must be q positive values");
  const std::uint64_t dyads = dyad_count(n);
  const std::uint64_t per_temperature =
      config.steps_per_temperature ? config.steps_per_temperature : dyads;

  Rng rng(config.seed);
  AnnealResult out;
  Network net = detail::initial_network(spec, target, n, config, observed, rng);
  if (net.size() != n) throw std::invalid_argument("initial network has the wrong size");
  StatVector stats = stat_vector(spec, net);
  double e = energy(stats, target, weights);
  auto matched = [&](double current) {
    return integer && tolerance == 0.0 ? stats == target : current <= tolerance;
  };
  if (matched(e)) {
    out.network = std::move(net);
    out.achieved_distance = e;
    out.success = true;
    return out;
  }

  const bool biased = config.tie_prob > 0.0;
  TieIndex ties = biased ? TieIndex(net) : TieIndex();
  auto propose = [&]() -> Dyad {
    if (biased && !ties.empty() && rng.uniform() < config.tie_prob) return ties.choose(rng);
    return random_dyad(n, rng);
  };
  std::vector<double> change(spec.size());
  StatVector candidate(q);
  auto delta_energy = [&](Dyad d) {
    change_stats(spec, net, d, change);
    const double sign = net.has_tie(d) ? -1.0 : 1.0;
    for (Eigen::Index k = 0; k < q; ++k) candidate[k] = stats[k] + sign * change[static_cast<std::size_t>(k)];
    return energy(candidate, target, weights) - e;
  };

  double t0 = 1.0;
  if (config.initial_temperature) {
    t0 = *config.initial_temperature;
    if (!(t0 > 0)) throw std::invalid_argument("initial_temperature must be positive");
  } else {
    // Calibrate so that an average uphill move is accepted with probability
    // probe_acceptance at the start.
    double uphill = 0.0;
    std::size_t count = 0;
    for (std::size_t p = 0; p < config.probes; ++p) {
      const double de = delta_energy(random_dyad(n, rng));
      if (de > 0) {
        uphill += de;
        ++count;
      }
    }
    if (count > 0) t0 = -(uphill / static_cast<double>(count)) / std::log(config.probe_acceptance);
  }
  out.initial_temperature = t0;

  double temperature = t0;
  double best = e;
  std::uint64_t last_improvement = 0;
  std::uint64_t step = 0;
  while (step < config.max_steps) {
    ++step;
    const Dyad d = propose();
    const double de = delta_energy(d);
    if (de <= 0.0 || rng.uniform() < std::exp(-de / temperature)) {
      const bool was_tie = net.has_tie(d);
      net.toggle_unchecked(d);
      if (biased) ties.on_toggle(d, !was_tie);
      stats = candidate;
      e = energy(stats, target, weights);
    }
    if (config.checkpoint_every && step % config.checkpoint_every == 0) {
      const StatVector full = stat_vector(spec, net);
      if (integer && full != stats)
        throw AnnealerInvariantError("incremental statistics diverged from recomputation");
      stats = full;
      e = energy(stats, target, weights);
    }
    if (config.trace_every && step % config.trace_every == 0)
      out.energy_trace.push_back({step, temperature, e});
    if (e < best) {
      best = e;
      last_improvement = step;
    }
    if (matched(e)) break;
    if (step % per_temperature == 0) temperature *= config.cooling_rate;
    if (step - last_improvement >= config.stall_sweeps * dyads && out.reheats < config.max_reheats) {
      temperature = 0.5 * t0;
      ++out.reheats;
      last_improvement = step;
    }
  }
  if (!integer) e = energy(stat_vector(spec, net), target, weights);
  out.network = std::move(net);
  out.achieved_distance = e;
  out.steps_used = step;
  out.success = integer && tolerance == 0.0 ? stats == target : e <= tolerance;
  return out;
}

/// Temperature at a given step of the geometric schedule, ignoring reheats.
inline double scheduled_temperature(double t0, double cooling_rate,
                                    std::uint64_t steps_per_temperature, std::uint64_t step) {
  return t0 * std::pow(cooling_rate, static_cast<double>(step / steps_per_temperature));
}

class NoStartFoundError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

struct ImprovedStart {
  Theta theta;
  MpleResult mple;
  AnnealResult anneal;
  int attempt = 0;  ///< 0-based attempt that succeeded
};

/// Improved MCMLE starting value:
///   1. t_obs = T(net_obs);
///   2. draw an Erdos-Renyi network at the observed density (or per config.init);
///   3. anneal it to a network A* with T(A*) matching t_obs;
///   4. return the MPLE of A*.
/// Annealing failures and separated MPLEs trigger a retry with a fresh seed.
inline ImprovedStart improved_start(const ModelSpec& spec, const Network& net_obs,
                                    const AnnealConfig& config, int attempts,
                                    const MpleOptions& mple_options = {}) {
  if (attempts < 1) throw std::invalid_argument("improved_start needs attempts >= 1");
  const StatVector t_obs = stat_vector(spec, net_obs);
  std::string last_error = "annealing did not reach the target";
  for (int a = 0; a < attempts; ++a) {
    AnnealConfig c = config;
    c.seed = derive_seed(config.seed, static_cast<std::uint64_t>(a));
    AnnealResult found = anneal(spec, t_obs, net_obs.size(), c, &net_obs);
    if (!found.success) {
      last_error = "annealing stopped at distance " + std::to_string(found.achieved_distance);
      continue;
    }
    try {
      MpleResult fit = mple(spec, found.network, mple_options);
      if (!fit.converged) {
        last_error = "MPLE did not converge";
        continue;
      }
      return {fit.theta, std::move(fit), std::move(found), a};
    } catch (const NumericalError& e) {
      last_error = e.what();
    }
  }
  throw NoStartFoundError("no improved start after " + std::to_string(attempts) +
                          " attempts: " + last_error);
}

struct RaoBlackwellResult {
  Theta mean;
  Eigen::VectorXd spread;   ///< per-coordinate standard deviation across fits
  Eigen::MatrixXd mples;    ///< one successful MPLE per row
  std::size_t failures = 0;
};

/// EXPERIMENTAL. Coordinate-wise mean of MPLEs over m independently annealed
/// networks matching target; failed anneals and fits are skipped.
inline RaoBlackwellResult rao_blackwell_mple(const ModelSpec& spec, const StatVector& target,
                                             std::size_t n, const AnnealConfig& config,
                                             std::size_t m, unsigned threads = 1) {
  if (m < 1) throw std::invalid_argument("rao_blackwell_mple needs m >= 1");
  std::vector<std::optional<Theta>> fits(m);
  auto run = [&](std::size_t r) {
    AnnealConfig c = config;
    c.seed = derive_seed(config.seed, r);
    const AnnealResult found = anneal(spec, target, n, c);
    if (!found.success) return;
    try {
      const MpleResult fit = mple(spec, found.network);
      if (fit.converged) fits[r] = fit.theta;
    } catch (const NumericalError&) {
    }
  };
  if (threads <= 1) {
    for (std::size_t r = 0; r < m; ++r) run(r);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t r = w; r < m; r += threads) run(r);
      });
    for (auto& t : pool) t.join();
  }
  RaoBlackwellResult out;
  std::vector<Theta> ok;
  for (auto& f : fits) {
    if (f) ok.push_back(*f);
    else ++out.failures;
  }
  if (ok.empty()) throw NoStartFoundError("all annealed replicates failed");
  const auto q = static_cast<Eigen::Index>(spec.size());
  out.mples.resize(static_cast<Eigen::Index>(ok.size()), q);
  for (std::size_t r = 0; r < ok.size(); ++r) out.mples.row(static_cast<Eigen::Index>(r)) = ok[r].transpose();
  out.mean = out.mples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = out.mples.rowwise() - out.mean.transpose();
  out.spread = (centered.array().square().colwise().sum() /
                std::max<double>(1.0, static_cast<double>(ok.size()) - 1.0))
                   .sqrt()
                   .transpose();
  return out;
}

}  // namespace ergm
