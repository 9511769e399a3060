#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "ergm/annealer.hpp"
#include "ergm/edgelist.hpp"
#include "ergm/errors.hpp"
#include "ergm/exact.hpp"
#include "ergm/mcmle.hpp"
#include "ergm/model.hpp"
#include "ergm/network.hpp"
#include "ergm/pseudolikelihood.hpp"
#include "ergm/rng.hpp"
#include "ergm/sampler.hpp"

namespace ergm {

using json = nlohmann::json;

inline constexpr int kCsvSchemaVersion = 1;

/// Rows of strings with a fixed header. Emitted with a leading
/// `# schema <name> v<version>` comment line.
struct CsvTable {
  std::string schema;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string str() const {
    std::ostringstream os;
    os << "# schema " << schema << " v" << kCsvSchemaVersion << '\n';
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t c = 0; c < cells.size(); ++c) os << (c ? "," : "") << cells[c];
      os << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return os.str();
  }
};

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline json to_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

/// FNV-1a over the canonical edge-list text; recorded as the input digest.
inline std::string network_digest(const Network& net) {
  std::ostringstream os;
  write_edge_list(os, net);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : os.str()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << h;
  return hex.str();
}

inline json to_json(const AnnealConfig& c) {
  json j;
  j["initial_temperature"] = c.initial_temperature ? json(*c.initial_temperature) : json(nullptr);
  j["cooling_rate"] = c.cooling_rate;
  j["steps_per_temperature"] = c.steps_per_temperature;
  j["max_steps"] = c.max_steps;
  j["target_tolerance"] = c.target_tolerance ? json(*c.target_tolerance) : json(nullptr);
  j["tie_prob"] = c.tie_prob;
  j["stall_sweeps"] = c.stall_sweeps;
  j["max_reheats"] = c.max_reheats;
  j["seed"] = c.seed;
  return j;
}

inline json to_json(const SamplerConfig& c) {
  json j;
  j["burn_in"] = c.burn_in;
  j["interval"] = c.interval;
  j["sample_size"] = c.sample_size;
  if (const auto* t = std::get_if<TieNoTie>(&c.proposal)) {
    j["proposal"] = "tnt";
    j["tie_prob"] = t->tie_prob;
  } else {
    j["proposal"] = "uniform";
  }
  j["chains"] = c.chains;
  j["seed"] = c.seed;
  return j;
}

inline json to_json(const McmleConfig& c) {
  json j;
  j["max_outer_iterations"] = c.max_outer_iterations;
  j["sampler"] = to_json(c.sampler);
  j["step_bound"] = c.step_bound;
  j["convergence_tolerance"] = c.convergence_tolerance;
  j["min_ess_fraction"] = c.min_ess_fraction;
  j["seed"] = c.seed;
  return j;
}

inline json to_json(const McmleResult& r) {
  json j;
  j["theta"] = to_json(r.theta);
  j["status"] = to_string(r.status);
  j["outer_iterations"] = r.outer_iterations;
  j["final_moment_z"] = to_json(r.final_moment_z);
  json trace = json::array();
  for (const auto& it : r.trace) {
    trace.push_back({{"theta0", to_json(it.theta0)},
                     {"moment_gap", to_json(it.moment_gap)},
                     {"moment_z", to_json(it.moment_z)},
                     {"theta_next", to_json(it.theta_next)},
                     {"step_bound", it.step_bound},
                     {"weight_ess", it.weight_ess},
                     {"acceptance_rate", it.acceptance_rate},
                     {"degenerate", it.degenerate}});
  }
  j["trace"] = std::move(trace);
  j["degeneracy"] = {{"flagged", r.degeneracy.flagged},
                     {"extreme_fraction", r.degeneracy.extreme_fraction},
                     {"singular_covariance", r.degeneracy.singular_covariance}};
  return j;
}

// ---------------------------------------------------------------------------
// MPLE clouds over annealed statistic-matched networks
// ---------------------------------------------------------------------------

enum class InitMode { Observed, ErdosRenyi };

inline const char* to_string(InitMode m) {
  return m == InitMode::Observed ? "observed" : "er";
}

struct CloudPoint {
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  InitMode init = InitMode::ErdosRenyi;
  bool anneal_success = false;
  std::uint64_t steps = 0;
  double distance = 0.0;
  bool mple_ok = false;
  Theta theta;
  std::string error;
  Network network;
};

/// Anneals `replicates` networks to target and fits each one's MPLE.
/// Replicate r uses seed derive_seed(seed, r). With InitMode::Observed the
/// search starts from *observed; otherwise from an Erdos-Renyi draw at
/// er_density.
inline std::vector<CloudPoint> mple_cloud_annealed(const ModelSpec& spec, const StatVector& target,
                                                   std::size_t n, const Network* observed,
                                                   InitMode init, double er_density,
                                                   const AnnealConfig& base, std::size_t replicates,
                                                   std::uint64_t seed, unsigned threads = 1) {
  if (init == InitMode::Observed && !observed)
    throw std::invalid_argument("observed initialisation needs a network");
  std::vector<CloudPoint> out(replicates);
  auto run = [&](std::size_t r) {
    CloudPoint& p = out[r];
    p.replicate = r;
    p.seed = derive_seed(seed, r);
    p.init = init;
    AnnealConfig c = base;
    c.seed = p.seed;
    if (init == InitMode::Observed) c.init = FromObserved{};
    else c.init = FromErdosRenyi{er_density};
    AnnealResult a = anneal(spec, target, n, c, observed);
    p.anneal_success = a.success;
    p.steps = a.steps_used;
    p.distance = a.achieved_distance;
    p.network = std::move(a.network);
    if (!p.anneal_success) {
      p.error = "annealing did not reach the target";
      return;
    }
    try {
      const MpleResult fit = mple(spec, p.network);
      p.mple_ok = fit.converged;
      p.theta = fit.theta;
      if (!fit.converged) p.error = "MPLE iteration limit";
    } catch (const NumericalError& e) {
      p.error = e.what();
    }
  };
  if (threads <= 1) {
    for (std::size_t r = 0; r < replicates; ++r) run(r);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t r = w; r < replicates; r += threads) run(r);
      });
    for (auto& t : pool) t.join();
  }
  return out;
}

inline CsvTable cloud_csv(const ModelSpec& spec, const std::vector<CloudPoint>& cloud,
                          const std::string& schema = "mple-cloud") {
  CsvTable t;
  t.schema = schema;
  t.header = {"kind", "replicate", "seed", "init", "anneal_success", "steps", "distance", "mple_ok"};
  for (const auto& name : spec.names()) t.header.push_back("theta_" + name);
  t.header.push_back("error");
  for (const auto& p : cloud) {
    std::vector<std::string> row = {"mple",
                                    std::to_string(p.replicate),
                                    std::to_string(p.seed),
                                    to_string(p.init),
                                    p.anneal_success ? "1" : "0",
                                    std::to_string(p.steps),
                                    fmt(p.distance),
                                    p.mple_ok ? "1" : "0"};
    for (std::size_t k = 0; k < spec.size(); ++k)
      row.push_back(p.mple_ok ? fmt(p.theta[static_cast<Eigen::Index>(k)]) : "");
    std::string err = p.error;
    for (char& ch : err)
      if (ch == ',' || ch == '\n') ch = ';';
    row.push_back(err);
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// Appends a labelled reference point (exact MLE, observed MPLE, MCMLE).
inline void add_reference_row(CsvTable& t, const std::string& kind, const Theta& theta) {
  std::vector<std::string> row = {kind, "", "", "", "", "", "", "1"};
  for (Eigen::Index k = 0; k < theta.size(); ++k) row.push_back(fmt(theta[k]));
  row.push_back("");
  t.rows.push_back(std::move(row));
}

/// Per-coordinate max - min over the successful cloud points.
inline Eigen::VectorXd cloud_spread(const std::vector<CloudPoint>& cloud, std::size_t q) {
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(q), std::numeric_limits<double>::infinity());
  Eigen::VectorXd hi = -lo;
  for (const auto& p : cloud) {
    if (!p.mple_ok) continue;
    lo = lo.cwiseMin(p.theta);
    hi = hi.cwiseMax(p.theta);
  }
  return hi - lo;
}

// ---------------------------------------------------------------------------
// Figure regeneration
// ---------------------------------------------------------------------------

enum class Figure { Fig1, Fig4, EcoliClusters };

inline const char* to_string(Figure f) {
  switch (f) {
    case Figure::Fig1: return "fig1";
    case Figure::Fig4: return "fig4";
    case Figure::EcoliClusters: return "ecoli-clusters";
  }
  return "?";
}

inline ModelSpec edges_triangles_model() { return ModelSpec({Edges{}, Triangles{}}); }

inline ModelSpec ecoli_model() {
  return ModelSpec({Edges{}, DegreeCount{2}, DegreeCount{3}, DegreeCount{4}, DegreeCount{6},
                    GwDegree(0.25)});
}

struct FigureConfig {
  std::size_t replicates = 100;
  std::size_t trials = 10;
  std::size_t n = 9;
  StatVector target = StatVector{{18.0, 13.0}};
  std::optional<Network> observed;  ///< required for EcoliClusters
  AnnealConfig anneal;
  McmleConfig mcmle;
  std::optional<std::filesystem::path> exact_cache;  ///< enables the exact MLE row
  unsigned threads = 1;
  std::uint64_t seed = 0;
};

struct ExperimentReport {
  json report;
  CsvTable csv;
};

namespace detail {

inline json report_header(Figure which, const ModelSpec& spec, const FigureConfig& c) {
  json j;
  j["experiment"] = to_string(which);
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["model"] = spec.names();
  j["model_fingerprint"] = spec.fingerprint();
  j["replicates"] = c.replicates;
  j["trials"] = c.trials;
  j["n"] = c.n;
  j["target"] = to_json(c.target);
  j["anneal"] = to_json(c.anneal);
  j["mcmle"] = to_json(c.mcmle);
  if (c.observed) j["observed_digest"] = network_digest(*c.observed);
  return j;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Data behind the N = 9 MPLE cloud: MPLEs of annealed networks with
/// T = target under (edges, triangles), plus the exact MLE row when an
/// enumeration cache directory is configured.
inline ExperimentReport figure_fig1(const FigureConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelSpec spec = edges_triangles_model();
  const double p = c.target[0] / static_cast<double>(dyad_count(c.n));
  const InitMode init = c.observed ? InitMode::Observed : InitMode::ErdosRenyi;
  const auto cloud = mple_cloud_annealed(spec, c.target, c.n, c.observed ? &*c.observed : nullptr,
                                         init, p, c.anneal, c.replicates, c.seed, c.threads);
  ExperimentReport out;
  out.report = detail::report_header(Figure::Fig1, spec, c);
  out.csv = cloud_csv(spec, cloud, "fig1");
  std::size_t matched = 0, fitted = 0;
  for (const auto& pt : cloud) {
    matched += pt.anneal_success;
    fitted += pt.mple_ok;
  }
  out.report["anneal_successes"] = matched;
  out.report["mple_successes"] = fitted;
  out.report["mple_spread"] = to_json(cloud_spread(cloud, spec.size()));
  if (c.exact_cache) {
    const EnumerationTable table = load_or_enumerate(*c.exact_cache, spec, c.n,
                                                     {.max_n = 9, .threads = c.threads});
    const ExactMleResult mle = exact_mle(table, c.target);
    out.report["exact_mle"] = {{"exists", mle.exists}, {"theta", to_json(mle.theta)},
                               {"loglik", mle.loglik}};
    if (mle.exists) add_reference_row(out.csv, "exact_mle", mle.theta);
  }
  out.report["seconds"] = detail::seconds_since(t0);
  return out;
}

/// MCMLE trials on one statistic-matched network, each started at a
/// different MPLE from an annealed cloud. Without c.observed the first
/// successfully annealed network stands in for the observed one.
inline ExperimentReport figure_fig4(const FigureConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelSpec spec = edges_triangles_model();
  const double p = c.target[0] / static_cast<double>(dyad_count(c.n));
  const std::size_t pool_size = std::max(c.trials, c.replicates);
  const auto cloud = mple_cloud_annealed(spec, c.target, c.n, nullptr, InitMode::ErdosRenyi, p,
                                         c.anneal, pool_size, c.seed, c.threads);
  std::optional<Network> observed = c.observed;
  std::vector<Theta> starts;
  for (const auto& pt : cloud) {
    if (!pt.anneal_success) continue;
    if (!observed) observed = pt.network;
    if (pt.mple_ok && starts.size() < c.trials) starts.push_back(pt.theta);
  }
  if (!observed) throw NumericalError("no statistic-matched network found");

  ExperimentReport out;
  out.report = detail::report_header(Figure::Fig4, spec, c);
  out.report["observed_digest"] = network_digest(*observed);
  std::optional<ExactMleResult> exact;
  if (c.exact_cache) {
    const EnumerationTable table = load_or_enumerate(*c.exact_cache, spec, c.n,
                                                     {.max_n = 9, .threads = c.threads});
    exact = exact_mle(table, stat_vector(spec, *observed));
  }
  out.csv.schema = "fig4";
  out.csv.header = {"trial", "seed", "start_edges", "start_triangle", "status", "outer_iterations",
                    "theta_edges", "theta_triangle", "max_abs_z", "distance_to_exact"};
  json trials = json::array();
  std::size_t degenerate = 0, converged = 0;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    McmleConfig mc = c.mcmle;
    mc.seed = derive_seed(derive_seed(c.seed, 0x4649'4734ULL), k);
    mc.sampler.threads = c.threads;
    const McmleResult r = mcmle_fit(spec, *observed, starts[k], mc);
    degenerate += r.status == McmleStatus::Degenerate;
    converged += r.status == McmleStatus::Converged;
    const double zmax = r.final_moment_z.size() ? r.final_moment_z.cwiseAbs().maxCoeff() : 0.0;
    const std::string dist =
        exact && exact->exists ? fmt((r.theta - exact->theta).lpNorm<Eigen::Infinity>()) : "";
    out.csv.rows.push_back({std::to_string(k + 1), std::to_string(mc.seed), fmt(starts[k][0]),
                            fmt(starts[k][1]), to_string(r.status),
                            std::to_string(r.outer_iterations), fmt(r.theta[0]), fmt(r.theta[1]),
                            fmt(zmax), dist});
    json tj = to_json(r);
    tj["start"] = to_json(starts[k]);
    tj["seed"] = mc.seed;
    trials.push_back(std::move(tj));
  }
  out.report["trials_run"] = starts.size();
  out.report["converged"] = converged;
  out.report["degenerate"] = degenerate;
  out.report["results"] = std::move(trials);
  if (exact) out.report["exact_mle"] = {{"exists", exact->exists}, {"theta", to_json(exact->theta)}};
  out.report["seconds"] = detail::seconds_since(t0);
  return out;
}

/// Nearest of two reference points by Euclidean distance in natural
/// parameter space; true when closer to `first`.
inline bool nearer_first(const Theta& x, const Theta& first, const Theta& second) {
  return (x - first).norm() < (x - second).norm();
}

/// E. coli cluster experiment: MPLE clouds for observed and Erdos-Renyi
/// initialisation, the observed MPLE, an MCMLE from the improved start, and
/// an MCMLE attempt from the observed MPLE. Each cloud point is labelled by
/// the nearer of (MCMLE, observed MPLE).
inline ExperimentReport figure_ecoli(const FigureConfig& c) {
  if (!c.observed) throw IoError("ecoli-clusters needs the E. coli network (--network)");
  const auto t0 = std::chrono::steady_clock::now();
  const ModelSpec spec = ecoli_model();
  const Network& obs = *c.observed;
  const StatVector t_obs = stat_vector(spec, obs);
  ExperimentReport out;
  out.report = detail::report_header(Figure::EcoliClusters, spec, c);
  out.report["observed"] = {{"nodes", obs.size()}, {"edges", obs.edge_count()},
                            {"stats", to_json(t_obs)}};

  std::optional<Theta> observed_mple;
  try {
    observed_mple = mple(spec, obs).theta;
    out.report["observed_mple"] = to_json(*observed_mple);
  } catch (const NumericalError& e) {
    out.report["observed_mple_error"] = e.what();
  }

  AnnealConfig ac = c.anneal;
  ac.seed = derive_seed(c.seed, 1);
  ac.init = FromErdosRenyi{};
  McmleConfig mc = c.mcmle;
  mc.sampler.threads = c.threads;
  std::optional<McmleResult> improved_fit;
  try {
    const ImprovedStart start = improved_start(spec, obs, ac, 5);
    out.report["improved_start"] = to_json(start.theta);
    mc.seed = derive_seed(c.seed, 2);
    improved_fit = mcmle_fit(spec, obs, start.theta, mc);
    out.report["mcmle_from_improved_start"] = to_json(*improved_fit);
  } catch (const NumericalError& e) {
    out.report["improved_start_error"] = e.what();
  }
  if (observed_mple) {
    mc.seed = derive_seed(c.seed, 3);
    out.report["mcmle_from_observed_mple"] = to_json(mcmle_fit(spec, obs, *observed_mple, mc));
  }

  const double p = density(obs);
  auto obs_cloud = mple_cloud_annealed(spec, t_obs, obs.size(), &obs, InitMode::Observed, p,
                                       c.anneal, c.replicates, derive_seed(c.seed, 4), c.threads);
  auto er_cloud = mple_cloud_annealed(spec, t_obs, obs.size(), &obs, InitMode::ErdosRenyi, p,
                                      c.anneal, c.replicates, derive_seed(c.seed, 5), c.threads);
  std::vector<CloudPoint> all = obs_cloud;
  all.insert(all.end(), er_cloud.begin(), er_cloud.end());
  out.csv = cloud_csv(spec, all, "ecoli-clusters");
  out.csv.header.push_back("cluster");
  const bool have_refs = improved_fit && observed_mple;
  std::size_t er_ok = 0, er_near_mcmle = 0;
  for (std::size_t r = 0; r < all.size(); ++r) {
    std::string label;
    if (have_refs && all[r].mple_ok) {
      const bool near = nearer_first(all[r].theta, improved_fit->theta, *observed_mple);
      label = near ? "mcmle" : "observed_mple";
      if (all[r].init == InitMode::ErdosRenyi) {
        ++er_ok;
        er_near_mcmle += near;
      }
    }
    out.csv.rows[r].push_back(label);
  }
  if (observed_mple) {
    add_reference_row(out.csv, "observed_mple", *observed_mple);
    out.csv.rows.back().push_back("");
  }
  if (improved_fit) {
    add_reference_row(out.csv, "mcmle", improved_fit->theta);
    out.csv.rows.back().push_back("");
  }
  out.report["er_points_fitted"] = er_ok;
  out.report["er_points_near_mcmle"] = er_near_mcmle;
  out.report["er_single_cluster"] = have_refs && er_ok > 0 && er_near_mcmle == er_ok;
  out.report["seconds"] = detail::seconds_since(t0);
  return out;
}

inline ExperimentReport run_figure_experiments(Figure which, const FigureConfig& config) {
  switch (which) {
    case Figure::Fig1: return figure_fig1(config);
    case Figure::Fig4: return figure_fig4(config);
    case Figure::EcoliClusters: return figure_ecoli(config);
  }
  throw std::invalid_argument("unknown figure");
}

}  // namespace ergm
