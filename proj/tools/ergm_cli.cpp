// ergm: command-line front end for the estimation library.
//
// Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 I/O error.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ergm/ergm.hpp"
#include "ergm/experiments.hpp"

namespace fs = std::filesystem;
using namespace ergm;

namespace {

constexpr int kUsage = 2;
constexpr int kNumerical = 3;
constexpr int kIo = 4;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Global {
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string output;
  std::string format;
};

Eigen::VectorXd parse_csv_vector(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  for (std::string cell; std::getline(ss, cell, ',');) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw UsageError("bad number '" + cell + "' in '" + text + "'");
    }
  }
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json read_json_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError("config " + path + ": " + e.what());
  }
}

SamplerConfig sampler_from(const json& j, std::size_t n, const Global& g) {
  SamplerConfig c = default_sampler_config(n);
  c.burn_in = j.value("burn_in", c.burn_in);
  c.interval = j.value("interval", c.interval);
  c.sample_size = j.value("sample_size", c.sample_size);
  c.chains = j.value("chains", c.chains);
  const std::string proposal = j.value("proposal", std::string("uniform"));
  if (proposal == "tnt") c.proposal = TieNoTie{j.value("tie_prob", 0.5)};
  else if (proposal != "uniform") throw UsageError("proposal must be uniform or tnt");
  c.threads = g.threads;
  c.seed = g.seed;
  return c;
}

McmleConfig mcmle_from(const json& j, std::size_t n, const Global& g) {
  McmleConfig c;
  c.sampler = sampler_from(j.value("sampler", json::object()), n, g);
  c.max_outer_iterations = j.value("max_outer_iterations", c.max_outer_iterations);
  c.step_bound = j.value("step_bound", c.step_bound);
  c.convergence_tolerance = j.value("convergence_tolerance", c.convergence_tolerance);
  c.min_ess_fraction = j.value("min_ess_fraction", c.min_ess_fraction);
  c.seed = g.seed;
  return c;
}

AnnealConfig anneal_from(const json& j, const Global& g) {
  AnnealConfig c;
  if (j.contains("initial_temperature")) c.initial_temperature = j["initial_temperature"].get<double>();
  c.cooling_rate = j.value("cooling_rate", c.cooling_rate);
  c.steps_per_temperature = j.value("steps_per_temperature", c.steps_per_temperature);
  c.max_steps = j.value("max_steps", c.max_steps);
  if (j.contains("target_tolerance")) c.target_tolerance = j["target_tolerance"].get<double>();
  if (j.contains("stat_weights")) {
    const auto w = j["stat_weights"].get<std::vector<double>>();
    c.stat_weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  }
  c.tie_prob = j.value("tie_prob", c.tie_prob);
  c.stall_sweeps = j.value("stall_sweeps", c.stall_sweeps);
  c.max_reheats = j.value("max_reheats", c.max_reheats);
  c.seed = g.seed;
  return c;
}

/// The "mcmle" section, inheriting a top-level "sampler" section if it has none.
json mcmle_section(const json& cfg) {
  json m = cfg.value("mcmle", json::object());
  if (!m.contains("sampler") && cfg.contains("sampler")) m["sampler"] = cfg["sampler"];
  return m;
}

/// Continuous specs need a tolerance; sparse targets anneal better with
/// tie-biased proposals.
void complete_anneal_defaults(AnnealConfig& c, const ModelSpec& spec, double dens,
                              const json& j) {
  if (!spec.integer_valued() && !c.target_tolerance) c.target_tolerance = 1e-5;
  if (!j.contains("tie_prob") && dens < 0.1) c.tie_prob = 0.5;
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw IoError("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

std::string vector_csv_row(const Eigen::VectorXd& v) {
  std::string s;
  for (Eigen::Index k = 0; k < v.size(); ++k) s += (k ? "," : "") + fmt(v[k]);
  return s;
}

std::string header_row(const ModelSpec& spec) {
  std::string s;
  const auto names = spec.names();
  for (std::size_t k = 0; k < names.size(); ++k) s += (k ? "," : "") + names[k];
  return s;
}

Network load(const std::string& path, bool directed) {
  auto loaded = load_network(path, directed ? Preprocessing::UndirectedNoLoops : Preprocessing::AsIs);
  const auto& r = loaded.report;
  if (r.duplicates || r.self_loops || r.merged)
    std::cerr << "note: " << path << ": " << r.duplicates << " duplicate, " << r.self_loops
              << " self-loop, " << r.merged << " merged reciprocal lines\n";
  return std::move(loaded.network);
}

json mple_json(const MpleResult& r) {
  json cov = json::array();
  for (Eigen::Index i = 0; i < r.covariance.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(r.covariance.cols()));
    for (Eigen::Index k = 0; k < r.covariance.cols(); ++k) row[static_cast<std::size_t>(k)] = r.covariance(i, k);
    cov.push_back(row);
  }
  return {{"theta", to_json(r.theta)}, {"covariance", cov}, {"converged", r.converged},
          {"iterations", r.iterations}, {"max_abs_score", r.max_abs_score}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ERGM estimation: MPLE, MCMLE, exact enumeration and annealed starting values"};
  app.require_subcommand(1);
  Global g;
  app.add_option("--seed", g.seed, "root seed for all randomness");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--output", g.output, "output file (default stdout)");
  app.add_option("--format", g.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));

  std::string network, model, config, theta_text, start_text = "mple", init = "er", target_text,
      matched_out, start_path, which = "fig1", cache_dir = "ergm-cache";
  std::size_t n = 0, replicates = 100, trials = 10;
  int attempts = 5;
  bool directed = false;

  auto add_network = [&](CLI::App* s, bool required) {
    auto* o = s->add_option("--network", network, "edge-list file");
    if (required) o->required();
    s->add_flag("--directed", directed, "symmetrise directed input and drop self-loops");
  };
  auto add_model = [&](CLI::App* s) { s->add_option("--model", model, "model spec file")->required(); };

  auto* stats = app.add_subcommand("stats", "sufficient statistics of a network");
  add_network(stats, true);
  add_model(stats);

  auto* mple_cmd = app.add_subcommand("mple", "maximum pseudolikelihood estimate");
  add_network(mple_cmd, true);
  add_model(mple_cmd);

  auto* simulate = app.add_subcommand("simulate", "draw statistics from P_theta by MCMC");
  add_model(simulate);
  simulate->add_option("--theta", theta_text, "comma-separated parameter")->required();
  simulate->add_option("--n", n, "node count")->required();
  simulate->add_option("--start", start_path, "starting network (default empty)");
  simulate->add_option("--config", config, "JSON sampler config");

  auto* mcmle_cmd = app.add_subcommand("mcmle", "Monte Carlo maximum likelihood");
  add_network(mcmle_cmd, true);
  add_model(mcmle_cmd);
  mcmle_cmd->add_option("--start", start_text, "mple | anneal | theta:<csv>");
  mcmle_cmd->add_option("--config", config, "JSON config with sampler/mcmle/anneal sections");

  auto* anneal_cmd = app.add_subcommand("anneal-init", "improved starting value by annealing");
  add_network(anneal_cmd, true);
  add_model(anneal_cmd);
  anneal_cmd->add_option("--init", init, "observed or er")->check(CLI::IsMember({"observed", "er"}));
  anneal_cmd->add_option("--attempts", attempts, "annealing attempts")->check(CLI::PositiveNumber);
  anneal_cmd->add_option("--matched-out", matched_out, "edge-list path for the matched network");
  anneal_cmd->add_option("--config", config, "JSON config with an anneal section");

  auto* cloud = app.add_subcommand("cloud-experiment", "MPLEs of annealed statistic-matched networks");
  add_network(cloud, true);
  add_model(cloud);
  cloud->add_option("--replicates", replicates, "annealed networks")->check(CLI::PositiveNumber);
  cloud->add_option("--init", init, "observed or er")->check(CLI::IsMember({"observed", "er"}));
  cloud->add_option("--config", config, "JSON config with an anneal section");

  auto* exact_cmd = app.add_subcommand("exact-mle", "exact MLE by full enumeration (n <= 9)");
  add_model(exact_cmd);
  exact_cmd->add_option("--n", n, "node count")->required();
  exact_cmd->add_option("--target", target_text, "comma-separated observed statistics")->required();
  exact_cmd->add_option("--cache", cache_dir, "enumeration cache directory");

  auto* figure = app.add_subcommand("figure", "regenerate the data behind a figure");
  figure->add_option("--which", which, "fig1 | fig4 | ecoli")
      ->check(CLI::IsMember({"fig1", "fig4", "ecoli"}));
  add_network(figure, false);
  figure->add_option("--replicates", replicates, "annealed networks per cloud");
  figure->add_option("--trials", trials, "MCMLE trials (fig4)");
  figure->add_option("--cache", cache_dir, "enumeration cache directory (empty to skip exact MLE)");
  figure->add_option("--config", config, "JSON config with sampler/mcmle/anneal sections");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    const json cfg = read_json_file(config);
    Output out(g.output);
    std::ostream& os = out.stream();
    const bool csv = g.format == "csv";

    if (stats->parsed()) {
      const ModelSpec spec = load_model(model);
      const Network net = load(network, directed);
      const StatVector t = stat_vector(spec, net);
      if (csv) {
        os << header_row(spec) << '\n' << vector_csv_row(t) << '\n';
      } else {
        os << json{{"model", spec.names()}, {"stats", to_json(t)}, {"nodes", net.size()},
                   {"edges", net.edge_count()}, {"density", density(net)}}
                  .dump(2)
           << '\n';
      }
    } else if (mple_cmd->parsed()) {
      const ModelSpec spec = load_model(model);
      const Network net = load(network, directed);
      json j = mple_json(mple(spec, net));
      j["model"] = spec.names();
      os << j.dump(2) << '\n';
    } else if (simulate->parsed()) {
      const ModelSpec spec = load_model(model);
      const Theta theta = parse_csv_vector(theta_text);
      if (theta.size() != static_cast<Eigen::Index>(spec.size()))
        throw UsageError("--theta needs " + std::to_string(spec.size()) + " values");
      const Network start = start_path.empty() ? Network(n) : load(start_path, directed);
      if (start.size() != n) throw UsageError("--start network size differs from --n");
      const SamplerConfig sc = sampler_from(cfg.value("sampler", cfg), n, g);
      const SampleBatch batch = sample(spec, theta, start, sc);
      os << "# seed " << g.seed << " acceptance " << fmt(batch.acceptance_rate) << '\n';
      os << header_row(spec) << '\n';
      for (Eigen::Index r = 0; r < batch.stats.rows(); ++r)
        os << vector_csv_row(batch.stats.row(r).transpose()) << '\n';
    } else if (mcmle_cmd->parsed()) {
      const ModelSpec spec = load_model(model);
      const Network net = load(network, directed);
      const McmleConfig mc = mcmle_from(mcmle_section(cfg), net.size(), g);
      Theta theta0;
      json start_info;
      if (start_text == "mple") {
        theta0 = mple(spec, net).theta;
        start_info = "mple";
      } else if (start_text == "anneal") {
        AnnealConfig ac = anneal_from(cfg.value("anneal", json::object()), g);
        complete_anneal_defaults(ac, spec, density(net), cfg.value("anneal", json::object()));
        ac.seed = derive_seed(g.seed, 0x616e6e);
        theta0 = improved_start(spec, net, ac, attempts).theta;
        start_info = "anneal";
      } else if (start_text.rfind("theta:", 0) == 0) {
        theta0 = parse_csv_vector(start_text.substr(6));
        if (theta0.size() != static_cast<Eigen::Index>(spec.size()))
          throw UsageError("start theta needs " + std::to_string(spec.size()) + " values");
        start_info = "theta";
      } else {
        throw UsageError("--start must be mple, anneal or theta:<csv>");
      }
      const McmleResult r = mcmle_fit(spec, net, theta0, mc);
      json j = to_json(r);
      j["start"] = {{"mode", start_info}, {"theta0", to_json(theta0)}};
      j["seed"] = g.seed;
      j["config"] = to_json(mc);
      j["model"] = spec.names();
      os << j.dump(2) << '\n';
      if (r.status == McmleStatus::Degenerate) return kNumerical;
    } else if (anneal_cmd->parsed()) {
      const ModelSpec spec = load_model(model);
      const Network net = load(network, directed);
      const json aj = cfg.value("anneal", json::object());
      AnnealConfig ac = anneal_from(aj, g);
      complete_anneal_defaults(ac, spec, density(net), aj);
      if (init == "observed") ac.init = FromObserved{};
      const ImprovedStart s = improved_start(spec, net, ac, attempts);
      if (!matched_out.empty()) save_network(matched_out, s.anneal.network);
      os << json{{"theta0", to_json(s.theta)},
                 {"achieved_distance", s.anneal.achieved_distance},
                 {"steps", s.anneal.steps_used},
                 {"attempt", s.attempt},
                 {"matched_network", matched_out.empty() ? json(nullptr) : json(matched_out)},
                 {"seed", g.seed},
                 {"init", init},
                 {"anneal", to_json(ac)},
                 {"model", spec.names()}}
                .dump(2)
         << '\n';
    } else if (cloud->parsed()) {
      const ModelSpec spec = load_model(model);
      const Network net = load(network, directed);
      const json aj = cfg.value("anneal", json::object());
      AnnealConfig ac = anneal_from(aj, g);
      complete_anneal_defaults(ac, spec, density(net), aj);
      const auto points = mple_cloud_annealed(
          spec, stat_vector(spec, net), net.size(), &net,
          init == "observed" ? InitMode::Observed : InitMode::ErdosRenyi, density(net), ac,
          replicates, g.seed, g.threads);
      CsvTable t = cloud_csv(spec, points);
      try {
        add_reference_row(t, "observed_mple", mple(spec, net).theta);
      } catch (const NumericalError&) {
      }
      os << t.str();
    } else if (exact_cmd->parsed()) {
      const ModelSpec spec = load_model(model);
      const StatVector target = parse_csv_vector(target_text);
      if (target.size() != static_cast<Eigen::Index>(spec.size()))
        throw UsageError("--target needs " + std::to_string(spec.size()) + " values");
      EnumerateOptions eo;
      eo.threads = g.threads;
      const EnumerationTable table = cache_dir.empty() ? enumerate(spec, n, eo)
                                                       : load_or_enumerate(cache_dir, spec, n, eo);
      const ExactMleResult r = exact_mle(table, target);
      json j{{"theta", to_json(r.theta)},
             {"loglik", r.loglik},
             {"exists", r.exists},
             {"mean_value", r.exists ? to_json(r.mean_value) : json(nullptr)},
             {"max_abs_gradient", r.max_abs_gradient},
             {"support_points", table.entries()},
             {"model", spec.names()},
             {"n", n}};
      if (!r.exists) j["recession"] = to_json(r.recession);
      os << j.dump(2) << '\n';
    } else if (figure->parsed()) {
      FigureConfig fc;
      fc.seed = g.seed;
      fc.threads = g.threads;
      fc.replicates = replicates;
      fc.trials = trials;
      if (!cache_dir.empty()) fc.exact_cache = cache_dir;
      const Figure f = which == "fig1" ? Figure::Fig1 : which == "fig4" ? Figure::Fig4
                                                                          : Figure::EcoliClusters;
      if (!network.empty()) fc.observed = load(network, directed || f == Figure::EcoliClusters);
      const std::size_t nodes = fc.observed ? fc.observed->size() : fc.n;
      const json aj = cfg.value("anneal", json::object());
      fc.anneal = anneal_from(aj, g);
      const json mj = mcmle_section(cfg);
      fc.mcmle = mcmle_from(mj, nodes, g);
      if (f == Figure::EcoliClusters) {
        if (!fc.observed) throw UsageError("figure ecoli needs --network");
        complete_anneal_defaults(fc.anneal, ecoli_model(), density(*fc.observed), aj);
        if (!mj.contains("sampler") || !mj["sampler"].contains("proposal"))
          fc.mcmle.sampler.proposal = TieNoTie{0.5};
      }
      const ExperimentReport rep = run_figure_experiments(f, fc);
      if (csv) {
        os << rep.csv.str();
      } else {
        json j = rep.report;
        j["csv"] = rep.csv.str();
        os << j.dump(2) << '\n';
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  } catch (const EnumerationLimitError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  }
  return 0;
}
