#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "ergm/experiments.hpp"

using namespace ergm;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  const fs::path dir = fs::temp_directory_path() / "ergm-cli-test";
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun run_cli(const std::string& args) {
  const fs::path out = scratch() / "stdout.txt";
  const std::string cmd = std::string(ERGM_CLI_PATH) + " " + args + " > " + out.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

fs::path nine_node_network() {
  // 5-clique (10 edges, 10 triangles) plus a triangle-free tail.
  Network net(9);
  for (std::uint32_t i = 0; i < 5; ++i)
    for (std::uint32_t j = i + 1; j < 5; ++j) net.toggle(i, j);
  net.toggle(4, 5);
  net.toggle(5, 6);
  net.toggle(6, 7);
  net.toggle(7, 8);
  net.toggle(8, 0);
  const fs::path p = scratch() / "net9.txt";
  save_network(p, net);
  return p;
}

fs::path et_model() {
  const fs::path p = scratch() / "et.model";
  write(p, "edges\ntriangles\n");
  return p;
}

}  // namespace

TEST(Csv, SchemaLineAndStableColumns) {
  CsvTable t;
  t.schema = "demo";
  t.header = {"a", "b"};
  t.rows = {{"1", "2"}};
  EXPECT_EQ(t.str(), "# schema demo v1\na,b\n1,2\n");
}

TEST(Experiments, Fig1Cloud) {
  FigureConfig c;
  c.replicates = 12;
  c.seed = 3;
  const ExperimentReport r = run_figure_experiments(Figure::Fig1, c);
  EXPECT_EQ(r.report["anneal_successes"].get<std::size_t>(), 12u);
  EXPECT_EQ(r.csv.rows.size(), 12u);
  EXPECT_EQ(r.csv.header.front(), "kind");
  EXPECT_EQ(r.report["seed"].get<std::uint64_t>(), 3u);
  // Same seed, same cloud.
  EXPECT_EQ(run_figure_experiments(Figure::Fig1, c).csv.str(), r.csv.str());
}

TEST(Experiments, Fig4TrialsReportStatus) {
  FigureConfig c;
  c.replicates = 6;
  c.trials = 3;
  c.seed = 4;
  c.mcmle.sampler = default_sampler_config(9);
  c.mcmle.sampler.sample_size = 500;
  c.mcmle.max_outer_iterations = 5;
  const ExperimentReport r = run_figure_experiments(Figure::Fig4, c);
  ASSERT_EQ(r.csv.rows.size(), 3u);
  for (const auto& row : r.csv.rows) {
    const std::string& status = row[4];
    EXPECT_TRUE(status == "Converged" || status == "Degenerate" || status == "MaxIterations");
  }
}

TEST(Experiments, EcoliNeedsNetwork) {
  EXPECT_THROW(run_figure_experiments(Figure::EcoliClusters, FigureConfig{}), IoError);
}

TEST(Experiments, EcoliPipelineOnSyntheticSparseNetwork) {
  // Smoke run of the full cluster pipeline on a small sparse stand-in.
  Rng rng(5);
  FigureConfig c;
  c.observed = erdos_renyi(60, 0.05, rng);
  c.replicates = 2;
  c.seed = 6;
  c.anneal.target_tolerance = 1e-5;
  c.anneal.tie_prob = 0.5;
  c.mcmle.sampler = default_sampler_config(60);
  c.mcmle.sampler.sample_size = 300;
  c.mcmle.sampler.proposal = TieNoTie{0.5};
  c.mcmle.max_outer_iterations = 3;
  const ExperimentReport r = run_figure_experiments(Figure::EcoliClusters, c);
  EXPECT_EQ(r.report["observed"]["nodes"].get<std::size_t>(), 60u);
  EXPECT_TRUE(r.report.contains("er_single_cluster"));
  EXPECT_GE(r.csv.rows.size(), 4u);
}

TEST(Cli, StatsAndMple) {
  const auto net = nine_node_network();
  const auto model = et_model();
  CliRun r = run_cli("stats --network " + net.string() + " --model " + model.string());
  ASSERT_EQ(r.code, 0);
  const json j = json::parse(r.out);
  EXPECT_EQ(j["stats"], json({15.0, 10.0}));

  r = run_cli("--format csv stats --network " + net.string() + " --model " + model.string());
  EXPECT_EQ(r.out, "edges,triangle\n15,10\n");

  r = run_cli("mple --network " + net.string() + " --model " + model.string());
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(json::parse(r.out)["converged"].get<bool>());
}

TEST(Cli, ExitCodes) {
  const auto model = et_model();
  EXPECT_EQ(run_cli("").code, 2);
  EXPECT_EQ(run_cli("no-such-command").code, 2);
  EXPECT_EQ(run_cli("stats --model " + model.string()).code, 2);
  EXPECT_EQ(run_cli("stats --network /nonexistent --model " + model.string()).code, 4);
  const fs::path empty = scratch() / "empty.txt";
  write(empty, "n 6\n");
  EXPECT_EQ(run_cli("mple --network " + empty.string() + " --model " + model.string()).code, 3);
  const fs::path bad = scratch() / "bad.txt";
  write(bad, "n 3\n0 9\n");
  EXPECT_EQ(run_cli("stats --network " + bad.string() + " --model " + model.string()).code, 4);
  EXPECT_EQ(run_cli("exact-mle --model " + model.string() + " --n 12 --target 1,1 --cache ''").code, 2);
}

TEST(Cli, SimulateIsSeeded) {
  const auto model = et_model();
  const fs::path cfg = scratch() / "sim.json";
  write(cfg, R"({"sampler": {"sample_size": 20, "proposal": "tnt"}})");
  const std::string args =
      "--seed 7 simulate --model " + model.string() + " --theta -1,0.5 --n 8 --config " + cfg.string();
  const CliRun a = run_cli(args), b = run_cli(args);
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  std::istringstream in(a.out);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) rows += !line.empty() && line[0] != '#';
  EXPECT_EQ(rows, 21);  // header + 20 draws
}

TEST(Cli, ExactMleAndAnnealInit) {
  const auto model = et_model();
  CliRun r = run_cli("exact-mle --model " + model.string() + " --n 6 --target 7,2 --cache ''");
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(json::parse(r.out)["exists"].get<bool>());

  const auto net = nine_node_network();
  const fs::path matched = scratch() / "matched.txt";
  r = run_cli("anneal-init --network " + net.string() + " --model " + model.string() +
              " --attempts 3 --matched-out " + matched.string());
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(json::parse(r.out)["achieved_distance"].get<double>(), 0.0);
  const Network m = load_network(matched).network;
  EXPECT_EQ(stat_vector(edges_triangles_model(), m), (StatVector{{15.0, 10.0}}));

  r = run_cli("cloud-experiment --network " + net.string() + " --model " + model.string() +
              " --replicates 4 --init observed");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("# schema mple-cloud v1\n", 0), 0u);
}

TEST(Cli, McmleFromTheta) {
  const auto net = nine_node_network();
  const auto model = et_model();
  const fs::path cfg = scratch() / "mcmle.json";
  write(cfg, R"({"mcmle": {"max_outer_iterations": 3, "sampler": {"sample_size": 300}}})");
  const CliRun r = run_cli("mcmle --network " + net.string() + " --model " + model.string() +
                        " --start theta:-1,0.3 --config " + cfg.string());
  ASSERT_TRUE(r.code == 0 || r.code == 3);
  const json j = json::parse(r.out);
  EXPECT_TRUE(j.contains("final_moment_z"));
  EXPECT_EQ(j["start"]["mode"], "theta");
}
