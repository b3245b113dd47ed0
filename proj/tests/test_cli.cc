#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "sfeuot/checkpoint.hpp"
#include "sfeuot/config.hpp"
#include "sfeuot/train.hpp"

namespace fs = std::filesystem;
using namespace sfeuot;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "sfeuot_cli_test.log";
  const std::string cmd = std::string(SFEUOT_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream f(log);
  std::stringstream ss;
  ss << f.rdbuf();
  r.out = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("sfeuot_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

fs::path write_config(const fs::path& dir, const std::string& json) {
  const fs::path p = dir / "cfg.json";
  std::ofstream(p) << json;
  return p;
}

const char* kSmall2d =
    R"({"dataset": "gauss_to_8gauss", "batch_size": 16, "hidden_dim": 8, "hidden_layers": 2,
        "total_iters": 10, "eval_every": 5, "eval_samples": 64, "seed": 1})";

}  // namespace

TEST(Cli, HelpExitsZero) { EXPECT_EQ(run("--help").code, 0); }

TEST(Cli, UnknownSubcommandIsUsageError) { EXPECT_EQ(run("frobnicate").code, 1); }

TEST(Cli, MissingConfigNamesPath) {
  const auto r = run("train --config /nonexistent/cfg.json --out /tmp/sfeuot_cli_never");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("/nonexistent/cfg.json"), std::string::npos) << r.out;
}

TEST(Cli, InvalidConfigValueNamesField) {
  const fs::path d = scratch("badcfg");
  const auto cfg = write_config(d, R"({"sigma": -1})");
  const auto r = run("train --config " + cfg.string() + " --out " + (d / "o").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("sigma"), std::string::npos) << r.out;
}

TEST(Cli, ZeroIterationTrainSavesInitialModels) {
  const fs::path d = scratch("k0");
  const std::string json =
      R"({"dataset": "gauss_to_8gauss", "batch_size": 16, "hidden_dim": 8, "hidden_layers": 2, "total_iters": 0, "seed": 9})";
  const auto cfg = write_config(d, json);
  const auto r = run("train --quiet --config " + cfg.string() + " --out " + (d / "o").string());
  ASSERT_EQ(r.code, 0) << r.out;
  const TrainState init = TrainState::init(parse_config(json));
  auto [g, v] = load_models(d / "o" / "checkpoint.bin");
  EXPECT_EQ(g.net, init.gen.net);
  EXPECT_EQ(v.net, init.val.net);
}

TEST(Cli, TrainThenEval) {
  const fs::path d = scratch("train_eval");
  const auto cfg = write_config(d, kSmall2d);
  const fs::path out = d / "run";
  const auto r = run("train --quiet --config " + cfg.string() + " --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.out;
  for (const char* f : {"checkpoint.bin", "report.csv", "manifest.json", "config.json", "state.json"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  EXPECT_NE(slurp(out / "report.csv").find("mode_coverage"), std::string::npos);
  EXPECT_NE(slurp(out / "manifest.json").find(config_hash(parse_config(kSmall2d))), std::string::npos);

  const std::string common = "eval --checkpoint " + (out / "checkpoint.bin").string() + " --config " +
                             cfg.string() + " --seed 5 --samples 500 --oracle-atoms 64 --energy-samples 300 --permutations 5";
  const auto e1 = run(common + " --out " + (d / "e1").string());
  ASSERT_EQ(e1.code, 0) << e1.out;
  const auto e2 = run(common + " --out " + (d / "e2").string());
  ASSERT_EQ(e2.code, 0) << e2.out;
  const std::string m1 = slurp(d / "e1" / "metrics.csv");
  EXPECT_EQ(m1, slurp(d / "e2" / "metrics.csv"));
  EXPECT_EQ(slurp(d / "e1" / "pairs.csv"), slurp(d / "e2" / "pairs.csv"));
  EXPECT_EQ(m1.substr(0, m1.find('\n')), "name,value,n_samples,seed");
  for (const char* name : {"transport_cost", "mode_coverage", "energy_distance_vs_oracle", "energy_distance_null95"})
    EXPECT_NE(m1.find(name), std::string::npos) << name;
  EXPECT_TRUE(fs::exists(d / "e1" / "scatter.svg"));
}

TEST(Cli, EvalRejectsDimensionMismatch) {
  const fs::path d = scratch("dim");
  const auto cfg = write_config(d, kSmall2d);
  ASSERT_EQ(run("train --quiet --config " + cfg.string() + " --out " + (d / "run").string()).code, 0);
  const fs::path cfg5 = d / "cfg5.json";
  std::ofstream(cfg5) << R"({"dataset": "gaussian_pair", "data_dim": 5, "hidden_dim": 8, "hidden_layers": 2})";
  const auto r = run("eval --checkpoint " + (d / "run" / "checkpoint.bin").string() + " --config " + cfg5.string() +
                     " --out " + (d / "e").string());
  EXPECT_EQ(r.code, 1);
}

TEST(Cli, ResumeContinuesRun) {
  const fs::path d = scratch("resume");
  const auto cfg = write_config(d, kSmall2d);
  ASSERT_EQ(run("train --quiet --config " + cfg.string() + " --out " + (d / "run").string()).code, 0);
  const auto r = run("train --quiet --resume --config " + cfg.string() + " --out " + (d / "run").string());
  EXPECT_EQ(r.code, 0) << r.out;
}

TEST(Cli, OracleGaussianClosedForm) {
  const fs::path d = scratch("og");
  const auto r = run("oracle gaussian --out " + d.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("0.618034"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(d / "gaussian_coupling.csv"));
}

TEST(Cli, OracleSinkhornSingleAtom) {
  const fs::path d = scratch("os");
  std::ofstream(d / "a.csv") << "0.3,0.7\n";
  std::ofstream(d / "b.csv") << "-1.0,2.0\n";
  const auto r = run("oracle sinkhorn --source " + (d / "a.csv").string() + " --target " + (d / "b.csv").string() +
                     " --epsilon 0.5 --out " + d.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const std::string plan = slurp(d / "coupling.csv");
  EXPECT_NE(plan.find("0,0,1"), std::string::npos) << plan;
}

TEST(Cli, OracleBruteMatchesSinkhorn) {
  const fs::path d = scratch("ob");
  const auto r = run("oracle brute --n 3 --m 3 --seed 4 --epsilon 0.5 --out " + d.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto pos = r.out.find("max abs diff = ");
  ASSERT_NE(pos, std::string::npos) << r.out;
  EXPECT_LE(std::stod(r.out.substr(pos + 15)), 1e-3);
}

TEST(Cli, Gradcheck) {
  EXPECT_EQ(run("gradcheck --points 20").code, 0);
  EXPECT_NE(run("gradcheck --points 5 --corrupt-derivative 0.05").code, 0);
}

TEST(Cli, SampleWritesBothSides) {
  const fs::path d = scratch("sample");
  const auto cfg = write_config(d, kSmall2d);
  ASSERT_EQ(run("sample --config " + cfg.string() + " --n 50 --out " + d.string()).code, 0);
  std::ifstream src(d / "source.csv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(src, line))
    if (!line.empty()) ++rows;
  EXPECT_GE(rows, 50u);
  EXPECT_TRUE(fs::exists(d / "target.csv"));
}
