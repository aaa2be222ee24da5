#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>

#include "graphmore/report.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

Run cli(const std::string& args) {
  static int counter = 0;
  const auto log = oracle::temp_dir("cli_out") / ("out" + std::to_string(counter++) + ".txt");
  const std::string cmd = std::string(GRAPHMORE_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, oracle::read_file(log)};
}

double summary_value(const std::string& out, const std::string& key) {
  const auto at = out.find(key + " ");
  if (at == std::string::npos) return NAN;
  return std::stod(out.substr(at + key.size() + 1));
}

fs::path generated(const std::string& tag, std::size_t nodes = 60) {
  const auto dir = oracle::temp_dir(tag);
  const auto r = cli("generate --nodes " + std::to_string(nodes) + " --mix tree:0.5,cycle:0.5,inter:0.05 --seed 7 --out " +
                     dir.string());
  EXPECT_EQ(r.code, 0) << r.out;
  return dir;
}

std::string data_flags(const fs::path& d) {
  return "--graph " + (d / "edges.txt").string() + " --features " + (d / "features.txt").string();
}

}  // namespace

TEST(Cli, HelpExitsZero) {
  auto r = cli("--help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("--deterministic"), std::string::npos);
  auto t = cli("train --help");
  EXPECT_EQ(t.code, 0);
  for (const char* flag : {"--task", "--graph", "--features", "--labels", "--config", "--out"})
    EXPECT_NE(t.out.find(flag), std::string::npos) << flag;
}

TEST(Cli, UnknownFlagIsUsageError) { EXPECT_EQ(cli("generate --nodes 10 --mix tree:1 --out /tmp/x --bogus").code, 2); }

TEST(Cli, GenerateIsDeterministic) {
  const auto a = generated("cli_gen_a"), b = generated("cli_gen_b");
  for (const char* f : {"edges.txt", "features.txt", "labels.txt", "manifest.txt"})
    EXPECT_EQ(oracle::read_file(a / f), oracle::read_file(b / f)) << f;
}

TEST(Cli, GenerateRejectsBadMix) {
  const auto d = oracle::temp_dir("cli_badmix");
  EXPECT_EQ(cli("generate --nodes 40 --mix cycle:1,cycle_len:2 --out " + d.string()).code, 2);
  EXPECT_EQ(cli("generate --nodes 40 --mix blob:1 --out " + d.string()).code, 2);
}

TEST(Cli, CurvatureSigns) {
  const auto d = oracle::temp_dir("cli_curv");
  std::string tree, cyc;
  for (int v = 1; v < 127; ++v) tree += std::to_string((v - 1) / 2) + " " + std::to_string(v) + "\n";
  for (int v = 0; v < 50; ++v) cyc += std::to_string(v) + " " + std::to_string((v + 1) % 50) + "\n";
  oracle::write_file(d / "tree.txt", tree);
  oracle::write_file(d / "cycle.txt", cyc);
  auto t = cli("analyze-curvature --graph " + (d / "tree.txt").string() + " --out " + (d / "tree.csv").string());
  ASSERT_EQ(t.code, 0) << t.out;
  EXPECT_GT(summary_value(t.out, "fraction_negative"), 0.9) << t.out;
  EXPECT_EQ(oracle::read_file(d / "tree.csv").rfind("left,right,count\n", 0), 0u);
  auto c = cli("analyze-curvature --graph " + (d / "cycle.txt").string());
  ASSERT_EQ(c.code, 0);
  EXPECT_DOUBLE_EQ(summary_value(c.out, "fraction_nonnegative"), 1.0) << c.out;
}

TEST(Cli, CurvatureEmptyGraph) {
  const auto d = oracle::temp_dir("cli_curv_empty");
  oracle::write_file(d / "empty.txt", "# nothing\n");
  EXPECT_EQ(cli("analyze-curvature --graph " + (d / "empty.txt").string()).code, 2);
  oracle::write_file(d / "edge.txt", "0 1\n");
  EXPECT_EQ(cli("analyze-curvature --graph " + (d / "edge.txt").string()).code, 2);
}

TEST(Cli, TrainThenEvaluate) {
  const auto d = generated("cli_train");
  const auto run = d / "run";
  auto r = cli("train --task lp " + data_flags(d) + " --epochs 3 --deterministic --out " + run.string());
  ASSERT_EQ(r.code, 0) << r.out;
  for (const char* f : {"config.echo", "checkpoint.json", "log.csv", "report.json", "curves.csv", "per_node_distortion.csv"})
    EXPECT_TRUE(fs::exists(run / f)) << f;
  EXPECT_EQ(oracle::read_file(run / "log.csv"), oracle::read_file(run / "curves.csv"));
  const auto trained = graphmore::read_report(run / "report.json");
  auto e = cli("evaluate --run " + run.string() + " " + data_flags(d));
  ASSERT_EQ(e.code, 0) << e.out;
  EXPECT_TRUE(trained.same_metrics(graphmore::read_report(run / "report.json")));
}

TEST(Cli, TrainIsByteReproducible) {
  const auto d = generated("cli_repro");
  const auto a = d / "a", b = d / "b";
  ASSERT_EQ(cli("train " + data_flags(d) + " --epochs 4 --seed 3 --deterministic --out " + a.string()).code, 0);
  ASSERT_EQ(cli("train " + data_flags(d) + " --epochs 4 --seed 3 --deterministic --out " + b.string()).code, 0);
  for (const char* f : {"log.csv", "report.json", "checkpoint.json"})
    EXPECT_EQ(oracle::read_file(a / f), oracle::read_file(b / f)) << f;
}

TEST(Cli, NodeClassificationNeedsLabels) {
  const auto d = generated("cli_nc");
  EXPECT_EQ(cli("train --task nc " + data_flags(d) + " --out " + (d / "run").string()).code, 2);
  auto ok = cli("train --task nc " + data_flags(d) + " --labels " + (d / "labels.txt").string() + " --epochs 2 --out " +
                (d / "run").string());
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_NE(ok.out.find("macro_f1"), std::string::npos);
}

TEST(Cli, UnknownConfigKeyNamed) {
  const auto d = generated("cli_cfg");
  oracle::write_file(d / "bad.cfg", "loss.lambda = 0.1\ntrain.epoch = 3\n");
  auto r = cli("train " + data_flags(d) + " --config " + (d / "bad.cfg").string() + " --out " + (d / "run").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("train.epoch"), std::string::npos) << r.out;
}

TEST(Cli, CorruptedCheckpoint) {
  const auto d = generated("cli_corrupt");
  const auto run = d / "run";
  ASSERT_EQ(cli("train " + data_flags(d) + " --epochs 1 --out " + run.string()).code, 0);
  oracle::write_file(run / "checkpoint.json", "{\"format\": \"graphmore-checkpoint\", \"version\": 99}");
  EXPECT_EQ(cli("evaluate --run " + run.string() + " " + data_flags(d)).code, 2);
  oracle::write_file(run / "checkpoint.json", "garbage");
  EXPECT_EQ(cli("evaluate --run " + run.string() + " " + data_flags(d)).code, 2);
}

TEST(Cli, MalformedEdgeListNamesLine) {
  const auto d = oracle::temp_dir("cli_badgraph");
  oracle::write_file(d / "g.txt", "0 1\n1 x\n");
  auto r = cli("train --graph " + (d / "g.txt").string() + " --out " + (d / "run").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("g.txt:2:"), std::string::npos) << r.out;
}
