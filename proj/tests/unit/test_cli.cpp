#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "json.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "lazylp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = lazylp::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

fs::path small_config(const fs::path& dir) {
  const json doc = {
      {"data", {{"total_seconds", 3000}}},
      {"regime_window", 120},
      {"train",
       {{"episodes", 2}, {"episode_length", 300}, {"batch_size", 16}}},
      {"qvi", {{"n_s", 101}, {"n_c", 21}}},
      {"heatmap", {{"n_theta", 3}, {"n_d_edge", 5}}},
  };
  const fs::path path = dir / "small.json";
  std::ofstream(path) << doc.dump(2);
  return path;
}

std::vector<fs::path> listing(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) out.push_back(fs::relative(e.path(), dir));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST(Cli, SynthThenEstimate) {
  const auto dir = lazylp::testing::scratch_dir();
  const auto cfg = small_config(dir).string();
  ASSERT_EQ(run_cli({"synth", "--config", cfg, "--out", (dir / "s").string()}).code, 0);
  const fs::path bars = dir / "s" / "bars.csv";
  EXPECT_EQ(line_count(bars), 3001u);
  const auto r = run_cli({"estimate", "--config", cfg, "--data", bars.string(), "--out", (dir / "e").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(line_count(dir / "e" / "regime.csv"), 3001u);
  const json manifest = json::parse(slurp(dir / "e" / "estimate.manifest.json"));
  EXPECT_EQ(manifest.at("command"), "estimate");
  EXPECT_EQ(manifest.at("config_hash").get<std::string>().size(), 16u);
}

TEST(Cli, BacktestLancelot) {
  const auto dir = lazylp::testing::scratch_dir();
  const auto r = run_cli({"backtest", "--config", small_config(dir).string(), "--strategy", "lancelot",
                          "--out", (dir / "bt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json report = json::parse(slurp(dir / "bt" / "report.json"));
  EXPECT_EQ(report.at("strategy"), "lancelot");
  EXPECT_EQ(report.at("metrics").at("active_frac").get<double>(), 1.0);
  EXPECT_EQ(report.at("trace_path"), "trace.csv");
  const json manifest = json::parse(slurp(dir / "bt" / "backtest.manifest.json"));
  EXPECT_EQ(report.at("config_hash"), manifest.at("config_hash"));
}

TEST(Cli, TrainTwiceIsByteIdentical) {
  const auto dir = lazylp::testing::scratch_dir();
  const auto cfg = small_config(dir).string();
  ASSERT_EQ(run_cli({"train", "--config", cfg, "--seed", "7", "--out", (dir / "a").string()}).code, 0);
  ASSERT_EQ(run_cli({"train", "--config", cfg, "--seed", "7", "--out", (dir / "b").string()}).code, 0);
  const std::string a = slurp(dir / "a" / "checkpoint.json");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(dir / "b" / "checkpoint.json"));
  EXPECT_EQ(slurp(dir / "a" / "training_log.csv"), slurp(dir / "b" / "training_log.csv"));
  ASSERT_EQ(run_cli({"train", "--config", cfg, "--seed", "8", "--out", (dir / "c").string()}).code, 0);
  EXPECT_NE(a, slurp(dir / "c" / "checkpoint.json"));
}

TEST(Cli, EveryCommandStaysInsideOut) {
  const auto dir = lazylp::testing::scratch_dir();
  const auto cfg = small_config(dir).string();
  ASSERT_EQ(run_cli({"train", "--config", cfg, "--out", (dir / "train").string()}).code, 0);
  const auto ckpt = (dir / "train" / "checkpoint.json").string();
  const auto before = listing(dir);
  struct Case {
    std::string cmd;
    std::vector<std::string> extra;
    std::vector<std::string> files;
  };
  const std::vector<Case> cases = {
      {"synth", {}, {"bars.csv"}},
      {"estimate", {}, {"regime.csv"}},
      {"backtest", {"--strategy", "ddqn", "--checkpoint", ckpt}, {"report.json", "trace.csv"}},
      {"sweep-gas", {"--checkpoint", ckpt}, {"gas_sweep.csv", "break_even.csv"}},
      {"qvi", {}, {"qvi_solution.csv", "qvi_boundary.csv", "qvi_summary.json"}},
      {"heatmap", {"--checkpoint", ckpt}, {"heatmap.csv", "heatmap_meta.json"}},
  };
  for (const auto& c : cases) {
    const fs::path out = dir / ("o_" + c.cmd);
    std::vector<std::string> args{c.cmd, "--config", cfg, "--out", out.string()};
    args.insert(args.end(), c.extra.begin(), c.extra.end());
    const auto r = run_cli(args);
    ASSERT_EQ(r.code, 0) << c.cmd << ": " << r.err;
    EXPECT_TRUE(fs::exists(out / (c.cmd + ".manifest.json"))) << c.cmd;
    for (const auto& f : c.files) EXPECT_TRUE(fs::exists(out / f)) << c.cmd << " " << f;
  }
  // Only the new output directories appeared.
  for (const auto& p : listing(dir)) {
    if (std::find(before.begin(), before.end(), p) != before.end()) continue;
    EXPECT_EQ(p.begin()->string().rfind("o_", 0), 0u) << p;
  }
}

TEST(Cli, IngestTrades) {
  const auto dir = lazylp::testing::scratch_dir();
  std::ofstream(dir / "trades.csv") << "timestamp_ms,price,size\n0,100,1\n2500,101,1\n";
  const auto r = run_cli({"ingest", "--data", (dir / "trades.csv").string(), "--out", (dir / "i").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(line_count(dir / "i" / "bars.csv"), 4u);
}

TEST(Cli, ExitCodes) {
  const auto dir = lazylp::testing::scratch_dir();
  EXPECT_EQ(run_cli({}).code, 1);
  EXPECT_EQ(run_cli({"conjure"}).code, 1);
  EXPECT_EQ(run_cli({"synth", "--bogus"}).code, 1);
  EXPECT_EQ(run_cli({"synth", "--profile", "medium"}).code, 1);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
  std::ofstream(dir / "bad.json") << R"({"pool": {"gas": 1}})";
  const auto r = run_cli({"synth", "--config", (dir / "bad.json").string(), "--out", (dir / "x").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("gas"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "x"));
  EXPECT_EQ(run_cli({"backtest", "--strategy", "ddqn", "--out", (dir / "y").string()}).code, 1);
  EXPECT_EQ(run_cli({"backtest", "--data", (dir / "missing.csv").string(), "--out", (dir / "z").string()}).code, 2);
}
