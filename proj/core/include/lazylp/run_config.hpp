#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lazylp/agent.hpp"
#include "lazylp/ammcore.hpp"
#include "lazylp/backtest.hpp"
#include "lazylp/envsim.hpp"
#include "lazylp/marketdata.hpp"
#include "lazylp/synthpath.hpp"

namespace lazylp {

// Where the bars come from. A synthetic schedule tiles `segments` cyclically
// until `total_seconds` (0 = one pass over the segments).
struct DataSpec {
  enum class Source { Synth, Csv };
  Source source = Source::Synth;
  std::string path;  // trades or bars CSV, told apart by the header
  RegimeSchedule schedule;
  std::int64_t total_seconds = 0;
  SplitFractions split;
};

struct StrategySpec {
  std::string name = "lancelot";
  double horizon = 60.0;  // galahad forecast horizon, seconds
};

struct BacktestSpec {
  std::string segment = "test";  // train | validation | test | all
  std::vector<double> gas_levels = kDefaultGasLevels;
  std::vector<std::string> strategies = {"merlin", "bedivere", "lancelot", "galahad"};
  bool keep_trace = true;
};

struct QviSpec {
  double rho = 0.01005033585350145;
  double ref_volume = 10'000.0;
  std::optional<double> cost;  // defaults to the pool's rebalance cost
  OuParams ou{0.05, 100.0, 0.5};
  std::size_t n_s = 401;
  std::size_t n_c = 101;
  double span_sd = 6.0;
  double tol = 1e-9;
  std::size_t max_iters = 20'000;
};

struct HeatmapSpec {
  double theta_min = 0.0;
  double theta_max = 0.1;
  std::size_t n_theta = 21;
  double d_edge_min = -1.0;
  double d_edge_max = 1.0;
  std::size_t n_d_edge = 21;
};

struct RunConfig {
  std::string profile = "smoke";
  std::uint64_t seed = 0;
  DataSpec data;
  PoolConfig pool;
  double capital = kDefaultCapital;
  std::size_t regime_window = kDefaultRegimeWindow;
  RewardParams reward;
  TrainConfig train;
  StrategySpec strategy;
  std::optional<std::string> checkpoint;
  BacktestSpec backtest;
  QviSpec qvi;
  HeatmapSpec heatmap;
};

// Built-in profiles: "smoke" (20 x 3600 training on a 10^4-second mixed-regime
// series) and "full" (300 x 36000). Throws ConfigError for other names.
nlohmann::json profile_defaults(std::string_view profile);

// Strict parse of a complete document: unknown keys, wrong types and values
// out of range raise ConfigError naming the offending key.
RunConfig parse_run_config(const nlohmann::json& doc);

// Canonical, fully resolved form; parse_run_config(to_json(c)) == c.
nlohmann::json to_json(const RunConfig& cfg);

// Profile defaults, then the config file (JSON merge patch), then `overrides`.
RunConfig load_run_config(const std::optional<std::filesystem::path>& file,
                          std::string_view profile = "smoke",
                          const nlohmann::json& overrides = nlohmann::json::object());

// 16 hex digits of FNV-1a over the canonical JSON.
std::string config_hash(const RunConfig& cfg);

// Bars for the configured source; synthetic data uses cfg.seed. Split marks applied.
BarSeries load_bars(const RunConfig& cfg);

// [begin, end) of a named split segment.
std::pair<std::size_t, std::size_t> segment_bounds(const BarSeries& series, std::string_view name);

}  // namespace lazylp
