#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lazylp/ammcore.hpp"
#include "lazylp/envsim.hpp"
#include "lazylp/neural.hpp"
#include "lazylp/strategies.hpp"

namespace lazylp {

struct RebalanceEvent {
  std::size_t index = 0;
  double price = 0.0;
  double old_center = 0.0;
  double deviation = 0.0;  // |S / c_old - 1|
};

struct BacktestReport {
  std::string strategy;
  double active_fraction = 0.0;
  double normalized_liquidity = 0.0;
  std::int64_t rebalance_count = 0;
  double total_fees = 0.0;
  double total_gas = 0.0;
  double net_roi = 0.0;
  double capital = 0.0;
  std::size_t seconds = 0;
  std::vector<RebalanceEvent> rebalances;  // excludes the initial placement
  std::vector<TraceRow> trace;             // filled when requested
};

struct BacktestOptions {
  PoolConfig pool;
  double capital = kDefaultCapital;
  bool keep_trace = false;
};

// Second-by-second replay over bars [begin, end): decide on the bar's close,
// apply the decision, then accrue that bar's fee.
BacktestReport run_backtest(Strategy& strategy, const MarketData& market, std::size_t begin,
                            std::size_t end, const BacktestOptions& opts);

nlohmann::json report_to_json(const BacktestReport& report, const std::string& config_hash,
                              const std::string& trace_path);

using StrategyFactory = std::function<std::unique_ptr<Strategy>()>;

struct GasSweepTable {
  std::vector<double> gas_levels;
  std::vector<std::string> strategies;
  std::vector<std::vector<double>> net_roi;  // [strategy][gas level]
  std::vector<std::vector<std::int64_t>> rebalances;
  // Gas at which net ROI crosses zero, by linear interpolation between the
  // bracketing levels, or by extension of the nearest two levels otherwise.
  std::vector<double> break_even;
  std::vector<bool> break_even_extrapolated;
};

inline const std::vector<double> kDefaultGasLevels = {1, 2, 5, 10, 20, 50};

GasSweepTable gas_sweep(const std::vector<StrategyFactory>& strategies, const MarketData& market,
                        std::size_t begin, std::size_t end, const BacktestOptions& base,
                        const std::vector<double>& gas_levels = kDefaultGasLevels);

double break_even_gas(const std::vector<double>& gas, const std::vector<double>& roi,
                      bool* extrapolated = nullptr);

void write_gas_sweep_csv(const std::filesystem::path& path, const GasSweepTable& table);

struct HeatmapReference {
  double width = 0.002;
  double sigma_norm = 0.0;
  double recent_vol = 0.0;
  double active_frac = 0.5;
};

// Median sigma_norm and recent_vol over [begin, end) of the market features.
HeatmapReference heatmap_reference(const MarketData& market, std::size_t begin, std::size_t end,
                                   double width);

struct HeatmapGrid {
  std::vector<double> theta_axis;
  std::vector<double> d_edge_axis;
  std::vector<double> q_diff;  // theta-major: q_diff[i * d_edge_axis.size() + j]
  HeatmapReference reference;

  double at(std::size_t theta_i, std::size_t edge_j) const {
    return q_diff[theta_i * d_edge_axis.size() + edge_j];
  }
};

// Q(rebalance) - Q(hold) over a (theta, d_edge) grid with the remaining
// features pinned: delta_p = d_edge * w, delta_mu = 0, in_range = |d_edge| < 1.
HeatmapGrid heatmap(const Mlp& net, const std::vector<double>& theta_axis,
                    const std::vector<double>& d_edge_axis, const HeatmapReference& ref);

void write_heatmap_csv(const std::filesystem::path& path, const HeatmapGrid& grid);

std::vector<double> linspace(double lo, double hi, std::size_t n);

}  // namespace lazylp
