#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "lazylp/ammcore.hpp"
#include "lazylp/marketdata.hpp"
#include "lazylp/regime.hpp"

namespace lazylp {

inline constexpr std::size_t kStateDim = 8;
inline constexpr std::size_t kRecentVolWindow = 300;
inline constexpr double kSigmaNormCap = 0.1;
inline constexpr double kRecentVolCap = 0.1;

// Observation vector, in network input order.
struct AgentState {
  double delta_p = 0.0;     // S / c - 1
  double d_edge = 0.0;      // signed offset in units of the half-width, clipped to [-1, 1]
  double theta = 0.0;       // mean-reversion speed estimate, [0, 1]
  double delta_mu = 0.0;    // (mu - S) / S
  double sigma_norm = 0.0;  // sigma / S, clipped to [0, 0.1]
  double active_frac = 0.0;
  double recent_vol = 0.0;  // stdev of last 300 one-second log returns, clipped to [0, 0.1]
  double in_range_flag = 0.0;

  std::array<double, kStateDim> to_array() const;
  friend bool operator==(const AgentState&, const AgentState&) = default;
};

struct RewardParams {
  double reward_scale = 100.0;
  double active_bonus = 1e-4;
};

struct Transition {
  AgentState state;
  int action = 0;
  double reward = 0.0;
  AgentState next_state;
  bool terminal = false;
};

// Exactly +-1 on or beyond the boundary, strictly inside otherwise.
double edge_distance(const Position& pos, double s);

AgentState build_state(double price, const Position& pos, const RegimeEstimate& est,
                       double recent_vol);

// Bars plus causal per-bar features (rolling regime fit and realized volatility),
// computed once and shared read-only between environments and backtests.
struct MarketData {
  BarSeries series;
  std::vector<RegimeEstimate> regime;
  std::vector<double> recent_vol;

  std::size_t size() const noexcept { return series.size(); }
  double price(std::size_t i) const { return series[i].close; }
  double volume(std::size_t i) const { return series[i].volume; }
};

std::shared_ptr<const MarketData> make_market_data(BarSeries series,
                                                   std::size_t regime_window = kDefaultRegimeWindow,
                                                   std::size_t vol_window = kRecentVolWindow);

// Realized volatility per index: sample stdev of the trailing log returns,
// clipped at kRecentVolCap. Zero until two returns are available.
std::vector<double> recent_volatility(std::span<const double> closes,
                                      std::size_t window = kRecentVolWindow);

struct EnvConfig {
  PoolConfig pool;
  double capital = kDefaultCapital;
  RewardParams reward;
  std::size_t episode_length = 36'000;
  // Usable bar range [begin, end); end = 0 means the whole series.
  std::size_t begin = 0;
  std::size_t end = 0;
};

struct StepDiagnostics {
  std::int64_t t = 0;
  double price = 0.0;   // price after the bar advance
  double center = 0.0;  // center in force during the bar
  double fee = 0.0;
  double gas = 0.0;
  bool in_range = false;
};

struct StepResult {
  Transition transition;
  StepDiagnostics diagnostics;
};

struct TraceRow {
  std::int64_t t;
  double price, center;
  int action;
  double fee, gas, reward, theta;
  bool in_range;
};

void write_trace_csv(const std::filesystem::path& path, std::span<const TraceRow> rows);

// One liquidity position stepped one bar at a time. Action 1 recenters at the
// current close before the bar advance, so the step's fee accrues at the new
// center. Reward = scale * (dFees - dGas) / K + bonus * in_range(next).
class Environment {
 public:
  Environment(std::shared_ptr<const MarketData> data, EnvConfig cfg);

  AgentState reset(std::size_t start_index);
  // Uniform start over the usable range.
  AgentState reset_random(std::mt19937_64& rng);
  AgentState reset_random(std::uint64_t seed);

  StepResult step(int action);

  bool terminal() const noexcept { return terminal_; }
  const AgentState& state() const noexcept { return state_; }
  const Position& position() const noexcept { return pos_; }
  std::size_t index() const noexcept { return index_; }
  std::size_t start_index() const noexcept { return start_; }
  std::size_t steps_taken() const noexcept { return steps_; }
  const EnvConfig& config() const noexcept { return cfg_; }
  const MarketData& data() const noexcept { return *data_; }
  std::size_t max_start() const noexcept { return last_start_; }

  void set_trace(bool enabled) { tracing_ = enabled; trace_.clear(); }
  const std::vector<TraceRow>& trace() const noexcept { return trace_; }

 private:
  AgentState observe() const;

  std::shared_ptr<const MarketData> data_;
  EnvConfig cfg_;
  std::size_t last_start_ = 0;
  Position pos_;
  AgentState state_;
  std::size_t start_ = 0;
  std::size_t index_ = 0;
  std::size_t steps_ = 0;
  bool terminal_ = true;
  double reported_fees_ = 0.0;
  double reported_gas_ = 0.0;
  bool tracing_ = false;
  std::vector<TraceRow> trace_;
};

}  // namespace lazylp
