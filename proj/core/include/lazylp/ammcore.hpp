#pragma once

#include <cstdint>
#include <optional>

namespace lazylp {

// Pool and friction parameters. Defaults are the reference environment:
// 20 bps range, 0.05% fee tier, $2 gas, $500k TVL, 10% DEX/CEX volume ratio.
struct PoolConfig {
  double fee_tier = 0.0005;
  double gas_cost = 2.0;
  double pool_tvl = 500'000.0;
  double dex_cex_ratio = 0.10;
  double width = 0.002;  // half-width as a fraction of the center

  void validate() const;
};

inline constexpr double kDefaultCapital = 10'000.0;

struct Position {
  double center = 0.0;
  double width = 0.002;
  double capital = kDefaultCapital;
  double accrued_fees = 0.0;
  double accrued_gas = 0.0;
  std::int64_t rebalance_count = 0;
  std::int64_t active_seconds = 0;
  std::int64_t total_seconds = 0;

  double lower() const noexcept { return center * (1.0 - width); }
  double upper() const noexcept { return center * (1.0 + width); }
};

// (s - c) / (c w): 0 at the center, +-1 on the boundaries.
double edge_offset(const Position& pos, double s);

// Closed interval [c(1 - w), c(1 + w)] up to a 1e-12 relative slack on the
// offset, so prices written as c(1 +- w) in decimal count as inside.
bool in_range(const Position& pos, double s);

// Fee amplification 1 / sqrt(w).
double concentration(double width);

// Initial placement: counts as the first rebalance but is charged gas only,
// since no inventory swap is needed to open the range.
Position open_position(double center, double capital, const PoolConfig& cfg);

// Accrues one second: dex_cex_ratio * volume * fee_tier * (K * lambda) / pool_tvl
// when in range, zero otherwise. Advances the active/total second counters.
double fee_step(Position& pos, double s, double cex_volume, const PoolConfig& cfg);

// Swap half the inventory at the fee tier plus fixed gas.
double rebalance_cost(const PoolConfig& cfg, double capital);

void recenter(Position& pos, double s, const PoolConfig& cfg);

double net_roi(const Position& pos);

// Tick-free concentrated liquidity L from one or both token amounts. When
// both are supplied they must imply the same L within 1e-6 relative.
double virtual_liquidity(std::optional<double> dx, std::optional<double> dy, double price,
                         double price_lower, double price_upper);

}  // namespace lazylp
