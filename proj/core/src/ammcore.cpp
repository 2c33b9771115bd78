#include "lazylp/ammcore.hpp"

#include <cmath>

#include "lazylp/error.hpp"

namespace lazylp {
namespace {
constexpr double kBoundarySlack = 1e-12;
}

void PoolConfig::validate() const {
  const bool ok = fee_tier > 0 && fee_tier < 1 && gas_cost >= 0 && pool_tvl > 0 &&
                  dex_cex_ratio > 0 && dex_cex_ratio <= 1 && width > 0 && width < 1;
  if (!ok) throw Error(ErrorCode::ConfigError, "pool config out of range");
}

double edge_offset(const Position& pos, double s) {
  return (s - pos.center) / (pos.center * pos.width);
}

bool in_range(const Position& pos, double s) {
  return std::abs(edge_offset(pos, s)) <= 1.0 + kBoundarySlack;
}

double concentration(double width) {
  if (!(width > 0 && width < 1)) throw Error(ErrorCode::DomainError, "width must be in (0, 1)");
  return 1.0 / std::sqrt(width);
}

Position open_position(double center, double capital, const PoolConfig& cfg) {
  if (!(center > 0) || !(capital > 0)) {
    throw Error(ErrorCode::DomainError, "center and capital must be positive");
  }
  Position pos;
  pos.center = center;
  pos.width = cfg.width;
  pos.capital = capital;
  pos.accrued_gas = cfg.gas_cost;
  pos.rebalance_count = 1;
  return pos;
}

double fee_step(Position& pos, double s, double cex_volume, const PoolConfig& cfg) {
  ++pos.total_seconds;
  if (!in_range(pos, s)) return 0.0;
  ++pos.active_seconds;
  const double lp_liquidity = pos.capital * concentration(pos.width);
  const double fee = cfg.dex_cex_ratio * cex_volume * cfg.fee_tier * lp_liquidity / cfg.pool_tvl;
  pos.accrued_fees += fee;
  return fee;
}

double rebalance_cost(const PoolConfig& cfg, double capital) {
  return cfg.fee_tier * 0.5 * capital + cfg.gas_cost;
}

void recenter(Position& pos, double s, const PoolConfig& cfg) {
  if (!(s > 0)) throw Error(ErrorCode::DomainError, "recenter price must be positive");
  pos.center = s;
  pos.accrued_gas += rebalance_cost(cfg, pos.capital);
  ++pos.rebalance_count;
}

double net_roi(const Position& pos) {
  if (!(pos.capital > 0)) throw Error(ErrorCode::DomainError, "capital must be positive");
  return (pos.accrued_fees - pos.accrued_gas) / pos.capital;
}

double virtual_liquidity(std::optional<double> dx, std::optional<double> dy, double price,
                         double price_lower, double price_upper) {
  if (!(price_lower > 0 && price_lower < price && price < price_upper)) {
    throw Error(ErrorCode::DomainError, "price must lie strictly inside (p_a, p_b)");
  }
  if (!dx && !dy) throw Error(ErrorCode::DomainError, "need at least one token amount");
  std::optional<double> from_x, from_y;
  if (dx) from_x = *dx / (1.0 / std::sqrt(price) - 1.0 / std::sqrt(price_upper));
  if (dy) from_y = *dy / (std::sqrt(price) - std::sqrt(price_lower));
  if (from_x && from_y) {
    const double scale = std::max(std::abs(*from_x), std::abs(*from_y));
    if (std::abs(*from_x - *from_y) > 1e-6 * scale) {
      throw Error(ErrorCode::InconsistentDeposit, "token amounts imply different liquidity");
    }
    return 0.5 * (*from_x + *from_y);
  }
  return from_x ? *from_x : *from_y;
}

}  // namespace lazylp
