#include "lazylp/strategies.hpp"

#include <algorithm>
#include <cmath>

#include "lazylp/agent.hpp"
#include "lazylp/error.hpp"

namespace lazylp {

Position Strategy::initialize(const MarketData& market, std::size_t begin, std::size_t,
                              const PoolConfig& cfg, double capital) const {
  return open_position(market.price(begin), capital, cfg);
}

MerlinRange merlin_init(std::span<const double> closes) {
  if (closes.empty()) throw Error(ErrorCode::EmptyData, "merlin needs a non-empty series");
  const auto [lo, hi] = std::minmax_element(closes.begin(), closes.end());
  MerlinRange r;
  r.center = 0.5 * (*lo + *hi);
  r.width = std::max((*hi - *lo) / (2.0 * r.center), kMinMerlinWidth);
  return r;
}

Position Merlin::initialize(const MarketData& market, std::size_t begin, std::size_t end,
                            const PoolConfig& cfg, double capital) const {
  std::vector<double> closes;
  closes.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) closes.push_back(market.price(i));
  const MerlinRange r = merlin_init(closes);
  PoolConfig wide = cfg;
  wide.width = std::min(r.width, 0.999);
  return open_position(r.center, capital, wide);
}

Decision Lancelot::decide(const DecisionContext& ctx) {
  return in_range(ctx.position, ctx.price) ? Decision::hold() : Decision::recenter();
}

GalahadOu::GalahadOu(double horizon_seconds, bool force_zero_theta)
    : horizon_(horizon_seconds), force_zero_theta_(force_zero_theta) {
  if (!(horizon_seconds >= 0)) throw Error(ErrorCode::ConfigError, "horizon must be non-negative");
}

double GalahadOu::forecast(double price, double mu, double theta, double horizon) {
  return mu + (price - mu) * std::exp(-theta * horizon);
}

Decision GalahadOu::decide(const DecisionContext& ctx) {
  if (!force_zero_theta_ && !ctx.regime.valid) return Decision::hold();
  if (in_range(ctx.position, ctx.price)) return Decision::hold();
  const double theta = force_zero_theta_ ? 0.0 : ctx.regime.theta;
  const double mu = force_zero_theta_ ? ctx.price : ctx.regime.mu;
  const double target = forecast(ctx.price, mu, theta, horizon_);
  if (in_range(ctx.position, target) || !(target > 0)) return Decision::hold();
  return target == ctx.price ? Decision::recenter() : Decision::recenter_at(target);
}

QPolicy::QPolicy(Mlp network, bool require_reference_shape) : net_(std::move(network)) {
  const std::vector<int> reference{static_cast<int>(kStateDim), 128, 64, 2};
  const bool ok = require_reference_shape
                      ? net_.layer_dims() == reference
                      : (net_.input_dim() == static_cast<int>(kStateDim) && net_.output_dim() == 2);
  if (!ok) throw Error(ErrorCode::ShapeError, "checkpoint must be an 8-128-64-2 Q-network");
}

Decision QPolicy::decide(const DecisionContext& ctx) {
  const int a = greedy_action(net_.forward(encode_state(ctx.state)));
  return a == kRebalance ? Decision::recenter() : Decision::hold();
}

std::unique_ptr<Strategy> make_strategy(const std::string& name, double galahad_horizon,
                                        const Mlp* network) {
  if (name == "merlin") return std::make_unique<Merlin>();
  if (name == "bedivere") return std::make_unique<Bedivere>();
  if (name == "lancelot") return std::make_unique<Lancelot>();
  if (name == "galahad") return std::make_unique<GalahadOu>(galahad_horizon);
  if (name == "ddqn") {
    if (network == nullptr) throw Error(ErrorCode::ConfigError, "ddqn strategy needs a checkpoint");
    return std::make_unique<QPolicy>(*network);
  }
  throw Error(ErrorCode::ConfigError, "unknown strategy '" + name + "'");
}

}  // namespace lazylp
