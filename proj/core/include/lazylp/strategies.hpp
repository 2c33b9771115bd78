#pragma once

#include <memory>
#include <span>
#include <string>

#include "lazylp/ammcore.hpp"
#include "lazylp/envsim.hpp"
#include "lazylp/neural.hpp"

namespace lazylp {

struct Decision {
  enum class Kind { Hold, Recenter, RecenterAt, SetRange };
  Kind kind = Kind::Hold;
  double price = 0.0;  // RecenterAt / SetRange center
  double width = 0.0;  // SetRange only

  static Decision hold() { return {}; }
  static Decision recenter() { return {Kind::Recenter}; }
  static Decision recenter_at(double p) { return {Kind::RecenterAt, p}; }
  static Decision set_range(double c, double w) { return {Kind::SetRange, c, w}; }
};

// What a strategy may look at when deciding at bar `index`: the market up to
// and including that bar (causal features included), the live position and
// the observation vector the learned policy would see.
struct DecisionContext {
  const MarketData& market;
  std::size_t index = 0;
  double price = 0.0;
  const Position& position;
  const RegimeEstimate& regime;
  const AgentState& state;
};

class Strategy {
 public:
  virtual ~Strategy() = default;
  virtual std::string name() const = 0;

  // Opens the position at the first bar of [begin, end). Only oracle
  // strategies may read past `begin`.
  virtual Position initialize(const MarketData& market, std::size_t begin, std::size_t end,
                              const PoolConfig& cfg, double capital) const;
  virtual Decision decide(const DecisionContext& ctx) = 0;
  virtual bool oracle() const { return false; }
};

struct MerlinRange {
  double center = 0.0;
  double width = 0.0;
};

inline constexpr double kMinMerlinWidth = 1e-4;

// Range spanning [min, max] of the closes, width clamped at kMinMerlinWidth.
MerlinRange merlin_init(std::span<const double> closes);

// Omniscient passive range chosen from the whole evaluation segment.
class Merlin final : public Strategy {
 public:
  std::string name() const override { return "merlin"; }
  Position initialize(const MarketData& market, std::size_t begin, std::size_t end,
                      const PoolConfig& cfg, double capital) const override;
  Decision decide(const DecisionContext&) override { return Decision::hold(); }
  bool oracle() const override { return true; }
};

// Fixed narrow range at the first price, never touched.
class Bedivere final : public Strategy {
 public:
  std::string name() const override { return "bedivere"; }
  Decision decide(const DecisionContext&) override { return Decision::hold(); }
};

// Recenter whenever the price leaves the range.
class Lancelot final : public Strategy {
 public:
  std::string name() const override { return "lancelot"; }
  Decision decide(const DecisionContext& ctx) override;
};

// Forecast-driven, cost-blind recentering: predicts mu + (S - mu) e^{-theta H}
// and moves the range there when the price is out of range and the forecast
// also falls outside the current range.
class GalahadOu final : public Strategy {
 public:
  explicit GalahadOu(double horizon_seconds = 60.0, bool force_zero_theta = false);
  std::string name() const override { return "galahad"; }
  Decision decide(const DecisionContext& ctx) override;

  static double forecast(double price, double mu, double theta, double horizon);

 private:
  double horizon_;
  bool force_zero_theta_;
};

// Greedy action of a frozen Q-network; ties hold.
class QPolicy final : public Strategy {
 public:
  explicit QPolicy(Mlp network, bool require_reference_shape = true);
  std::string name() const override { return "ddqn"; }
  Decision decide(const DecisionContext& ctx) override;
  const Mlp& network() const noexcept { return net_; }

 private:
  Mlp net_;
};

// Names: merlin, bedivere, lancelot, galahad, ddqn. `ddqn` needs a network.
std::unique_ptr<Strategy> make_strategy(const std::string& name, double galahad_horizon = 60.0,
                                        const Mlp* network = nullptr);

}  // namespace lazylp
