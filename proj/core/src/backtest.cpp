#include "lazylp/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lazylp/agent.hpp"
#include "lazylp/csv.hpp"
#include "lazylp/error.hpp"
#include "lazylp/parallel.hpp"

namespace lazylp {

BacktestReport run_backtest(Strategy& strategy, const MarketData& market, std::size_t begin,
                            std::size_t end, const BacktestOptions& opts) {
  if (end > market.size()) throw Error(ErrorCode::DomainError, "backtest range out of bounds");
  if (begin >= end) throw Error(ErrorCode::EmptyData, "empty backtest segment");
  opts.pool.validate();

  Position pos = strategy.initialize(market, begin, end, opts.pool, opts.capital);
  BacktestReport report;
  report.strategy = strategy.name();
  report.capital = opts.capital;
  const double initial_gas = pos.accrued_gas;

  for (std::size_t i = begin; i < end; ++i) {
    const double price = market.price(i);
    const AgentState state = build_state(price, pos, market.regime[i], market.recent_vol[i]);
    const DecisionContext ctx{market, i, price, pos, market.regime[i], state};
    const Decision d = strategy.decide(ctx);

    const double gas_before = pos.accrued_gas;
    const double old_center = pos.center;
    switch (d.kind) {
      case Decision::Kind::Hold:
        break;
      case Decision::Kind::Recenter:
        recenter(pos, price, opts.pool);
        break;
      case Decision::Kind::RecenterAt:
        recenter(pos, d.price, opts.pool);
        break;
      case Decision::Kind::SetRange:
        if (!(d.width > 0 && d.width < 1)) throw Error(ErrorCode::DomainError, "bad range width");
        recenter(pos, d.price, opts.pool);
        pos.width = d.width;
        break;
    }
    const bool acted = d.kind != Decision::Kind::Hold;
    if (acted) report.rebalances.push_back({i, price, old_center, std::abs(price / old_center - 1.0)});

    const double fee = fee_step(pos, price, market.volume(i), opts.pool);
    if (opts.keep_trace) {
      // The first row also carries the initial placement charge.
      const double step_gas = pos.accrued_gas - gas_before + (i == begin ? initial_gas : 0.0);
      report.trace.push_back({market.series[i].t, price, pos.center, acted ? 1 : 0, fee, step_gas,
                              fee - step_gas, state.theta, in_range(pos, price)});
    }
  }

  report.seconds = end - begin;
  report.active_fraction = static_cast<double>(pos.active_seconds) /
                           static_cast<double>(std::max<std::int64_t>(pos.total_seconds, 1));
  report.normalized_liquidity = concentration(pos.width);
  report.rebalance_count = pos.rebalance_count;
  report.total_fees = pos.accrued_fees;
  report.total_gas = pos.accrued_gas;
  report.net_roi = net_roi(pos);
  return report;
}

nlohmann::json report_to_json(const BacktestReport& r, const std::string& config_hash,
                              const std::string& trace_path) {
  nlohmann::json doc;
  doc["strategy"] = r.strategy;
  doc["config_hash"] = config_hash;
  doc["metrics"] = {{"active_frac", r.active_fraction}, {"lambda", r.normalized_liquidity},
                    {"rebalances", r.rebalance_count},  {"fees", r.total_fees},
                    {"gas", r.total_gas},               {"net_roi", r.net_roi}};
  doc["trace_path"] = trace_path;
  doc["capital"] = r.capital;
  doc["seconds"] = r.seconds;
  return doc;
}

double break_even_gas(const std::vector<double>& gas, const std::vector<double>& roi,
                      bool* extrapolated) {
  if (gas.size() != roi.size() || gas.size() < 2) {
    throw Error(ErrorCode::DomainError, "break-even needs at least two sweep levels");
  }
  auto interpolate = [&](std::size_t a, std::size_t b) {
    const double slope = (roi[b] - roi[a]) / (gas[b] - gas[a]);
    if (slope == 0) return std::numeric_limits<double>::infinity();
    return gas[a] - roi[a] / slope;
  };
  for (std::size_t k = 0; k + 1 < gas.size(); ++k) {
    if ((roi[k] >= 0) != (roi[k + 1] >= 0)) {
      if (extrapolated) *extrapolated = false;
      return interpolate(k, k + 1);
    }
  }
  if (extrapolated) *extrapolated = true;
  return roi.front() < 0 ? interpolate(0, 1) : interpolate(gas.size() - 2, gas.size() - 1);
}

GasSweepTable gas_sweep(const std::vector<StrategyFactory>& strategies, const MarketData& market,
                        std::size_t begin, std::size_t end, const BacktestOptions& base,
                        const std::vector<double>& gas_levels) {
  for (double g : gas_levels) {
    if (!(g > 0)) throw Error(ErrorCode::DomainError, "gas levels must be positive");
  }
  GasSweepTable table;
  table.gas_levels = gas_levels;
  const std::size_t ns = strategies.size(), ng = gas_levels.size();
  table.net_roi.assign(ns, std::vector<double>(ng));
  table.rebalances.assign(ns, std::vector<std::int64_t>(ng));
  table.strategies.resize(ns);

  parallel_for(ns * ng, [&](std::size_t cell) {
    const std::size_t s = cell / ng, g = cell % ng;
    auto strategy = strategies[s]();
    BacktestOptions opts = base;
    opts.keep_trace = false;
    opts.pool.gas_cost = gas_levels[g];
    const BacktestReport r = run_backtest(*strategy, market, begin, end, opts);
    table.net_roi[s][g] = r.net_roi;
    table.rebalances[s][g] = r.rebalance_count;
    if (g == 0) table.strategies[s] = r.strategy;
  });

  for (std::size_t s = 0; s < ns; ++s) {
    bool extrapolated = false;
    table.break_even.push_back(ng >= 2 ? break_even_gas(gas_levels, table.net_roi[s], &extrapolated)
                                       : std::numeric_limits<double>::quiet_NaN());
    table.break_even_extrapolated.push_back(extrapolated);
  }
  return table;
}

void write_gas_sweep_csv(const std::filesystem::path& path, const GasSweepTable& table) {
  auto out = csv::open_for_write(path);
  out << "gas,strategy,net_roi\n";
  for (std::size_t g = 0; g < table.gas_levels.size(); ++g) {
    for (std::size_t s = 0; s < table.strategies.size(); ++s) {
      out << csv::format(table.gas_levels[g]) << ',' << table.strategies[s] << ','
          << csv::format(table.net_roi[s][g]) << '\n';
    }
  }
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return out;
}

namespace {
double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  return 0.5 * (upper + *std::max_element(v.begin(), mid));
}
}  // namespace

HeatmapReference heatmap_reference(const MarketData& market, std::size_t begin, std::size_t end,
                                   double width) {
  if (begin >= end || end > market.size()) throw Error(ErrorCode::DomainError, "bad reference range");
  std::vector<double> sig, vol;
  for (std::size_t i = begin; i < end; ++i) {
    sig.push_back(std::clamp(market.regime[i].sigma / market.price(i), 0.0, kSigmaNormCap));
    vol.push_back(market.recent_vol[i]);
  }
  return {.width = width, .sigma_norm = median(sig), .recent_vol = median(vol), .active_frac = 0.5};
}

HeatmapGrid heatmap(const Mlp& net, const std::vector<double>& theta_axis,
                    const std::vector<double>& d_edge_axis, const HeatmapReference& ref) {
  if (net.input_dim() != static_cast<int>(kStateDim) || net.output_dim() != 2) {
    throw Error(ErrorCode::ShapeError, "heatmap needs an 8-input, 2-output Q-network");
  }
  HeatmapGrid grid{theta_axis, d_edge_axis, {}, ref};
  Eigen::MatrixXd batch(kStateDim, static_cast<Eigen::Index>(theta_axis.size() * d_edge_axis.size()));
  Eigen::Index col = 0;
  for (double theta : theta_axis) {
    for (double edge : d_edge_axis) {
      AgentState s;
      s.delta_p = edge * ref.width;
      s.d_edge = std::clamp(edge, -1.0, 1.0);
      s.theta = theta;
      s.delta_mu = 0.0;
      s.sigma_norm = ref.sigma_norm;
      s.active_frac = ref.active_frac;
      s.recent_vol = ref.recent_vol;
      s.in_range_flag = std::abs(edge) < 1.0 ? 1.0 : 0.0;
      encode_state_into(s, batch.col(col++));
    }
  }
  const Eigen::MatrixXd q = net.forward_batch(batch);
  grid.q_diff.resize(static_cast<std::size_t>(q.cols()));
  for (Eigen::Index i = 0; i < q.cols(); ++i) grid.q_diff[static_cast<std::size_t>(i)] = q(1, i) - q(0, i);
  return grid;
}

void write_heatmap_csv(const std::filesystem::path& path, const HeatmapGrid& grid) {
  auto out = csv::open_for_write(path);
  out << "theta,d_edge,q_diff\n";
  for (std::size_t i = 0; i < grid.theta_axis.size(); ++i) {
    for (std::size_t j = 0; j < grid.d_edge_axis.size(); ++j) {
      out << csv::format(grid.theta_axis[i]) << ',' << csv::format(grid.d_edge_axis[j]) << ','
          << csv::format(grid.at(i, j)) << '\n';
    }
  }
}

}  // namespace lazylp
