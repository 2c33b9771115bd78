#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lazylp/agent.hpp"
#include "lazylp/backtest.hpp"
#include "lazylp/csv.hpp"
#include "lazylp/error.hpp"
#include "lazylp/qvi.hpp"
#include "lazylp/regime.hpp"
#include "lazylp/run_config.hpp"
#include "lazylp/strategies.hpp"

namespace lazylp::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Flags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<std::string> strategy;
  std::optional<std::string> checkpoint;
  std::optional<std::string> data;
  std::string profile = "smoke";
};

void add_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "Run-config JSON, merged over the profile defaults")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Seed for every random draw (overrides the config)");
  cmd->add_option("--out", f.out, "Output directory; nothing is written elsewhere");
  cmd->add_option("--strategy", f.strategy, "merlin | bedivere | lancelot | galahad | ddqn");
  cmd->add_option("--checkpoint", f.checkpoint, "Q-network checkpoint JSON");
  cmd->add_option("--data", f.data, "Trades or bars CSV replacing the configured data source");
  cmd->add_option("--profile", f.profile, "Built-in defaults")->check(CLI::IsMember({"smoke", "full"}));
}

RunConfig resolve(const Flags& f) {
  json overrides = json::object();
  if (f.seed) overrides["seed"] = *f.seed;
  if (f.strategy) overrides["strategy"]["name"] = *f.strategy;
  if (f.checkpoint) overrides["checkpoint"] = *f.checkpoint;
  if (f.data) overrides["data"] = {{"source", "csv"}, {"path", *f.data}};
  std::optional<fs::path> file;
  if (f.config) file = *f.config;
  return load_run_config(file, f.profile, overrides);
}

// Records the command, resolved config and produced files next to the artifacts;
// CSV artifacts carry their config hash through this file.
class Outputs {
 public:
  Outputs(std::string command, const RunConfig& cfg, fs::path dir)
      : command_(std::move(command)), cfg_(cfg), hash_(config_hash(cfg)), dir_(std::move(dir)) {
    fs::create_directories(dir_);
  }

  const std::string& hash() const { return hash_; }
  fs::path file(const std::string& name) {
    files_.push_back(name);
    return dir_ / name;
  }
  void finish(json extra = json::object()) {
    json manifest = {{"command", command_},
                     {"config_hash", hash_},
                     {"artifacts", files_},
                     {"config", to_json(cfg_)}};
    for (auto& [k, v] : extra.items()) manifest[k] = v;
    std::ofstream out(dir_ / (command_ + ".manifest.json"));
    out << manifest.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "cannot write manifest in " + dir_.string());
  }

 private:
  std::string command_;
  const RunConfig& cfg_;
  std::string hash_;
  fs::path dir_;
  std::vector<std::string> files_;
};

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  out << doc.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

Mlp require_network(const RunConfig& cfg) {
  if (!cfg.checkpoint) throw Error(ErrorCode::ConfigError, "this command needs --checkpoint");
  return load_checkpoint(*cfg.checkpoint);
}

std::shared_ptr<const MarketData> market_for(const RunConfig& cfg) {
  return make_market_data(load_bars(cfg), cfg.regime_window);
}

int cmd_ingest(const Flags& f, std::ostream& out) {
  const RunConfig cfg = resolve(f);
  if (cfg.data.source != DataSpec::Source::Csv) {
    throw Error(ErrorCode::ConfigError, "ingest needs a trades CSV (--data or data.path)");
  }
  const BarSeries bars = aggregate(read_trades_csv(cfg.data.path));
  Outputs o("ingest", cfg, f.out);
  write_bars_csv(o.file("bars.csv"), bars.bars());
  o.finish({{"bars", bars.size()}});
  out << "ingest: " << bars.size() << " bars -> " << (fs::path(f.out) / "bars.csv").string() << '\n';
  return kOk;
}

int cmd_synth(const Flags& f, std::ostream& out) {
  const RunConfig cfg = resolve(f);
  if (cfg.data.source != DataSpec::Source::Synth) {
    throw Error(ErrorCode::ConfigError, "synth needs data.source = \"synth\"");
  }
  const BarSeries bars = load_bars(cfg);
  Outputs o("synth", cfg, f.out);
  write_bars_csv(o.file("bars.csv"), bars.bars());
  o.finish({{"bars", bars.size()}});
  out << "synth: " << bars.size() << " bars\n";
  return kOk;
}

int cmd_estimate(const Flags& f, std::ostream& out) {
  const RunConfig cfg = resolve(f);
  const BarSeries bars = load_bars(cfg);
  const std::vector<double> closes = bars.closes();
  const auto estimates = estimate_series(closes, cfg.regime_window);
  Outputs o("estimate", cfg, f.out);
  auto csv_out = csv::open_for_write(o.file("regime.csv"));
  csv_out << "t,theta,mu,sigma,half_life,valid\n";
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const RegimeEstimate& e = estimates[i];
    const auto hl = half_life(e);
    csv_out << bars[i].t << ',' << csv::format(e.theta) << ',' << csv::format(e.mu) << ','
            << csv::format(e.sigma) << ',' << (hl ? csv::format(*hl) : std::string("inf")) << ','
            << (e.valid ? 1 : 0) << '\n';
  }
  csv_out.close();
  o.finish({{"rows", bars.size()}});
  out << "estimate: " << bars.size() << " rows\n";
  return kOk;
}

int cmd_train(const Flags& f, std::ostream& out) {
  const RunConfig cfg = resolve(f);
  const auto market = market_for(cfg);
  const auto [begin, end] = segment_bounds(market->series, "train");
  EnvConfig env_cfg;
  env_cfg.pool = cfg.pool;
  env_cfg.capital = cfg.capital;
  env_cfg.reward = cfg.reward;
  env_cfg.episode_length = cfg.train.episode_length;
  env_cfg.begin = begin;
  env_cfg.end = end;
  Environment env(market, env_cfg);
  const TrainResult result = train(env, cfg.train);

  Outputs o("train", cfg, f.out);
  const CheckpointMeta meta{cfg.seed, result.train_steps, o.hash()};
  save_checkpoint(o.file("checkpoint.json").string(), result.network, meta);
  write_training_log_csv(o.file("training_log.csv"), result.log);
  o.finish({{"train_steps", result.train_steps}});
  out << "train: " << result.log.size() << " episodes, " << result.train_steps << " updates\n";
  return kOk;
}

int cmd_backtest(const Flags& f, std::ostream& out) {
  const RunConfig cfg = resolve(f);
  std::optional<Mlp> net;
  if (cfg.strategy.name == "ddqn") net = require_network(cfg);
  auto strategy = make_strategy(cfg.strategy.name, cfg.strategy.horizon, net ? &*net : nullptr);
  const auto market = market_for(cfg);
  const auto [begin, end] = segment_bounds(market->series, cfg.backtest.segment);
  BacktestOptions opts{cfg.pool, cfg.capital, cfg.backtest.keep_trace};
  const BacktestReport report = run_backtest(*strategy, *market, begin, end, opts);

  Outputs o("backtest", cfg, f.out);
  std::string trace_name;
  if (cfg.backtest.keep_trace) {
    trace_name = "trace.csv";
    write_trace_csv(o.file(trace_name), report.trace);
  }
  write_json(o.file("report.json"), report_to_json(report, o.hash(), trace_name));
  o.finish();
  out << "backtest: " << report.strategy << " rebalances=" << report.rebalance_count
      << " active_frac=" << report.active_fraction << " net_roi=" << report.net_roi << '\n';
  return kOk;
}

int cmd_sweep_gas(const Flags& f, std::ostream& out) {
  const RunConfig cfg = resolve(f);
  std::vector<std::string> names = cfg.backtest.strategies;
  std::optional<Mlp> net;
  if (cfg.checkpoint) {
    net = load_checkpoint(*cfg.checkpoint);
    if (std::find(names.begin(), names.end(), "ddqn") == names.end()) names.push_back("ddqn");
  } else if (std::find(names.begin(), names.end(), "ddqn") != names.end()) {
    throw Error(ErrorCode::ConfigError, "ddqn in backtest.strategies needs --checkpoint");
  }
  std::vector<StrategyFactory> factories;
  for (const auto& name : names) {
    const Mlp* p = net ? &*net : nullptr;
    const double horizon = cfg.strategy.horizon;
    factories.push_back([name, p, horizon] { return make_strategy(name, horizon, p); });
  }
  const auto market = market_for(cfg);
  const auto [begin, end] = segment_bounds(market->series, cfg.backtest.segment);
  BacktestOptions opts{cfg.pool, cfg.capital, false};
  const GasSweepTable table = gas_sweep(factories, *market, begin, end, opts, cfg.backtest.gas_levels);

  Outputs o("sweep-gas", cfg, f.out);
  write_gas_sweep_csv(o.file("gas_sweep.csv"), table);
  auto be = csv::open_for_write(o.file("break_even.csv"));
  be << "strategy,break_even_gas,extrapolated\n";
  for (std::size_t s = 0; s < table.strategies.size(); ++s) {
    be << table.strategies[s] << ',' << csv::format(table.break_even[s]) << ','
       << (table.break_even_extrapolated[s] ? 1 : 0) << '\n';
    out << "sweep-gas: " << table.strategies[s] << " break-even " << table.break_even[s] << '\n';
  }
  be.close();
  o.finish();
  return kOk;
}

int cmd_qvi(const Flags& f, std::ostream& out) {
  const RunConfig cfg = resolve(f);
  const QviSpec& q = cfg.qvi;
  const double fee = reference_fee_rate(cfg.pool, cfg.capital, q.ref_volume);
  const double cost = q.cost.value_or(rebalance_cost(cfg.pool, cfg.capital));
  const QviProblem problem =
      make_qvi_problem(q.ou, q.rho, fee, cfg.pool.width, cost, q.n_s, q.n_c, q.span_sd);
  const QviSolution sol = solve_qvi(problem, q.tol, q.max_iters);
  const QviResiduals res = qvi_residuals(sol);

  Outputs o("qvi", cfg, f.out);
  write_qvi_solution_csv(o.file("qvi_solution.csv"), sol);
  write_qvi_boundary_csv(o.file("qvi_boundary.csv"), sol);
  const BoundaryPoint at_mu = boundary_deviation(sol, q.ou.mu);
  auto dev = [](const std::optional<double>& d) { return d ? json(*d) : json(nullptr); };
  write_json(o.file("qvi_summary.json"),
             {{"config_hash", o.hash()},
              {"converged", sol.converged},
              {"iterations", sol.iterations},
              {"last_change", sol.last_change},
              {"fee_rate", fee},
              {"cost", cost},
              {"max_obstacle_violation", res.max_obstacle_violation},
              {"max_complementarity", res.max_complementarity},
              {"jump_region_empty", sol.jump_region_empty()},
              {"boundary_at_mu", {{"c", at_mu.c}, {"lower_dev", dev(at_mu.lower_dev)}, {"upper_dev", dev(at_mu.upper_dev)}}}});
  o.finish();
  out << "qvi: " << (sol.converged ? "converged" : "NOT converged") << " after " << sol.iterations
      << " passes, complementarity " << res.max_complementarity << '\n';
  if (!sol.converged) throw std::runtime_error("NoConvergence: last iterate written");
  return kOk;
}

int cmd_heatmap(const Flags& f, std::ostream& out) {
  const RunConfig cfg = resolve(f);
  const Mlp net = require_network(cfg);
  const auto market = market_for(cfg);
  const auto [begin, end] = segment_bounds(market->series, cfg.backtest.segment);
  const HeatmapSpec& h = cfg.heatmap;
  const HeatmapGrid grid =
      heatmap(net, linspace(h.theta_min, h.theta_max, h.n_theta),
              linspace(h.d_edge_min, h.d_edge_max, h.n_d_edge),
              heatmap_reference(*market, begin, end, cfg.pool.width));
  const auto negative = std::count_if(grid.q_diff.begin(), grid.q_diff.end(), [](double v) { return v < 0; });
  const double hold_share = static_cast<double>(negative) / static_cast<double>(grid.q_diff.size());

  Outputs o("heatmap", cfg, f.out);
  write_heatmap_csv(o.file("heatmap.csv"), grid);
  write_json(o.file("heatmap_meta.json"),
             {{"config_hash", o.hash()},
              {"hold_share", hold_share},
              {"reference",
               {{"width", grid.reference.width},
                {"sigma_norm", grid.reference.sigma_norm},
                {"recent_vol", grid.reference.recent_vol},
                {"active_frac", grid.reference.active_frac},
                {"delta_mu", 0.0},
                {"delta_p", "d_edge * width"},
                {"in_range_flag", "|d_edge| < 1"}}}});
  o.finish();
  out << "heatmap: " << grid.q_diff.size() << " cells, hold-dominant share " << hold_share << '\n';
  return kOk;
}

bool is_validation(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::DomainError:
    case ErrorCode::ShapeError:
    case ErrorCode::WindowTooShort:
      return true;
    default:
      return false;
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Backtesting lab for lazy concentrated-liquidity management"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  using Handler = int (*)(const Flags&, std::ostream&);
  struct Command {
    const char* name;
    const char* help;
    Handler handler;
  };
  const Command commands[] = {
      {"ingest", "Aggregate a trades CSV into 1-second bars", cmd_ingest},
      {"synth", "Simulate bars from the configured regime schedule", cmd_synth},
      {"estimate", "Rolling OU fit per bar", cmd_estimate},
      {"train", "Train the Double-DQN agent", cmd_train},
      {"backtest", "Run one strategy over a data segment", cmd_backtest},
      {"sweep-gas", "Net ROI per strategy and gas level, with break-even gas", cmd_sweep_gas},
      {"qvi", "Solve the impulse-control QVI oracle", cmd_qvi},
      {"heatmap", "Q(rebalance) - Q(hold) over theta x d_edge", cmd_heatmap},
  };
  Flags flags;
  std::vector<std::pair<CLI::App*, Handler>> subs;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    add_flags(sub, flags);
    subs.emplace_back(sub, c.handler);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kValidationError;
  }

  for (const auto& [sub, handler] : subs) {
    if (!sub->parsed()) continue;
    try {
      return handler(flags, out);
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
      return is_validation(e.code()) ? kValidationError : kRuntimeError;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kRuntimeError;
    }
  }
  return kValidationError;
}

}  // namespace lazylp::cli
