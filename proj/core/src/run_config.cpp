#include "lazylp/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "lazylp/csv.hpp"
#include "lazylp/error.hpp"

namespace lazylp {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::ConfigError, path + ": " + what);
}

// Reads keys out of one JSON object and rejects whatever is left unread.
class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(path_, "expected an object");
  }
  Reader(const Reader&) = delete;
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.contains(key)) fail(path_ + "." + key, "unknown key");
    }
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }
  std::string at(const std::string& key) const { return path_ + "." + key; }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(at(key), "expected a number");
      out = v->get<double>();
    }
  }
  template <class Int>
  void integer(const std::string& key, Int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(at(key), "expected an integer");
      if constexpr (std::is_unsigned_v<Int>) {
        if (v->is_number_unsigned()) {
          out = static_cast<Int>(v->get<std::uint64_t>());
        } else {
          const auto x = v->get<std::int64_t>();
          if (x < 0) fail(at(key), "must be non-negative");
          out = static_cast<Int>(x);
        }
      } else {
        out = static_cast<Int>(v->get<std::int64_t>());
      }
    }
  }
  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(at(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void string(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(at(key), "expected a string");
      out = v->get<std::string>();
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

void check(bool ok, const std::string& path, const std::string& what) {
  if (!ok) fail(path, what);
}

OuParams parse_ou(const json& obj, const std::string& path) {
  OuParams ou;
  Reader r(obj, path);
  r.number("theta", ou.theta);
  r.number("mu", ou.mu);
  r.number("sigma", ou.sigma);
  try {
    ou.validate();
  } catch (const Error& e) {
    fail(path, e.what());
  }
  return ou;
}

void parse_data(const json& obj, DataSpec& data) {
  Reader r(obj, "data");
  std::string source = data.source == DataSpec::Source::Synth ? "synth" : "csv";
  r.string("source", source);
  if (source == "synth") {
    data.source = DataSpec::Source::Synth;
  } else if (source == "csv") {
    data.source = DataSpec::Source::Csv;
  } else {
    fail("data.source", "expected \"synth\" or \"csv\"");
  }
  r.string("path", data.path);
  check(data.source != DataSpec::Source::Csv || !data.path.empty(), "data.path",
        "required for csv data");
  r.integer("total_seconds", data.total_seconds);
  check(data.total_seconds >= 0, "data.total_seconds", "must be non-negative");
  if (const json* s = r.find("schedule")) {
    Reader sr(*s, "data.schedule");
    sr.number("initial_price", data.schedule.initial_price);
    sr.integer("start_time", data.schedule.start_time);
    if (const json* v = sr.find("volume")) {
      Reader vr(*v, "data.schedule.volume");
      vr.number("base_notional", data.schedule.volume.base_notional);
      vr.number("volatility_coupling", data.schedule.volume.volatility_coupling);
    }
    if (const json* segs = sr.find("segments")) {
      check(segs->is_array(), "data.schedule.segments", "expected an array");
      data.schedule.segments.clear();
      for (std::size_t i = 0; i < segs->size(); ++i) {
        const std::string path = "data.schedule.segments[" + std::to_string(i) + "]";
        const json& seg = (*segs)[i];
        check(seg.is_object(), path, "expected an object");
        json params = seg;
        RegimeSegment out;
        {
          Reader rr(seg, path);
          rr.integer("duration", out.duration_seconds);
          rr.find("theta"), rr.find("mu"), rr.find("sigma");
        }
        params.erase("duration");
        out.params = parse_ou(params, path);
        data.schedule.segments.push_back(out);
      }
    }
  }
  if (const json* s = r.find("split")) {
    Reader sr(*s, "data.split");
    sr.number("train", data.split.train);
    sr.number("validation", data.split.validation);
    sr.number("test", data.split.test);
  }
  if (data.source == DataSpec::Source::Synth) {
    try {
      data.schedule.validate();
    } catch (const Error& e) {
      fail("data.schedule", e.what());
    }
  }
}

json ou_json(const OuParams& ou) { return {{"theta", ou.theta}, {"mu", ou.mu}, {"sigma", ou.sigma}}; }

json mixed_regime_data(std::int64_t total_seconds) {
  return {
      {"source", "synth"},
      {"path", ""},
      {"total_seconds", total_seconds},
      {"schedule",
       {{"initial_price", 100.0},
        {"start_time", 0},
        {"volume", {{"base_notional", 10'000.0}, {"volatility_coupling", 1.0}}},
        {"segments",
         json::array({{{"duration", 3600}, {"theta", 0.05}, {"mu", 100.0}, {"sigma", 0.05}},
                      {{"duration", 3600}, {"theta", 0.0005}, {"mu", 100.0}, {"sigma", 0.05}}})}}},
      {"split", {{"train", 0.7}, {"validation", 0.15}, {"test", 0.15}}},
  };
}

}  // namespace

json profile_defaults(std::string_view profile) {
  RunConfig cfg;
  json doc = to_json(cfg);
  if (profile == "smoke") {
    doc["profile"] = "smoke";
    doc["data"] = mixed_regime_data(10'000);
    doc["train"]["episodes"] = 20;
    doc["train"]["episode_length"] = 3600;
  } else if (profile == "full") {
    doc["profile"] = "full";
    doc["data"] = mixed_regime_data(864'000);
    doc["train"]["episodes"] = 300;
    doc["train"]["episode_length"] = 36'000;
  } else {
    fail("profile", "expected smoke or full, got \"" + std::string(profile) + "\"");
  }
  return doc;
}

RunConfig parse_run_config(const json& doc) {
  RunConfig cfg;
  Reader r(doc, "config");
  r.string("profile", cfg.profile);
  r.integer("seed", cfg.seed);
  if (const json* v = r.find("data")) parse_data(*v, cfg.data);
  if (const json* v = r.find("pool")) {
    Reader pr(*v, "pool");
    pr.number("fee_tier", cfg.pool.fee_tier);
    pr.number("gas_cost", cfg.pool.gas_cost);
    pr.number("pool_tvl", cfg.pool.pool_tvl);
    pr.number("dex_cex_ratio", cfg.pool.dex_cex_ratio);
    pr.number("width", cfg.pool.width);
  }
  try {
    cfg.pool.validate();
  } catch (const Error& e) {
    fail("pool", e.what());
  }
  r.number("capital", cfg.capital);
  check(cfg.capital > 0, "capital", "must be positive");
  r.integer("regime_window", cfg.regime_window);
  check(cfg.regime_window >= 3, "regime_window", "must be at least 3");
  if (const json* v = r.find("reward")) {
    Reader rr(*v, "reward");
    rr.number("reward_scale", cfg.reward.reward_scale);
    rr.number("active_bonus", cfg.reward.active_bonus);
  }
  if (const json* v = r.find("train")) {
    Reader tr(*v, "train");
    TrainConfig& t = cfg.train;
    tr.number("gamma", t.gamma);
    tr.integer("batch_size", t.batch_size);
    tr.integer("target_sync", t.target_sync);
    tr.integer("episodes", t.episodes);
    tr.integer("episode_length", t.episode_length);
    tr.number("learning_rate", t.learning_rate);
    tr.integer("buffer_capacity", t.buffer_capacity);
    if (const json* h = tr.find("hidden")) {
      check(h->is_array() && !h->empty(), "train.hidden", "expected a non-empty array");
      t.hidden.clear();
      for (const auto& x : *h) {
        check(x.is_number_integer() && x.get<int>() > 0, "train.hidden", "expected positive integers");
        t.hidden.push_back(x.get<int>());
      }
    }
    if (const json* e = tr.find("epsilon")) {
      Reader er(*e, "train.epsilon");
      er.number("start", t.epsilon.start);
      er.number("end", t.epsilon.end);
      er.number("decay", t.epsilon.decay);
      std::string mode = t.epsilon.mode == EpsilonDecay::PerStep ? "per_step" : "per_episode";
      er.string("mode", mode);
      if (mode == "per_step") {
        t.epsilon.mode = EpsilonDecay::PerStep;
      } else if (mode == "per_episode") {
        t.epsilon.mode = EpsilonDecay::PerEpisode;
      } else {
        fail("train.epsilon.mode", "expected per_step or per_episode");
      }
      t.epsilon.reset();
    }
  }
  cfg.train.seed = cfg.seed;
  try {
    cfg.train.validate();
  } catch (const Error& e) {
    fail("train", e.what());
  }
  if (const json* v = r.find("strategy")) {
    Reader sr(*v, "strategy");
    sr.string("name", cfg.strategy.name);
    if (const json* p = sr.find("params")) {
      Reader pr(*p, "strategy.params");
      pr.number("horizon", cfg.strategy.horizon);
    }
  }
  static const std::set<std::string> kNames = {"merlin", "bedivere", "lancelot", "galahad", "ddqn"};
  check(kNames.contains(cfg.strategy.name), "strategy.name", "unknown strategy " + cfg.strategy.name);
  check(cfg.strategy.horizon >= 0, "strategy.params.horizon", "must be non-negative");
  if (const json* v = r.find("checkpoint")) {
    if (!v->is_null()) {
      check(v->is_string(), "checkpoint", "expected a path or null");
      cfg.checkpoint = v->get<std::string>();
    }
  }
  if (const json* v = r.find("backtest")) {
    Reader br(*v, "backtest");
    br.string("segment", cfg.backtest.segment);
    br.boolean("keep_trace", cfg.backtest.keep_trace);
    if (const json* g = br.find("gas_levels")) {
      check(g->is_array() && !g->empty(), "backtest.gas_levels", "expected a non-empty array");
      cfg.backtest.gas_levels.clear();
      for (const auto& x : *g) {
        check(x.is_number() && x.get<double>() > 0, "backtest.gas_levels", "levels must be positive");
        cfg.backtest.gas_levels.push_back(x.get<double>());
      }
    }
    if (const json* s = br.find("strategies")) {
      check(s->is_array() && !s->empty(), "backtest.strategies", "expected a non-empty array");
      cfg.backtest.strategies.clear();
      for (const auto& x : *s) {
        check(x.is_string() && kNames.contains(x.get<std::string>()), "backtest.strategies",
              "unknown strategy name");
        cfg.backtest.strategies.push_back(x.get<std::string>());
      }
    }
  }
  static const std::set<std::string> kSegments = {"train", "validation", "test", "all"};
  check(kSegments.contains(cfg.backtest.segment), "backtest.segment",
        "expected train, validation, test or all");
  if (const json* v = r.find("qvi")) {
    Reader qr(*v, "qvi");
    QviSpec& q = cfg.qvi;
    qr.number("rho", q.rho);
    qr.number("ref_volume", q.ref_volume);
    if (const json* c = qr.find("cost")) {
      if (!c->is_null()) {
        check(c->is_number(), "qvi.cost", "expected a number or null");
        q.cost = c->get<double>();
      }
    }
    if (const json* ou = qr.find("ou")) q.ou = parse_ou(*ou, "qvi.ou");
    qr.integer("n_s", q.n_s);
    qr.integer("n_c", q.n_c);
    qr.number("span_sd", q.span_sd);
    qr.number("tol", q.tol);
    qr.integer("max_iters", q.max_iters);
    check(q.rho > 0, "qvi.rho", "must be positive");
    check(q.ref_volume >= 0, "qvi.ref_volume", "must be non-negative");
    check(!q.cost || *q.cost >= 0, "qvi.cost", "must be non-negative");
    check(q.n_s >= 3 && q.n_c >= 3, "qvi", "grids need at least 3 points");
    check(q.span_sd >= 5, "qvi.span_sd", "grid must span at least 5 stationary deviations");
    check(q.tol > 0 && q.max_iters > 0, "qvi", "tol and max_iters must be positive");
  }
  if (const json* v = r.find("heatmap")) {
    Reader hr(*v, "heatmap");
    HeatmapSpec& h = cfg.heatmap;
    hr.number("theta_min", h.theta_min);
    hr.number("theta_max", h.theta_max);
    hr.integer("n_theta", h.n_theta);
    hr.number("d_edge_min", h.d_edge_min);
    hr.number("d_edge_max", h.d_edge_max);
    hr.integer("n_d_edge", h.n_d_edge);
    check(h.n_theta >= 2 && h.n_d_edge >= 2, "heatmap", "axes need at least 2 points");
    check(h.theta_max > h.theta_min && h.d_edge_max > h.d_edge_min, "heatmap",
          "axes must be increasing");
  }
  return cfg;
}

json to_json(const RunConfig& cfg) {
  json segments = json::array();
  for (const auto& s : cfg.data.schedule.segments) {
    json seg = ou_json(s.params);
    seg["duration"] = s.duration_seconds;
    segments.push_back(seg);
  }
  const auto& t = cfg.train;
  return {
      {"profile", cfg.profile},
      {"seed", cfg.seed},
      {"data",
       {{"source", cfg.data.source == DataSpec::Source::Synth ? "synth" : "csv"},
        {"path", cfg.data.path},
        {"total_seconds", cfg.data.total_seconds},
        {"schedule",
         {{"initial_price", cfg.data.schedule.initial_price},
          {"start_time", cfg.data.schedule.start_time},
          {"volume",
           {{"base_notional", cfg.data.schedule.volume.base_notional},
            {"volatility_coupling", cfg.data.schedule.volume.volatility_coupling}}},
          {"segments", segments}}},
        {"split",
         {{"train", cfg.data.split.train},
          {"validation", cfg.data.split.validation},
          {"test", cfg.data.split.test}}}}},
      {"pool",
       {{"fee_tier", cfg.pool.fee_tier},
        {"gas_cost", cfg.pool.gas_cost},
        {"pool_tvl", cfg.pool.pool_tvl},
        {"dex_cex_ratio", cfg.pool.dex_cex_ratio},
        {"width", cfg.pool.width}}},
      {"capital", cfg.capital},
      {"regime_window", cfg.regime_window},
      {"reward", {{"reward_scale", cfg.reward.reward_scale}, {"active_bonus", cfg.reward.active_bonus}}},
      {"train",
       {{"gamma", t.gamma},
        {"batch_size", t.batch_size},
        {"target_sync", t.target_sync},
        {"episodes", t.episodes},
        {"episode_length", t.episode_length},
        {"learning_rate", t.learning_rate},
        {"buffer_capacity", t.buffer_capacity},
        {"hidden", t.hidden},
        {"epsilon",
         {{"start", t.epsilon.start},
          {"end", t.epsilon.end},
          {"decay", t.epsilon.decay},
          {"mode", t.epsilon.mode == EpsilonDecay::PerStep ? "per_step" : "per_episode"}}}}},
      {"strategy", {{"name", cfg.strategy.name}, {"params", {{"horizon", cfg.strategy.horizon}}}}},
      {"checkpoint", cfg.checkpoint ? json(*cfg.checkpoint) : json(nullptr)},
      {"backtest",
       {{"segment", cfg.backtest.segment},
        {"gas_levels", cfg.backtest.gas_levels},
        {"strategies", cfg.backtest.strategies},
        {"keep_trace", cfg.backtest.keep_trace}}},
      {"qvi",
       {{"rho", cfg.qvi.rho},
        {"ref_volume", cfg.qvi.ref_volume},
        {"cost", cfg.qvi.cost ? json(*cfg.qvi.cost) : json(nullptr)},
        {"ou", ou_json(cfg.qvi.ou)},
        {"n_s", cfg.qvi.n_s},
        {"n_c", cfg.qvi.n_c},
        {"span_sd", cfg.qvi.span_sd},
        {"tol", cfg.qvi.tol},
        {"max_iters", cfg.qvi.max_iters}}},
      {"heatmap",
       {{"theta_min", cfg.heatmap.theta_min},
        {"theta_max", cfg.heatmap.theta_max},
        {"n_theta", cfg.heatmap.n_theta},
        {"d_edge_min", cfg.heatmap.d_edge_min},
        {"d_edge_max", cfg.heatmap.d_edge_max},
        {"n_d_edge", cfg.heatmap.n_d_edge}}},
  };
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& file,
                          std::string_view profile, const json& overrides) {
  json doc = profile_defaults(profile);
  if (file) {
    std::ifstream in(*file);
    if (!in) fail("--config", "cannot open " + file->string());
    json patch;
    try {
      patch = json::parse(in);
    } catch (const json::parse_error& e) {
      fail(file->string(), e.what());
    }
    if (!patch.is_object()) fail(file->string(), "top level must be an object");
    // Arrays replace wholesale; objects merge key by key.
    doc.merge_patch(patch);
  }
  doc.merge_patch(overrides);
  return parse_run_config(doc);
}

std::string config_hash(const RunConfig& cfg) {
  const std::string text = to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

BarSeries load_bars(const RunConfig& cfg) {
  BarSeries series;
  if (cfg.data.source == DataSpec::Source::Synth) {
    RegimeSchedule schedule = cfg.data.schedule;
    if (cfg.data.total_seconds > 0) {
      schedule.segments.clear();
      std::int64_t remaining = cfg.data.total_seconds;
      for (std::size_t i = 0; remaining > 0; i = (i + 1) % cfg.data.schedule.segments.size()) {
        RegimeSegment seg = cfg.data.schedule.segments[i];
        seg.duration_seconds = std::min(seg.duration_seconds, remaining);
        remaining -= seg.duration_seconds;
        schedule.segments.push_back(seg);
      }
    }
    series = simulate_schedule(schedule, cfg.seed);
  } else {
    const csv::Table head = [&] {
      std::ifstream in(cfg.data.path);
      if (!in) throw Error(ErrorCode::IoError, "cannot open " + cfg.data.path);
      std::string line;
      std::getline(in, line);
      std::istringstream first(line + "\n");
      return csv::parse(first);
    }();
    if (!head.header.empty() && head.header.front() == "timestamp_ms") {
      series = aggregate(read_trades_csv(cfg.data.path));
    } else {
      series = read_bars_csv(cfg.data.path);
    }
  }
  return split(std::move(series), cfg.data.split);
}

std::pair<std::size_t, std::size_t> segment_bounds(const BarSeries& series, std::string_view name) {
  const auto [train_end, validation_end] = series.split_marks();
  if (name == "train") return {0, train_end};
  if (name == "validation") return {train_end, validation_end};
  if (name == "test") return {validation_end, series.size()};
  if (name == "all") return {0, series.size()};
  throw Error(ErrorCode::ConfigError, "unknown segment " + std::string(name));
}

}  // namespace lazylp
