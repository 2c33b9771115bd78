#include "lazylp/envsim.hpp"

#include <algorithm>
#include <cmath>

#include "lazylp/csv.hpp"
#include "lazylp/error.hpp"

namespace lazylp {

std::array<double, kStateDim> AgentState::to_array() const {
  return {delta_p, d_edge, theta, delta_mu, sigma_norm, active_frac, recent_vol, in_range_flag};
}

double edge_distance(const Position& pos, double s) {
  const double offset = edge_offset(pos, s);
  if (!in_range(pos, s) || std::abs(std::abs(offset) - 1.0) <= 1e-12) {
    return offset > 0 ? 1.0 : -1.0;
  }
  return offset;
}

AgentState build_state(double price, const Position& pos, const RegimeEstimate& est,
                       double recent_vol) {
  AgentState s;
  s.delta_p = price / pos.center - 1.0;
  s.d_edge = edge_distance(pos, price);
  s.theta = est.valid ? std::clamp(est.theta, 0.0, 1.0) : 0.0;
  s.delta_mu = est.valid ? (est.mu - price) / price : 0.0;
  s.sigma_norm = std::clamp(est.sigma / price, 0.0, kSigmaNormCap);
  s.active_frac = static_cast<double>(pos.active_seconds) /
                  static_cast<double>(std::max<std::int64_t>(pos.total_seconds, 1));
  s.recent_vol = std::clamp(recent_vol, 0.0, kRecentVolCap);
  s.in_range_flag = in_range(pos, price) ? 1.0 : 0.0;
  return s;
}

std::vector<double> recent_volatility(std::span<const double> closes, std::size_t window) {
  std::vector<double> out(closes.size(), 0.0);
  if (window < 2) return out;
  std::vector<double> returns(closes.size(), 0.0);
  for (std::size_t i = 1; i < closes.size(); ++i) returns[i] = std::log(closes[i] / closes[i - 1]);
  double sum = 0.0, sum_sq = 0.0;
  std::size_t since_rebuild = 0;
  for (std::size_t i = 1; i < closes.size(); ++i) {
    sum += returns[i];
    sum_sq += returns[i] * returns[i];
    if (i > window) {
      sum -= returns[i - window];
      sum_sq -= returns[i - window] * returns[i - window];
    }
    const std::size_t first = i > window ? i - window + 1 : 1;
    if (++since_rebuild >= window) {
      sum = sum_sq = 0.0;
      for (std::size_t j = first; j <= i; ++j) {
        sum += returns[j];
        sum_sq += returns[j] * returns[j];
      }
      since_rebuild = 0;
    }
    const double n = static_cast<double>(i - first + 1);
    if (n < 2) continue;
    const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0));
    out[i] = std::min(std::sqrt(var), kRecentVolCap);
  }
  return out;
}

std::shared_ptr<const MarketData> make_market_data(BarSeries series, std::size_t regime_window,
                                                   std::size_t vol_window) {
  if (series.empty()) throw Error(ErrorCode::EmptyData, "no bars");
  auto data = std::make_shared<MarketData>();
  const auto closes = series.closes();
  data->regime = estimate_series(closes, regime_window);
  data->recent_vol = recent_volatility(closes, vol_window);
  data->series = std::move(series);
  return data;
}

void write_trace_csv(const std::filesystem::path& path, std::span<const TraceRow> rows) {
  auto out = csv::open_for_write(path);
  out << "t,price,center,action,fee,gas,reward,theta,in_range\n";
  for (const auto& r : rows) {
    out << r.t << ',' << csv::format(r.price) << ',' << csv::format(r.center) << ',' << r.action
        << ',' << csv::format(r.fee) << ',' << csv::format(r.gas) << ',' << csv::format(r.reward)
        << ',' << csv::format(r.theta) << ',' << (r.in_range ? 1 : 0) << '\n';
  }
}

Environment::Environment(std::shared_ptr<const MarketData> data, EnvConfig cfg)
    : data_(std::move(data)), cfg_(cfg) {
  if (!data_ || data_->size() == 0) throw Error(ErrorCode::EmptyData, "environment has no data");
  cfg_.pool.validate();
  if (cfg_.end == 0) cfg_.end = data_->size();
  if (cfg_.begin >= cfg_.end || cfg_.end > data_->size()) {
    throw Error(ErrorCode::DomainError, "environment bar range out of bounds");
  }
  if (cfg_.episode_length == 0) throw Error(ErrorCode::DomainError, "episode length must be positive");
  if (!(cfg_.capital > 0)) throw Error(ErrorCode::DomainError, "capital must be positive");
  // Random starts leave room for a full episode: episode_length advances
  // need episode_length + 1 bars.
  if (cfg_.begin + cfg_.episode_length + 1 > cfg_.end) {
    throw Error(ErrorCode::InsufficientData, "bar range shorter than one episode");
  }
  last_start_ = cfg_.end - 1 - cfg_.episode_length;
}

AgentState Environment::observe() const {
  return build_state(data_->price(index_), pos_, data_->regime[index_], data_->recent_vol[index_]);
}

AgentState Environment::reset(std::size_t start_index) {
  if (start_index < cfg_.begin || start_index + cfg_.episode_length > cfg_.end ||
      start_index + 1 >= cfg_.end) {
    throw Error(ErrorCode::DomainError, "episode start out of bounds");
  }
  start_ = index_ = start_index;
  steps_ = 0;
  terminal_ = false;
  pos_ = open_position(data_->price(index_), cfg_.capital, cfg_.pool);
  reported_fees_ = reported_gas_ = 0.0;
  trace_.clear();
  state_ = observe();
  return state_;
}

AgentState Environment::reset_random(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(cfg_.begin, last_start_);
  return reset(pick(rng));
}

AgentState Environment::reset_random(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return reset_random(rng);
}

StepResult Environment::step(int action) {
  if (terminal_) throw Error(ErrorCode::EpisodeFinished, "step after terminal state; call reset");
  if (action != 0 && action != 1) throw Error(ErrorCode::DomainError, "action must be 0 or 1");

  StepResult out;
  out.transition.state = state_;
  out.transition.action = action;

  if (action == 1) recenter(pos_, data_->price(index_), cfg_.pool);
  const double center = pos_.center;

  ++index_;
  ++steps_;
  const double price = data_->price(index_);
  const double fee = fee_step(pos_, price, data_->volume(index_), cfg_.pool);

  // The first step also carries the initial placement charge so that episode
  // rewards reconcile with the position's accounts.
  const double d_fees = pos_.accrued_fees - reported_fees_;
  const double d_gas = pos_.accrued_gas - reported_gas_;
  reported_fees_ = pos_.accrued_fees;
  reported_gas_ = pos_.accrued_gas;

  state_ = observe();
  const auto& rp = cfg_.reward;
  const double reward =
      rp.reward_scale * (d_fees - d_gas) / pos_.capital + rp.active_bonus * state_.in_range_flag;

  terminal_ = steps_ >= cfg_.episode_length || index_ + 1 >= cfg_.end;

  out.transition.reward = reward;
  out.transition.next_state = state_;
  out.transition.terminal = terminal_;
  out.diagnostics = {.t = data_->series[index_].t,
                     .price = price,
                     .center = center,
                     .fee = fee,
                     .gas = d_gas,
                     .in_range = state_.in_range_flag > 0.5};
  if (tracing_) {
    trace_.push_back({out.diagnostics.t, price, center, action, fee, d_gas, reward, state_.theta,
                      out.diagnostics.in_range});
  }
  return out;
}

}  // namespace lazylp
