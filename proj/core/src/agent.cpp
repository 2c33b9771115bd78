#include "lazylp/agent.hpp"

#include <algorithm>
#include <cmath>

#include "lazylp/csv.hpp"
#include "lazylp/error.hpp"

namespace lazylp {

void encode_state_into(const AgentState& state, Eigen::Ref<Eigen::VectorXd> column) {
  const auto raw = state.to_array();
  for (std::size_t i = 0; i < kStateDim; ++i) {
    column(static_cast<Eigen::Index>(i)) =
        std::clamp(raw[i] * kFeatureScale[i], -kEncodedClip, kEncodedClip);
  }
}

Eigen::VectorXd encode_state(const AgentState& state) {
  Eigen::VectorXd x(kStateDim);
  encode_state_into(state, x);
  return x;
}

int greedy_action(const Eigen::VectorXd& q) {
  if (q.size() != 2) throw Error(ErrorCode::ShapeError, "expected two Q-values");
  return q(1) > q(0) ? kRebalance : kHold;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error(ErrorCode::DomainError, "replay capacity must be positive");
  ring_.resize(capacity);
}

void ReplayBuffer::push(const Transition& t) {
  ring_[cursor_] = t;
  cursor_ = (cursor_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw Error(ErrorCode::DomainError, "replay index out of range");
  const std::size_t oldest = size_ < capacity_ ? 0 : cursor_;
  return ring_[(oldest + i) % capacity_];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, std::mt19937_64& rng) const {
  if (size_ == 0) throw Error(ErrorCode::BufferTooSmall, "cannot sample an empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = pick(rng);
  return out;
}

std::vector<Transition> ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng) const {
  std::vector<Transition> out;
  out.reserve(n);
  for (std::size_t i : sample_indices(n, rng)) out.push_back(at(i));
  return out;
}

void TrainConfig::validate() const {
  const bool ok = gamma > 0 && gamma < 1 && batch_size > 0 && target_sync > 0 && episodes > 0 &&
                  episode_length > 0 && learning_rate > 0 && buffer_capacity >= batch_size &&
                  epsilon.end >= 0 && epsilon.start <= 1 && epsilon.end <= epsilon.start &&
                  epsilon.decay > 0 && epsilon.decay <= 1;
  if (!ok) throw Error(ErrorCode::ConfigError, "training configuration out of range");
}

int select_action(const Mlp& net, const AgentState& state, double epsilon, std::mt19937_64& rng) {
  if (!(epsilon >= 0 && epsilon <= 1)) throw Error(ErrorCode::DomainError, "epsilon must be in [0, 1]");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < epsilon) return unit(rng) < 0.5 ? kHold : kRebalance;
  return greedy_action(net.forward(encode_state(state)));
}

namespace {

Eigen::MatrixXd encode_batch(std::span<const Transition> batch, bool next) {
  Eigen::MatrixXd x(kStateDim, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    encode_state_into(next ? batch[i].next_state : batch[i].state, x.col(static_cast<Eigen::Index>(i)));
  }
  return x;
}

}  // namespace

Eigen::VectorXd ddqn_targets(std::span<const Transition> batch, const Mlp& online,
                             const Mlp& target, double gamma) {
  if (batch.empty()) throw Error(ErrorCode::DomainError, "empty batch");
  const Eigen::MatrixXd next = encode_batch(batch, true);
  const Eigen::MatrixXd q_online = online.forward_batch(next);
  const Eigen::MatrixXd q_target = target.forward_batch(next);
  Eigen::VectorXd y(static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    y(col) = batch[i].reward;
    if (!batch[i].terminal) {
      const int a_star = q_online(1, col) > q_online(0, col) ? kRebalance : kHold;
      y(col) += gamma * q_target(a_star, col);
    }
  }
  return y;
}

DqnAgent::DqnAgent(const TrainConfig& cfg)
    : cfg_(cfg), buffer_(cfg.buffer_capacity), rng_(cfg.seed ^ 0x9E3779B97F4A7C15ULL) {
  cfg_.validate();
  std::vector<int> dims{static_cast<int>(kStateDim)};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(2);
  online_ = Mlp(dims, cfg.seed);
  target_ = online_;
  opt_ = AdamState::for_network(online_, cfg.learning_rate);
}

double DqnAgent::train_step(std::span<const Transition> batch) {
  if (batch.empty()) throw Error(ErrorCode::BufferTooSmall, "empty training batch");
  const Eigen::VectorXd y = ddqn_targets(batch, online_, target_, cfg_.gamma);
  const ForwardCache cache = forward_cached(online_, encode_batch(batch, false));

  const auto n = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd grad_out = Eigen::MatrixXd::Zero(2, n);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = batch[static_cast<std::size_t>(i)].action;
    const double err = cache.output(a, i) - y(i);
    loss += err * err;
    grad_out(a, i) = 2.0 * err / static_cast<double>(n);
  }
  adam_update(online_, backward(online_, cache, grad_out), opt_);
  ++train_steps_;
  return loss / static_cast<double>(n);
}

double DqnAgent::learn() {
  if (buffer_.size() < cfg_.batch_size) {
    throw Error(ErrorCode::BufferTooSmall, "replay buffer smaller than one batch");
  }
  const auto batch = buffer_.sample(cfg_.batch_size, rng_);
  return train_step(batch);
}

TrainResult train(Environment& env, const TrainConfig& cfg) {
  cfg.validate();
  if (env.config().episode_length != cfg.episode_length) {
    throw Error(ErrorCode::ConfigError, "environment and training episode lengths differ");
  }
  DqnAgent agent(cfg);
  EpsilonSchedule eps = cfg.epsilon;
  eps.reset();
  std::mt19937_64 env_rng(cfg.seed + 1);
  std::mt19937_64 act_rng(cfg.seed + 2);

  TrainResult result;
  for (std::size_t episode = 0; episode < cfg.episodes; ++episode) {
    AgentState state = env.reset_random(env_rng);
    EpisodeLog entry{.episode = episode, .epsilon = eps.current};
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    while (!env.terminal()) {
      const int action = select_action(agent.online(), state, eps.current, act_rng);
      const StepResult sr = env.step(action);
      agent.buffer().push(sr.transition);
      entry.episode_return += sr.transition.reward;
      entry.rebalances += action;
      state = sr.transition.next_state;

      if (agent.buffer().size() >= cfg.batch_size) {
        loss_sum += agent.learn();
        ++loss_count;
        if (agent.train_steps() % cfg.target_sync == 0) agent.sync_target();
      }
      eps.on_step();
    }
    eps.on_episode_end();
    entry.mean_loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
    const Position& pos = env.position();
    entry.active_frac = static_cast<double>(pos.active_seconds) /
                        static_cast<double>(std::max<std::int64_t>(pos.total_seconds, 1));
    result.log.push_back(entry);
  }
  result.network = agent.online();
  result.optimizer = agent.optimizer();
  result.train_steps = agent.train_steps();
  return result;
}

void write_training_log_csv(const std::filesystem::path& path, std::span<const EpisodeLog> log) {
  auto out = csv::open_for_write(path);
  out << "episode,return,epsilon,mean_loss,rebalances,active_frac\n";
  for (const auto& e : log) {
    out << e.episode << ',' << csv::format(e.episode_return) << ',' << csv::format(e.epsilon) << ','
        << csv::format(e.mean_loss) << ',' << e.rebalances << ',' << csv::format(e.active_frac)
        << '\n';
  }
}

}  // namespace lazylp
