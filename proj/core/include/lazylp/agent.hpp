#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "lazylp/envsim.hpp"
#include "lazylp/neural.hpp"

namespace lazylp {

enum Action : int { kHold = 0, kRebalance = 1 };

// Fixed per-feature multipliers applied before the network sees a state. The
// raw features live on very different scales (theta ~ 1e-3, d_edge ~ 1).
inline constexpr std::array<double, kStateDim> kFeatureScale = {100.0, 1.0,    20.0, 100.0,
                                                                1000.0, 1.0, 1000.0, 1.0};
// Scaled features are clipped to +-kEncodedClip: delta_mu is unbounded and a
// near-flat regression window can put mu-hat hundreds of prices away.
inline constexpr double kEncodedClip = 5.0;

Eigen::VectorXd encode_state(const AgentState& state);
void encode_state_into(const AgentState& state, Eigen::Ref<Eigen::VectorXd> column);

// argmax over two Q-values with ties going to hold.
int greedy_action(const Eigen::VectorXd& q);

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 100'000);

  void push(const Transition& t);
  std::size_t size() const noexcept { return size_; }
  std::size_t capacity() const noexcept { return capacity_; }
  // i-th oldest stored transition.
  const Transition& at(std::size_t i) const;
  // Uniform with replacement over stored slots; returns slot positions in
  // oldest-first order numbering.
  std::vector<std::size_t> sample_indices(std::size_t n, std::mt19937_64& rng) const;
  std::vector<Transition> sample(std::size_t n, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::vector<Transition> ring_;
  std::size_t size_ = 0;
  std::size_t cursor_ = 0;  // next write slot
};

enum class EpsilonDecay { PerStep, PerEpisode };

struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  double decay = 0.9998;
  EpsilonDecay mode = EpsilonDecay::PerStep;

  double current = 1.0;

  void reset() { current = start; }
  void on_step() { if (mode == EpsilonDecay::PerStep) advance(); }
  void on_episode_end() { if (mode == EpsilonDecay::PerEpisode) advance(); }

 private:
  void advance() { current = std::max(end, current * decay); }
};

struct TrainConfig {
  double gamma = 0.99;
  std::size_t batch_size = 128;
  std::int64_t target_sync = 100;
  std::size_t episodes = 300;
  std::size_t episode_length = 36'000;
  double learning_rate = 1e-4;
  std::size_t buffer_capacity = 100'000;
  std::vector<int> hidden = {128, 64};
  EpsilonSchedule epsilon;
  std::uint64_t seed = 0;

  void validate() const;
};

int select_action(const Mlp& net, const AgentState& state, double epsilon, std::mt19937_64& rng);

// Double-DQN targets: y = r for terminal transitions, otherwise
// r + gamma * Q_target(s', argmax_a Q_online(s', a)).
Eigen::VectorXd ddqn_targets(std::span<const Transition> batch, const Mlp& online,
                             const Mlp& target, double gamma);

class DqnAgent {
 public:
  explicit DqnAgent(const TrainConfig& cfg);

  // One Adam step on the mean squared TD error of the taken actions. Returns the loss.
  double train_step(std::span<const Transition> batch);
  // Samples a minibatch from the buffer and trains on it. Throws BufferTooSmall.
  double learn();

  void sync_target() { copy_parameters(online_, target_); }

  Mlp& online() noexcept { return online_; }
  const Mlp& online() const noexcept { return online_; }
  const Mlp& target() const noexcept { return target_; }
  Mlp& target() noexcept { return target_; }
  ReplayBuffer& buffer() noexcept { return buffer_; }
  const AdamState& optimizer() const noexcept { return opt_; }
  std::mt19937_64& rng() noexcept { return rng_; }
  std::int64_t train_steps() const noexcept { return train_steps_; }
  const TrainConfig& config() const noexcept { return cfg_; }

 private:
  TrainConfig cfg_;
  Mlp online_;
  Mlp target_;
  AdamState opt_;
  ReplayBuffer buffer_;
  std::mt19937_64 rng_;
  std::int64_t train_steps_ = 0;
};

struct EpisodeLog {
  std::size_t episode = 0;
  double episode_return = 0.0;
  double epsilon = 0.0;
  double mean_loss = 0.0;
  std::int64_t rebalances = 0;
  double active_frac = 0.0;
};

struct TrainResult {
  Mlp network;
  AdamState optimizer;
  std::vector<EpisodeLog> log;
  std::int64_t train_steps = 0;
};

// Full training loop: one environment step, one buffer insert and (once the
// buffer holds a batch) one gradient update per step; target sync every
// target_sync updates counted globally; epsilon decayed per the schedule mode.
TrainResult train(Environment& env, const TrainConfig& cfg);

void write_training_log_csv(const std::filesystem::path& path, std::span<const EpisodeLog> log);

}  // namespace lazylp
