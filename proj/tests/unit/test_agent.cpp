#include <cmath>
#include <fstream>
#include <string>
#include <random>
#include <vector>

#include "lazylp/agent.hpp"
#include "test_util.hpp"

using namespace lazylp;
using Eigen::VectorXd;

namespace {

// Two-output net whose output ignores the input: Q = (q0, q1).
Mlp constant_net(double q0, double q1) {
  Mlp net = Mlp::zeros({static_cast<int>(kStateDim), 2});
  net.bias(0) << q0, q1;
  return net;
}

AgentState some_state(double x) {
  AgentState s;
  s.delta_p = 0.001 * x;
  s.d_edge = 0.5 * x;
  s.theta = 0.01;
  s.in_range_flag = 1;
  return s;
}

Transition transition(double r, bool terminal = false, int action = 0) {
  return {some_state(0.1), action, r, some_state(0.2), terminal};
}

std::shared_ptr<const MarketData> market(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<Bar> bars;
  double s = 100;
  for (std::size_t i = 0; i < n; ++i) {
    s += 0.05 * (100 - s) + 0.1 * z(rng);
    bars.push_back({static_cast<std::int64_t>(i), s, s, s, s, 1e4});
  }
  return make_market_data(BarSeries(std::move(bars)), 60, 30);
}

TrainConfig small_config(std::size_t episodes, std::size_t length) {
  TrainConfig cfg;
  cfg.episodes = episodes;
  cfg.episode_length = length;
  cfg.batch_size = 16;
  cfg.buffer_capacity = 1000;
  cfg.hidden = {16, 8};
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST(SelectAction, PureExplorationIsFair) {
  const Mlp net = constant_net(1, 0);
  std::mt19937_64 rng(1);
  const int n = 10'000;
  int ones = 0;
  for (int i = 0; i < n; ++i) ones += select_action(net, some_state(0), 1.0, rng);
  const double chi2 = 2.0 * std::pow(ones - n / 2.0, 2) / (n / 2.0);
  EXPECT_LT(chi2, 6.635);  // p > 0.01 with one degree of freedom
}

TEST(SelectAction, GreedyAndTies) {
  std::mt19937_64 rng(1);
  EXPECT_EQ(select_action(constant_net(0.3, 0.1), some_state(0), 0.0, rng), kHold);
  EXPECT_EQ(select_action(constant_net(0.2, 0.2), some_state(0), 0.0, rng), kHold);
  EXPECT_EQ(select_action(constant_net(0.1, 0.3), some_state(0), 0.0, rng), kRebalance);
  EXPECT_LAZYLP_ERROR(select_action(constant_net(0, 0), some_state(0), 1.5, rng), DomainError);
}

TEST(EncodeState, ScalesAndClips) {
  AgentState s;
  s.delta_mu = -1.69;  // scaled -169
  s.theta = 0.01;
  const VectorXd x = encode_state(s);
  EXPECT_EQ(x(3), -kEncodedClip);
  EXPECT_NEAR(x(2), 0.2, 1e-15);
}

TEST(DdqnTargets, Terminal) {
  const std::vector<Transition> batch{transition(0.5, true)};
  EXPECT_EQ(ddqn_targets(batch, constant_net(0, 1), constant_net(5, 2), 0.99)(0), 0.5);
}

TEST(DdqnTargets, OnlineSelectsTargetEvaluates) {
  const std::vector<Transition> batch{transition(0.25)};
  const double y = ddqn_targets(batch, constant_net(0, 1), constant_net(5, 2), 0.99)(0);
  EXPECT_DOUBLE_EQ(y, 0.25 + 0.99 * 2);
  EXPECT_NE(y, 0.25 + 0.99 * 5);
}

TEST(DdqnTargets, ZeroGamma) {
  const std::vector<Transition> batch{transition(0.1), transition(-0.3), transition(2, true)};
  const VectorXd y = ddqn_targets(batch, Mlp({8, 4, 2}, 1), Mlp({8, 4, 2}, 2), 0.0);
  EXPECT_EQ(y(0), 0.1);
  EXPECT_EQ(y(1), -0.3);
  EXPECT_EQ(y(2), 2.0);
}

TEST(ReplayBuffer, FifoEviction) {
  ReplayBuffer buf(10);
  for (int i = 0; i < 13; ++i) buf.push(transition(i));
  ASSERT_EQ(buf.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(buf.at(i).reward, 3.0 + i);
  EXPECT_LAZYLP_ERROR(buf.at(10), DomainError);
}

TEST(ReplayBuffer, UniformSampling) {
  const std::size_t cap = 100;
  ReplayBuffer buf(cap);
  for (std::size_t i = 0; i < cap + 37; ++i) buf.push(transition(static_cast<double>(i)));
  std::mt19937_64 rng(3);
  const std::size_t n = 100'000;
  std::vector<int> counts(cap, 0);
  for (std::size_t i : buf.sample_indices(n, rng)) ++counts.at(i);
  const double p = 1.0 / cap, mean = n * p, sd = std::sqrt(n * p * (1 - p));
  for (int c : counts) EXPECT_LT(std::abs(c - mean), 4 * sd);
}

TEST(ReplayBuffer, EmptySample) {
  ReplayBuffer buf(4);
  std::mt19937_64 rng(0);
  EXPECT_LAZYLP_ERROR(buf.sample(1, rng), BufferTooSmall);
}

TEST(TrainStep, MatchesHandLoss) {
  TrainConfig cfg = small_config(1, 10);
  DqnAgent agent(cfg);
  const std::vector<Transition> batch{transition(0.3, false, 1)};
  const VectorXd q_next_online = agent.online().forward(encode_state(batch[0].next_state));
  const VectorXd q_next_target = agent.target().forward(encode_state(batch[0].next_state));
  const int a_star = q_next_online(1) > q_next_online(0) ? 1 : 0;
  const double y = 0.3 + cfg.gamma * q_next_target(a_star);
  const double q = agent.online().forward(encode_state(batch[0].state))(1);
  EXPECT_NEAR(agent.train_step(batch), (y - q) * (y - q), 1e-12);
}

TEST(TrainStep, ExactTargetsGiveZeroGradient) {
  TrainConfig cfg = small_config(1, 10);
  cfg.hidden.clear();
  DqnAgent agent(cfg);
  agent.online() = constant_net(0.5, 0.0);
  agent.target() = constant_net(0.5, 0.0);
  // y = r + gamma * 0.5 = 0.5 when r = 0.5 (1 - gamma)
  const std::vector<Transition> batch{transition(0.5 * (1 - cfg.gamma))};
  const Mlp before = agent.online();
  EXPECT_NEAR(agent.train_step(batch), 0.0, 1e-30);
  EXPECT_TRUE(agent.online() == before);
}

TEST(TrainStep, OverfitsSingleTransition) {
  TrainConfig cfg = small_config(1, 10);
  cfg.learning_rate = 1e-3;
  DqnAgent agent(cfg);
  const std::vector<Transition> batch{transition(1.0, true, 1)};
  double at50 = 0, last = 0;
  for (int k = 1; k <= 500; ++k) {
    last = agent.train_step(batch);
    if (k == 50) at50 = last;
  }
  EXPECT_LT(last, at50);
  EXPECT_LT(last, 1e-3);
}

TEST(TrainStep, TargetStaysFrozenBetweenSyncs) {
  DqnAgent agent(small_config(1, 10));
  const Mlp frozen = agent.target();
  const std::vector<Transition> batch{transition(1.0), transition(-1.0, true, 1)};
  for (int k = 0; k < 20; ++k) agent.train_step(batch);
  EXPECT_TRUE(agent.target() == frozen);
  EXPECT_FALSE(agent.online() == frozen);
  agent.sync_target();
  EXPECT_TRUE(agent.target() == agent.online());
}

TEST(Learn, NeedsFullBatch) {
  DqnAgent agent(small_config(1, 10));
  for (int i = 0; i < 15; ++i) agent.buffer().push(transition(i));
  EXPECT_LAZYLP_ERROR(agent.learn(), BufferTooSmall);
  agent.buffer().push(transition(0));
  EXPECT_NO_THROW(agent.learn());
  EXPECT_EQ(agent.train_steps(), 1);
}

TEST(Epsilon, Modes) {
  EpsilonSchedule e;
  e.reset();
  e.on_step();
  EXPECT_DOUBLE_EQ(e.current, 0.9998);
  e.on_episode_end();
  EXPECT_DOUBLE_EQ(e.current, 0.9998);
  e.mode = EpsilonDecay::PerEpisode;
  e.reset();
  e.on_step();
  EXPECT_EQ(e.current, 1.0);
  e.on_episode_end();
  EXPECT_DOUBLE_EQ(e.current, 0.9998);
  for (int i = 0; i < 100'000; ++i) e.on_episode_end();
  EXPECT_EQ(e.current, 0.05);
}

TEST(Train, NoUpdatesBeforeBufferFills) {
  auto data = market(200, 1);
  TrainConfig cfg = small_config(1, 10);
  cfg.batch_size = 128;
  EnvConfig env_cfg;
  env_cfg.episode_length = 10;
  Environment env(data, env_cfg);
  const auto result = train(env, cfg);
  EXPECT_EQ(result.train_steps, 0);
  EXPECT_TRUE(result.network == Mlp({8, 16, 8, 2}, cfg.seed));
  ASSERT_EQ(result.log.size(), 1u);
  EXPECT_EQ(result.log[0].mean_loss, 0.0);
}

TEST(Train, BitReproducible) {
  auto data = market(2000, 2);
  TrainConfig cfg = small_config(4, 200);
  EnvConfig env_cfg;
  env_cfg.episode_length = 200;
  Environment a(data, env_cfg), b(data, env_cfg);
  const auto ra = train(a, cfg);
  const auto rb = train(b, cfg);
  EXPECT_TRUE(ra.network == rb.network);
  EXPECT_EQ(ra.train_steps, 4 * 200 - cfg.batch_size + 1);
  for (std::size_t i = 0; i < ra.log.size(); ++i) {
    EXPECT_EQ(ra.log[i].episode_return, rb.log[i].episode_return);
    EXPECT_EQ(ra.log[i].rebalances, rb.log[i].rebalances);
  }
}

TEST(Train, EpisodeLengthMismatch) {
  auto data = market(500, 3);
  EnvConfig env_cfg;
  env_cfg.episode_length = 50;
  Environment env(data, env_cfg);
  EXPECT_LAZYLP_ERROR(train(env, small_config(1, 10)), ConfigError);
  TrainConfig bad = small_config(1, 50);
  bad.gamma = 1.0;
  EXPECT_LAZYLP_ERROR(train(env, bad), ConfigError);
}

TEST(TrainingLog, Header) {
  const auto path = lazylp::testing::scratch_dir() / "log.csv";
  const std::vector<EpisodeLog> log{{0, 1.5, 0.9, 0.1, 3, 0.8}};
  write_training_log_csv(path, log);
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "episode,return,epsilon,mean_loss,rebalances,active_frac");
  EXPECT_EQ(row, "0,1.5,0.9,0.1,3,0.8");
}
