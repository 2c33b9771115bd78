#include <cmath>
#include <numeric>

#include "lazylp/synthpath.hpp"
#include "test_util.hpp"

using namespace lazylp;

namespace {

double mean(const std::vector<double>& x) { return std::accumulate(x.begin(), x.end(), 0.0) / x.size(); }

double variance(const std::vector<double>& x) {
  const double m = mean(x);
  double s = 0;
  for (double v : x) s += (v - m) * (v - m);
  return s / (x.size() - 1);
}

double lag1_autocorr(const std::vector<double>& r) {
  const double m = mean(r);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    den += (r[i] - m) * (r[i] - m);
    if (i > 0) num += (r[i] - m) * (r[i - 1] - m);
  }
  return num / den;
}

}  // namespace

TEST(SimulateOu, DeterministicHalfLife) {
  const auto path = simulate_ou({0.01, 100, 0}, 110, 1, 69.3147, 1);
  ASSERT_EQ(path.size(), 2u);
  EXPECT_NEAR(path[1], 105.0, 1e-4);
}

TEST(SimulateOu, FrozenWithoutDriftOrNoise) {
  for (double s : simulate_ou({0, 100, 0}, 87.5, 50, 1, 3)) EXPECT_EQ(s, 87.5);
}

TEST(SimulateOu, StationaryVariance) {
  const auto path = simulate_ou({0.05, 100, 0.5}, 100, 100'000, 1, 11);
  EXPECT_NEAR(variance(path), 2.5, 0.25);
}

TEST(SimulateOu, ExactIncrementVariance) {
  const OuParams p{0.02, 50, 0.3};
  const double dt = 2.0;
  const auto path = simulate_ou(p, 50, 200'000, dt, 5);
  const double decay = std::exp(-p.theta * dt);
  std::vector<double> eta;
  for (std::size_t k = 0; k + 1 < path.size(); ++k) eta.push_back(path[k + 1] - (p.mu + (path[k] - p.mu) * decay));
  const double expected = p.sigma * p.sigma * (1 - std::exp(-2 * p.theta * dt)) / (2 * p.theta);
  EXPECT_NEAR(variance(eta), expected, 0.05 * expected);
}

TEST(SimulateOu, RandomWalkLimit) {
  const auto path = simulate_ou({0, 10, 0.2}, 10, 100'000, 0.5, 8);
  std::vector<double> d;
  for (std::size_t k = 0; k + 1 < path.size(); ++k) d.push_back(path[k + 1] - path[k]);
  EXPECT_NEAR(variance(d), 0.04 * 0.5, 0.05 * 0.02);
}

TEST(SimulateOu, MeanConverges) {
  const OuParams p{0.05, 100, 0.5};
  const std::size_t n = 200'000;
  const auto path = simulate_ou(p, 100, n, 1, 21);
  // Effective sample count of an AR(1) with coefficient e^{-theta}.
  const double a = std::exp(-p.theta);
  const double n_eff = n * (1 - a) / (1 + a);
  const double se = p.sigma / std::sqrt(2 * p.theta) / std::sqrt(n_eff);
  EXPECT_NEAR(mean(path), p.mu, 3 * se);
}

TEST(SimulateOu, SeedDeterminism) {
  EXPECT_EQ(simulate_ou({0.01, 100, 0.1}, 100, 1000, 1, 9), simulate_ou({0.01, 100, 0.1}, 100, 1000, 1, 9));
  EXPECT_NE(simulate_ou({0.01, 100, 0.1}, 100, 1000, 1, 9), simulate_ou({0.01, 100, 0.1}, 100, 1000, 1, 10));
}

TEST(SimulateOu, Preconditions) {
  EXPECT_LAZYLP_ERROR(simulate_ou({0.01, 100, 0.1}, 100, 0, 1, 1), DomainError);
  EXPECT_LAZYLP_ERROR(simulate_ou({0.01, 100, 0.1}, 100, 10, 0, 1), DomainError);
  EXPECT_LAZYLP_ERROR(simulate_ou({-1, 100, 0.1}, 100, 10, 1, 1), DomainError);
}

TEST(SimulateSchedule, FlatWithoutDynamics) {
  RegimeSchedule sched;
  sched.segments = {{100, {0, 100, 0}}};
  sched.initial_price = 42;
  const BarSeries s = simulate_schedule(sched, 1);
  ASSERT_EQ(s.size(), 100u);
  for (const Bar& b : s.bars()) {
    EXPECT_EQ(b.close, 42);
    EXPECT_EQ(b.high, 42);
    EXPECT_DOUBLE_EQ(b.volume, sched.volume.base_notional);
  }
}

TEST(SimulateSchedule, UncoupledVolumeIsConstant) {
  RegimeSchedule sched;
  sched.segments = {{500, {0.05, 100, 0.5}}};
  sched.volume = {2500, 0};
  for (const Bar& b : simulate_schedule(sched, 4).bars()) EXPECT_EQ(b.volume, 2500);
}

TEST(SimulateSchedule, BarsChainAndCoupledVolume) {
  RegimeSchedule sched;
  sched.segments = {{300, {0.05, 100, 0.5}}, {300, {0.001, 100, 0.1}}};
  sched.start_time = 1000;
  const BarSeries s = simulate_schedule(sched, 12);
  ASSERT_EQ(s.size(), 600u);
  EXPECT_EQ(s[0].t, 1000);
  EXPECT_EQ(s[0].open, sched.initial_price);
  for (std::size_t i = 1; i < s.size(); ++i) {
    EXPECT_EQ(s[i].open, s[i - 1].close);
    EXPECT_EQ(s[i].high, std::max(s[i].open, s[i].close));
    EXPECT_EQ(s[i].low, std::min(s[i].open, s[i].close));
    const double r = std::abs(s[i].close / s[i].open - 1);
    const double sigma_ref = i < 300 ? 0.5 / 100 : 0.1 / 100;
    EXPECT_NEAR(s[i].volume, 10'000 * (1 + r / sigma_ref), 1e-6);
  }
}

TEST(SimulateSchedule, HighThetaSegmentHasLowerReturnAutocorrelation) {
  RegimeSchedule sched;
  sched.segments = {{20'000, {0.3, 100, 0.2}}, {20'000, {0.0, 100, 0.2}}};
  const BarSeries s = simulate_schedule(sched, 77);
  std::vector<double> r1, r2;
  for (std::size_t i = 0; i < s.size(); ++i) (i < 20'000 ? r1 : r2).push_back(s[i].close - s[i].open);
  EXPECT_LT(lag1_autocorr(r1), lag1_autocorr(r2));
  EXPECT_LT(lag1_autocorr(r1), -0.05);
}

TEST(SimulateSchedule, Validation) {
  RegimeSchedule sched;
  EXPECT_LAZYLP_ERROR(simulate_schedule(sched, 1), DomainError);
  sched.segments = {{0, {0.01, 100, 0.1}}};
  EXPECT_LAZYLP_ERROR(simulate_schedule(sched, 1), DomainError);
}
