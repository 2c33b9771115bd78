#include "lazylp/synthpath.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "lazylp/error.hpp"

namespace lazylp {
namespace {

struct OuStep {
  double decay;   // e^{-theta dt}
  double stddev;  // sd of the innovation
};

OuStep exact_step(const OuParams& p, double dt) {
  const double x = p.theta * dt;
  const double decay = std::exp(-x);
  // sigma^2 (1 - e^{-2 theta dt}) / (2 theta) -> sigma^2 dt as theta dt -> 0.
  const double variance = x < 1e-8 ? p.sigma * p.sigma * dt
                                   : p.sigma * p.sigma * (-std::expm1(-2.0 * x)) / (2.0 * p.theta);
  return {decay, std::sqrt(variance)};
}

// Advances the chain in place, drawing from the shared generator.
template <class Rng>
double advance(const OuParams& p, const OuStep& step, double s, Rng& rng,
               std::normal_distribution<double>& normal) {
  const double noise = step.stddev > 0 ? step.stddev * normal(rng) : 0.0;
  return p.mu + (s - p.mu) * step.decay + noise;
}

}  // namespace

void OuParams::validate() const {
  if (!(theta >= 0) || !(mu > 0) || !(sigma >= 0) || !std::isfinite(theta) ||
      !std::isfinite(mu) || !std::isfinite(sigma)) {
    throw Error(ErrorCode::DomainError, "OU parameters need theta >= 0, mu > 0, sigma >= 0");
  }
}

void RegimeSchedule::validate() const {
  if (segments.empty()) throw Error(ErrorCode::DomainError, "schedule has no segments");
  if (!(initial_price > 0)) throw Error(ErrorCode::DomainError, "initial price must be positive");
  if (!(volume.base_notional >= 0) || !(volume.volatility_coupling >= 0)) {
    throw Error(ErrorCode::DomainError, "volume model coefficients must be non-negative");
  }
  for (const auto& seg : segments) {
    if (seg.duration_seconds <= 0) {
      throw Error(ErrorCode::DomainError, "segment durations must be positive");
    }
    seg.params.validate();
  }
}

std::vector<double> simulate_ou(const OuParams& params, double s0, std::size_t n, double dt,
                                std::uint64_t seed) {
  params.validate();
  if (n < 1 || !(dt > 0)) throw Error(ErrorCode::DomainError, "simulate_ou needs n >= 1 and dt > 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const OuStep step = exact_step(params, dt);
  std::vector<double> path(n + 1);
  path[0] = s0;
  for (std::size_t k = 0; k < n; ++k) path[k + 1] = advance(params, step, path[k], rng, normal);
  return path;
}

BarSeries simulate_schedule(const RegimeSchedule& schedule, std::uint64_t seed) {
  schedule.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Bar> bars;
  std::int64_t total = 0;
  for (const auto& seg : schedule.segments) total += seg.duration_seconds;
  bars.reserve(static_cast<std::size_t>(total));

  double s = schedule.initial_price;
  std::int64_t t = schedule.start_time;
  for (const auto& seg : schedule.segments) {
    const OuStep step = exact_step(seg.params, 1.0);
    const double sigma_ref = seg.params.sigma / seg.params.mu;
    for (std::int64_t k = 0; k < seg.duration_seconds; ++k) {
      const double next = advance(seg.params, step, s, rng, normal);
      if (!(next > 0)) {
        throw Error(ErrorCode::DomainError,
                    "simulated price became non-positive at t=" + std::to_string(t));
      }
      const double ret = std::abs(next - s) / s;
      double volume = schedule.volume.base_notional;
      if (sigma_ref > 0) {
        volume *= 1.0 + schedule.volume.volatility_coupling * ret / sigma_ref;
      }
      bars.push_back({.t = t,
                      .open = s,
                      .high = std::max(s, next),
                      .low = std::min(s, next),
                      .close = next,
                      .volume = std::max(volume, 0.0)});
      s = next;
      ++t;
    }
  }
  return BarSeries(std::move(bars));
}

}  // namespace lazylp
