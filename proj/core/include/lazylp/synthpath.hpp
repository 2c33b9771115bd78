#pragma once

#include <cstdint>
#include <vector>

#include "lazylp/marketdata.hpp"

namespace lazylp {

// dS = theta (mu - S) dt + sigma dW. theta in 1/s, sigma in price / sqrt(s).
struct OuParams {
  double theta = 0.0;
  double mu = 1.0;
  double sigma = 0.0;

  void validate() const;
};

struct RegimeSegment {
  std::int64_t duration_seconds = 0;
  OuParams params;
};

// Per-second volume = base_notional * (1 + volatility_coupling * |r_k| / sigma_ref),
// where r_k is the simple return of second k and sigma_ref = sigma / mu of the
// active segment (its relative one-second diffusion scale).
struct VolumeModel {
  double base_notional = 10'000.0;
  double volatility_coupling = 1.0;
};

struct RegimeSchedule {
  std::vector<RegimeSegment> segments;
  double initial_price = 100.0;
  VolumeModel volume;
  std::int64_t start_time = 0;

  void validate() const;
};

// Exact OU discretization; returns n + 1 prices starting with s0.
std::vector<double> simulate_ou(const OuParams& params, double s0, std::size_t n, double dt,
                                std::uint64_t seed);

// One bar per second across all segments; bar k opens at S_k and closes at S_{k+1}.
BarSeries simulate_schedule(const RegimeSchedule& schedule, std::uint64_t seed);

}  // namespace lazylp
