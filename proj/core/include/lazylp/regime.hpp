#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace lazylp {

// Rolling OU fit. When `valid` is false the fields hold the fallback values
// theta = 0, mu = latest price, sigma = 0.
struct RegimeEstimate {
  double theta = 0.0;  // 1/s, clipped to [0, 1]
  double mu = 0.0;
  double sigma = 0.0;  // price / sqrt(s)
  std::size_t window_len = 0;
  bool valid = false;
};

inline constexpr std::size_t kDefaultRegimeWindow = 1800;

// OLS of (S_{k+1} - S_k) on S_k over the whole window.
RegimeEstimate estimate(std::span<const double> prices, double dt = 1.0);

// ln 2 / theta; nullopt when theta is not positive.
std::optional<double> half_life(double theta);
std::optional<double> half_life(const RegimeEstimate& est);

// Probability that an OU path started at s reaches mu before the barrier L,
// from the ratio of scale-function integrals. s must lie in the closed
// interval between L and mu.
double p_return(double s, double mu, double barrier, double theta, double sigma);

// Same regression as estimate(), maintained with O(1) rolling sums over the
// last `window` prices. Sums are re-anchored every `window` pushes so rounding
// drift stays bounded.
class RollingOuEstimator {
 public:
  explicit RollingOuEstimator(std::size_t window = kDefaultRegimeWindow, double dt = 1.0);

  RegimeEstimate push(double price);
  RegimeEstimate current() const;
  std::size_t size() const noexcept { return count_; }
  std::size_t window() const noexcept { return window_; }

 private:
  void rebuild();
  double at(std::size_t i) const;  // i-th oldest price in the window

  std::size_t window_;
  double dt_;
  std::vector<double> ring_;
  std::size_t head_ = 0;  // index of oldest price
  std::size_t count_ = 0;
  std::size_t since_rebuild_ = 0;
  double ref_ = 0.0;
  double sx_ = 0.0, sy_ = 0.0, sxx_ = 0.0, sxy_ = 0.0, syy_ = 0.0;
};

// Per-price estimates over a whole series, each using only the trailing window.
std::vector<RegimeEstimate> estimate_series(std::span<const double> prices,
                                            std::size_t window = kDefaultRegimeWindow,
                                            double dt = 1.0);

}  // namespace lazylp
