#include "lazylp/regime.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "lazylp/error.hpp"

namespace lazylp {
namespace {

constexpr double kMinRegressorVariance = 1e-12;

// Centered second moments of m (x, y) pairs, x measured from `ref`.
struct Moments {
  double m = 0;
  double mean_x = 0, mean_y = 0;
  double var_x = 0, cov_xy = 0, var_y = 0;
  double ref = 0;
};

RegimeEstimate fallback(double last_price, std::size_t window) {
  return {.theta = 0.0, .mu = last_price, .sigma = 0.0, .window_len = window, .valid = false};
}

RegimeEstimate from_moments(const Moments& mo, double dt, double last_price, std::size_t window) {
  if (!(mo.var_x > kMinRegressorVariance)) return fallback(last_price, window);
  const double beta = mo.cov_xy / mo.var_x;
  if (!(beta < 0)) return fallback(last_price, window);
  const double alpha_centered = mo.mean_y - beta * mo.mean_x;  // intercept for x - ref
  RegimeEstimate est;
  est.theta = std::clamp(-beta / dt, 0.0, 1.0);
  est.mu = mo.ref - alpha_centered / beta;
  const double ssr = std::max(0.0, mo.m * (mo.var_y - beta * mo.cov_xy));
  const double dof = std::max(mo.m - 2.0, 1.0);
  est.sigma = std::sqrt(ssr / dof) / std::sqrt(dt);
  est.window_len = window;
  est.valid = std::isfinite(est.mu) && std::isfinite(est.sigma);
  return est.valid ? est : fallback(last_price, window);
}

}  // namespace

RegimeEstimate estimate(std::span<const double> prices, double dt) {
  if (prices.size() < 3) throw Error(ErrorCode::WindowTooShort, "need at least 3 prices");
  if (!(dt > 0)) throw Error(ErrorCode::DomainError, "dt must be positive");
  const std::size_t m = prices.size() - 1;

  Moments mo;
  mo.m = static_cast<double>(m);
  mo.ref = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    mo.mean_x += prices[k];
    mo.mean_y += prices[k + 1] - prices[k];
  }
  mo.mean_x /= mo.m;
  mo.mean_y /= mo.m;
  // Two-pass centered sums: shifting all prices moves mean_x only.
  for (std::size_t k = 0; k < m; ++k) {
    const double dx = prices[k] - mo.mean_x;
    const double dy = (prices[k + 1] - prices[k]) - mo.mean_y;
    mo.var_x += dx * dx;
    mo.cov_xy += dx * dy;
    mo.var_y += dy * dy;
  }
  mo.var_x /= mo.m;
  mo.cov_xy /= mo.m;
  mo.var_y /= mo.m;
  // Express the intercept relative to mean_x so mu = mean_x - mean_y / beta.
  mo.ref = mo.mean_x;
  mo.mean_x = 0.0;
  return from_moments(mo, dt, prices.back(), prices.size());
}

std::optional<double> half_life(double theta) {
  if (!(theta > 0)) return std::nullopt;
  return std::numbers::ln2 / theta;
}

std::optional<double> half_life(const RegimeEstimate& est) { return half_life(est.theta); }

double p_return(double s, double mu, double barrier, double theta, double sigma) {
  if (!(sigma > 0)) throw Error(ErrorCode::DegenerateDiffusion, "sigma must be positive");
  if (!(theta >= 0)) throw Error(ErrorCode::DomainError, "theta must be non-negative");
  const double lo = std::min(barrier, mu);
  const double hi = std::max(barrier, mu);
  if (!(s >= lo && s <= hi) || barrier == mu) {
    throw Error(ErrorCode::DomainError, "s must lie between the barrier and mu");
  }
  // The scale density exp(theta (y - mu)^2 / sigma^2) peaks at the barrier on
  // [L, mu]; dividing by that peak keeps the integrand in (0, 1].
  const double peak = theta * (barrier - mu) * (barrier - mu) / (sigma * sigma);
  auto density = [&](double y) {
    return std::exp(theta * (y - mu) * (y - mu) / (sigma * sigma) - peak);
  };
  using Quadrature = boost::math::quadrature::gauss_kronrod<double, 31>;
  constexpr unsigned kMaxDepth = 30;
  constexpr double kRelTol = 1e-8;
  const double denom = Quadrature::integrate(density, lo, hi, kMaxDepth, kRelTol);
  const double numer = barrier < mu ? Quadrature::integrate(density, barrier, s, kMaxDepth, kRelTol)
                                    : Quadrature::integrate(density, s, barrier, kMaxDepth, kRelTol);
  return std::clamp(numer / denom, 0.0, 1.0);
}

RollingOuEstimator::RollingOuEstimator(std::size_t window, double dt)
    : window_(window), dt_(dt), ring_(window) {
  if (window < 3) throw Error(ErrorCode::WindowTooShort, "rolling window must hold >= 3 prices");
  if (!(dt > 0)) throw Error(ErrorCode::DomainError, "dt must be positive");
}

double RollingOuEstimator::at(std::size_t i) const { return ring_[(head_ + i) % window_]; }

void RollingOuEstimator::rebuild() {
  ref_ = count_ > 0 ? at(count_ - 1) : 0.0;
  sx_ = sy_ = sxx_ = sxy_ = syy_ = 0.0;
  for (std::size_t k = 0; k + 1 < count_; ++k) {
    const double x = at(k) - ref_;
    const double y = at(k + 1) - at(k);
    sx_ += x;
    sy_ += y;
    sxx_ += x * x;
    sxy_ += x * y;
    syy_ += y * y;
  }
  since_rebuild_ = 0;
}

RegimeEstimate RollingOuEstimator::push(double price) {
  if (count_ == window_) {
    // Drop the oldest pair (S_0, S_1 - S_0).
    const double x = at(0) - ref_;
    const double y = at(1) - at(0);
    sx_ -= x;
    sy_ -= y;
    sxx_ -= x * x;
    sxy_ -= x * y;
    syy_ -= y * y;
    head_ = (head_ + 1) % window_;
    --count_;
  }
  if (count_ > 0) {
    const double prev = at(count_ - 1);
    const double x = prev - ref_;
    const double y = price - prev;
    sx_ += x;
    sy_ += y;
    sxx_ += x * x;
    sxy_ += x * y;
    syy_ += y * y;
  }
  ring_[(head_ + count_) % window_] = price;
  ++count_;
  if (count_ == 1 || ++since_rebuild_ >= window_) rebuild();
  return current();
}

RegimeEstimate RollingOuEstimator::current() const {
  if (count_ == 0) return fallback(0.0, 0);
  const double last = at(count_ - 1);
  if (count_ < 3) return fallback(last, count_);
  Moments mo;
  mo.m = static_cast<double>(count_ - 1);
  mo.ref = ref_;
  mo.mean_x = sx_ / mo.m;
  mo.mean_y = sy_ / mo.m;
  mo.var_x = sxx_ / mo.m - mo.mean_x * mo.mean_x;
  mo.cov_xy = sxy_ / mo.m - mo.mean_x * mo.mean_y;
  mo.var_y = syy_ / mo.m - mo.mean_y * mo.mean_y;
  return from_moments(mo, dt_, last, count_);
}

std::vector<RegimeEstimate> estimate_series(std::span<const double> prices, std::size_t window,
                                            double dt) {
  RollingOuEstimator rolling(window, dt);
  std::vector<RegimeEstimate> out;
  out.reserve(prices.size());
  for (double p : prices) out.push_back(rolling.push(p));
  return out;
}

}  // namespace lazylp
