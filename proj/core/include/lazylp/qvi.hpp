#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "lazylp/ammcore.hpp"
#include "lazylp/synthpath.hpp"

namespace lazylp {

struct UniformGrid {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t n = 3;

  double step() const { return (hi - lo) / static_cast<double>(n - 1); }
  double at(std::size_t i) const { return lo + step() * static_cast<double>(i); }
  std::size_t nearest(double x) const;
};

// Stationary impulse-control problem on (S, c): the position earns fee_rate
// per second while |S - c| <= width * c, pays `cost` per recentering c -> S,
// and S follows the OU dynamics.
struct QviProblem {
  double rho = 0.01005;  // -ln(0.99) per second
  OuParams ou;
  double fee_rate = 0.0;
  double width = 0.002;
  double cost = 4.5;
  UniformGrid s_grid;
  UniformGrid c_grid;

  double fee(double s, double c) const;
  void validate() const;
};

// Grid of n_s x n_c points over mu +- span_sd * sigma / sqrt(2 theta).
QviProblem make_qvi_problem(const OuParams& ou, double rho, double fee_rate, double width,
                            double cost, std::size_t n_s = 401, std::size_t n_c = 101,
                            double span_sd = 6.0);

// In-range fee per second at a constant CEX volume.
double reference_fee_rate(const PoolConfig& pool, double capital, double ref_volume);

// rho matching a per-step discount gamma: gamma = exp(-rho dt).
double rho_from_gamma(double gamma, double dt = 1.0);

enum class Region : std::uint8_t { Continuation = 0, Jump = 1 };

struct BoundaryPoint {
  double c = 0.0;
  std::optional<double> lower_dev;  // nullopt: no jump node below c
  std::optional<double> upper_dev;
};

struct QviSolution {
  Eigen::MatrixXd value;  // rows: S nodes, cols: c nodes
  std::vector<std::vector<Region>> region;  // [c][S]
  std::vector<BoundaryPoint> boundary;
  std::size_t iterations = 0;
  bool converged = false;
  double last_change = 0.0;
  QviProblem problem;

  Region at(std::size_t s_i, std::size_t c_j) const { return region[c_j][s_i]; }
  bool jump_region_empty() const;
  // V(S_i, S_i) by linear interpolation across the c grid.
  double diagonal_value(std::size_t s_i) const;
};

struct QviResiduals {
  double max_obstacle_violation = 0.0;  // max(0, V(S,S) - C - V(S,c))
  double max_complementarity = 0.0;     // max |min(pde residual, V - M V)|
};

// Fixed point on the intervention obstacle: each pass solves, per c-slice,
// min(rho V - L V - f, V - (V_prev(S, S) - C)) = 0 with an upwinded implicit
// discretization (policy iteration over tridiagonal solves), until the sup-norm
// change falls below tol. Returns the last iterate with converged = false
// when max_iters is exhausted.
QviSolution solve_qvi(const QviProblem& problem, double tol = 1e-9, std::size_t max_iters = 20'000);

QviResiduals qvi_residuals(const QviSolution& sol);

// Boundary of the slice nearest to c.
BoundaryPoint boundary_deviation(const QviSolution& sol, double c);

void write_qvi_solution_csv(const std::filesystem::path& path, const QviSolution& sol);
void write_qvi_boundary_csv(const std::filesystem::path& path, const QviSolution& sol);

}  // namespace lazylp
