#include "lazylp/qvi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lazylp/csv.hpp"
#include "lazylp/error.hpp"
#include "lazylp/parallel.hpp"

namespace lazylp {

std::size_t UniformGrid::nearest(double x) const {
  const double pos = std::round((x - lo) / step());
  return static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(n - 1)));
}

double QviProblem::fee(double s, double c) const {
  return std::abs(s - c) <= width * c * (1.0 + 1e-12) ? fee_rate : 0.0;
}

void QviProblem::validate() const {
  if (!(rho > 0)) throw Error(ErrorCode::DomainError, "rho must be positive");
  ou.validate();
  if (!(ou.sigma > 0)) throw Error(ErrorCode::DegenerateDiffusion, "QVI needs sigma > 0");
  if (!(ou.theta > 0)) throw Error(ErrorCode::DomainError, "QVI needs theta > 0 for a bounded grid");
  if (!(fee_rate >= 0) || !(width > 0 && width < 1) || !(cost >= 0)) {
    throw Error(ErrorCode::DomainError, "fee rate, width or cost out of range");
  }
  if (s_grid.n < 3 || c_grid.n < 3 || !(s_grid.hi > s_grid.lo) || !(c_grid.hi > c_grid.lo) ||
      !(s_grid.lo > 0) || !(c_grid.lo > 0)) {
    throw Error(ErrorCode::DomainError, "grids need >= 3 points over a positive interval");
  }
  const double sd = ou.sigma / std::sqrt(2.0 * ou.theta);
  const double slack = 1e-9 * ou.mu;
  if (s_grid.lo > ou.mu - 5.0 * sd + slack || s_grid.hi < ou.mu + 5.0 * sd - slack) {
    throw Error(ErrorCode::DomainError, "S grid must span mu +- 5 stationary deviations");
  }
  // Recentering maps c -> S, so the c grid must cover the S grid.
  if (c_grid.lo > s_grid.lo + slack || c_grid.hi < s_grid.hi - slack) {
    throw Error(ErrorCode::DomainError, "c grid must cover the S grid");
  }
}

QviProblem make_qvi_problem(const OuParams& ou, double rho, double fee_rate, double width,
                            double cost, std::size_t n_s, std::size_t n_c, double span_sd) {
  if (!(ou.theta > 0) || !(ou.sigma > 0)) {
    throw Error(ErrorCode::DomainError, "QVI needs theta > 0 and sigma > 0");
  }
  const double half = span_sd * ou.sigma / std::sqrt(2.0 * ou.theta);
  QviProblem p;
  p.rho = rho;
  p.ou = ou;
  p.fee_rate = fee_rate;
  p.width = width;
  p.cost = cost;
  p.s_grid = {ou.mu - half, ou.mu + half, n_s};
  p.c_grid = p.s_grid;
  p.c_grid.n = n_c;
  p.validate();
  return p;
}

double reference_fee_rate(const PoolConfig& pool, double capital, double ref_volume) {
  return pool.dex_cex_ratio * ref_volume * pool.fee_tier * capital * concentration(pool.width) /
         pool.pool_tvl;
}

double rho_from_gamma(double gamma, double dt) {
  if (!(gamma > 0 && gamma < 1) || !(dt > 0)) throw Error(ErrorCode::DomainError, "gamma in (0,1)");
  return -std::log(gamma) / dt;
}

namespace {

// rho I - L_h with upwinded drift, central diffusion and reflecting edges.
struct Operator {
  std::vector<double> lower, diag, upper;

  explicit Operator(const QviProblem& p) {
    const std::size_t n = p.s_grid.n;
    const double h = p.s_grid.step();
    const double diff = 0.5 * p.ou.sigma * p.ou.sigma / (h * h);
    lower.assign(n, 0.0);
    diag.assign(n, 0.0);
    upper.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double drift = p.ou.theta * (p.ou.mu - p.s_grid.at(i));
      lower[i] = -diff - std::max(-drift, 0.0) / h;
      upper[i] = -diff - std::max(drift, 0.0) / h;
      diag[i] = p.rho + 2.0 * diff + std::abs(drift) / h;
    }
    // Ghost nodes mirror the first interior node (zero slope).
    upper[0] += lower[0];
    lower[0] = 0.0;
    lower[n - 1] += upper[n - 1];
    upper[n - 1] = 0.0;
  }

  double apply(const Eigen::VectorXd& v, std::size_t i) const {
    double out = diag[i] * v(static_cast<Eigen::Index>(i));
    if (i > 0) out += lower[i] * v(static_cast<Eigen::Index>(i - 1));
    if (i + 1 < diag.size()) out += upper[i] * v(static_cast<Eigen::Index>(i + 1));
    return out;
  }
};

// Thomas algorithm; rows flagged in `pinned` read v_i = rhs_i.
void solve_tridiagonal(const Operator& op, const std::vector<std::uint8_t>& pinned,
                       const std::vector<double>& rhs, Eigen::VectorXd& v) {
  const std::size_t n = op.diag.size();
  std::vector<double> c_prime(n), d_prime(n);
  auto row = [&](std::size_t i, double& a, double& b, double& c) {
    if (pinned[i]) {
      a = 0.0, b = 1.0, c = 0.0;
    } else {
      a = op.lower[i], b = op.diag[i], c = op.upper[i];
    }
  };
  double a, b, c;
  row(0, a, b, c);
  c_prime[0] = c / b;
  d_prime[0] = rhs[0] / b;
  for (std::size_t i = 1; i < n; ++i) {
    row(i, a, b, c);
    const double m = b - a * c_prime[i - 1];
    c_prime[i] = c / m;
    d_prime[i] = (rhs[i] - a * d_prime[i - 1]) / m;
  }
  v(static_cast<Eigen::Index>(n - 1)) = d_prime[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) {
    v(static_cast<Eigen::Index>(i)) = d_prime[i] - c_prime[i] * v(static_cast<Eigen::Index>(i + 1));
  }
}

// Policy iteration for min(A v - f, v - psi) = 0 on one slice. `policy` is the
// warm start and returns the final jump set.
void solve_slice(const Operator& op, const std::vector<double>& f, const std::vector<double>& psi,
                 std::vector<std::uint8_t>& policy, Eigen::VectorXd& v) {
  const std::size_t n = f.size();
  std::vector<double> rhs(n);
  for (std::size_t iter = 0; iter < n + 5; ++iter) {
    for (std::size_t i = 0; i < n; ++i) rhs[i] = policy[i] ? psi[i] : f[i];
    solve_tridiagonal(op, policy, rhs, v);
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const double pde = op.apply(v, i) - f[i];
      const double obstacle = v(static_cast<Eigen::Index>(i)) - psi[i];
      const std::uint8_t jump = pde > obstacle ? 1 : 0;
      if (jump != policy[i]) {
        policy[i] = jump;
        changed = true;
      }
    }
    if (!changed) return;
  }
}

double interpolate_diagonal(const Eigen::MatrixXd& value, const QviProblem& p, std::size_t s_i) {
  const double s = p.s_grid.at(s_i);
  const double pos = std::clamp((s - p.c_grid.lo) / p.c_grid.step(), 0.0,
                                static_cast<double>(p.c_grid.n - 1));
  const auto j = std::min(static_cast<std::size_t>(pos), p.c_grid.n - 2);
  const double t = pos - static_cast<double>(j);
  const auto row = static_cast<Eigen::Index>(s_i);
  return (1.0 - t) * value(row, static_cast<Eigen::Index>(j)) +
         t * value(row, static_cast<Eigen::Index>(j + 1));
}

std::vector<double> obstacle(const Eigen::MatrixXd& value, const QviProblem& p) {
  std::vector<double> psi(p.s_grid.n);
  for (std::size_t i = 0; i < p.s_grid.n; ++i) psi[i] = interpolate_diagonal(value, p, i) - p.cost;
  return psi;
}

}  // namespace

bool QviSolution::jump_region_empty() const {
  for (const auto& slice : region)
    for (Region r : slice)
      if (r == Region::Jump) return false;
  return true;
}

double QviSolution::diagonal_value(std::size_t s_i) const {
  return interpolate_diagonal(value, problem, s_i);
}

QviSolution solve_qvi(const QviProblem& problem, double tol, std::size_t max_iters) {
  problem.validate();
  if (!(tol > 0)) throw Error(ErrorCode::DomainError, "tolerance must be positive");
  const std::size_t ns = problem.s_grid.n, nc = problem.c_grid.n;
  const Operator op(problem);

  std::vector<std::vector<double>> fees(nc, std::vector<double>(ns));
  for (std::size_t j = 0; j < nc; ++j)
    for (std::size_t i = 0; i < ns; ++i) fees[j][i] = problem.fee(problem.s_grid.at(i), problem.c_grid.at(j));

  QviSolution sol;
  sol.problem = problem;
  sol.value = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(nc));
  std::vector<std::vector<std::uint8_t>> policy(nc, std::vector<std::uint8_t>(ns, 0));

  // Start from the never-intervene value: an obstacle of -inf keeps every row continuation.
  {
    const std::vector<double> none(ns, -std::numeric_limits<double>::infinity());
    parallel_for(nc, [&](std::size_t j) {
      Eigen::VectorXd v(static_cast<Eigen::Index>(ns));
      solve_slice(op, fees[j], none, policy[j], v);
      sol.value.col(static_cast<Eigen::Index>(j)) = v;
    });
  }

  Eigen::MatrixXd next = sol.value;
  for (sol.iterations = 1; sol.iterations <= max_iters; ++sol.iterations) {
    const std::vector<double> psi = obstacle(sol.value, problem);
    parallel_for(nc, [&](std::size_t j) {
      Eigen::VectorXd v = sol.value.col(static_cast<Eigen::Index>(j));
      solve_slice(op, fees[j], psi, policy[j], v);
      next.col(static_cast<Eigen::Index>(j)) = v;
    });
    sol.last_change = (next - sol.value).cwiseAbs().maxCoeff();
    sol.value.swap(next);
    if (sol.last_change < tol) {
      sol.converged = true;
      break;
    }
  }
  sol.iterations = std::min(sol.iterations, max_iters);

  const std::vector<double> psi = obstacle(sol.value, problem);
  sol.region.assign(nc, std::vector<Region>(ns, Region::Continuation));
  for (std::size_t j = 0; j < nc; ++j) {
    for (std::size_t i = 0; i < ns; ++i) {
      const double gap = sol.value(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - psi[i];
      if (gap <= tol) sol.region[j][i] = Region::Jump;
    }
  }
  for (std::size_t j = 0; j < nc; ++j) sol.boundary.push_back(boundary_deviation(sol, problem.c_grid.at(j)));
  return sol;
}

QviResiduals qvi_residuals(const QviSolution& sol) {
  const QviProblem& p = sol.problem;
  const Operator op(p);
  const std::vector<double> psi = obstacle(sol.value, p);
  QviResiduals out;
  for (std::size_t j = 0; j < p.c_grid.n; ++j) {
    const Eigen::VectorXd v = sol.value.col(static_cast<Eigen::Index>(j));
    const double c = p.c_grid.at(j);
    for (std::size_t i = 0; i < p.s_grid.n; ++i) {
      const double pde = op.apply(v, i) - p.fee(p.s_grid.at(i), c);
      const double gap = v(static_cast<Eigen::Index>(i)) - psi[i];
      out.max_obstacle_violation = std::max(out.max_obstacle_violation, -gap);
      out.max_complementarity = std::max(out.max_complementarity, std::abs(std::min(pde, gap)));
    }
  }
  return out;
}

BoundaryPoint boundary_deviation(const QviSolution& sol, double c) {
  const QviProblem& p = sol.problem;
  const std::size_t j = p.c_grid.nearest(c);
  const double center = p.c_grid.at(j);
  BoundaryPoint out;
  out.c = center;
  for (std::size_t i = 0; i < p.s_grid.n; ++i) {
    if (sol.region[j][i] != Region::Jump) continue;
    const double s = p.s_grid.at(i);
    const double dev = std::abs(s / center - 1.0);
    if (s < center && (!out.lower_dev || dev < *out.lower_dev)) out.lower_dev = dev;
    if (s > center && (!out.upper_dev || dev < *out.upper_dev)) out.upper_dev = dev;
  }
  return out;
}

void write_qvi_solution_csv(const std::filesystem::path& path, const QviSolution& sol) {
  auto out = csv::open_for_write(path);
  out << "S,c,V,region\n";
  const QviProblem& p = sol.problem;
  for (std::size_t j = 0; j < p.c_grid.n; ++j) {
    for (std::size_t i = 0; i < p.s_grid.n; ++i) {
      out << csv::format(p.s_grid.at(i)) << ',' << csv::format(p.c_grid.at(j)) << ','
          << csv::format(sol.value(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) << ','
          << (sol.region[j][i] == Region::Jump ? "jump" : "continuation") << '\n';
    }
  }
}

void write_qvi_boundary_csv(const std::filesystem::path& path, const QviSolution& sol) {
  auto out = csv::open_for_write(path);
  out << "c,lower_dev,upper_dev\n";
  auto fmt = [](const std::optional<double>& d) { return d ? csv::format(*d) : std::string("nan"); };
  for (const auto& b : sol.boundary) {
    out << csv::format(b.c) << ',' << fmt(b.lower_dev) << ',' << fmt(b.upper_dev) << '\n';
  }
}

}  // namespace lazylp
