#include <cmath>
#include <fstream>
#include <string>

#include "lazylp/qvi.hpp"
#include "test_util.hpp"

using namespace lazylp;

namespace {

constexpr double kRho = 1e-4;

double ref_fee() { return reference_fee_rate(PoolConfig{}, kDefaultCapital, 10'000); }

QviProblem reference(double cost, double theta = 0.05, std::size_t n_s = 401, std::size_t n_c = 101) {
  return make_qvi_problem({theta, 100, 0.5}, kRho, ref_fee(), 0.002, cost, n_s, n_c);
}

std::size_t jump_count(const QviSolution& sol) {
  std::size_t n = 0;
  for (const auto& slice : sol.region)
    for (Region r : slice) n += r == Region::Jump;
  return n;
}

}  // namespace

TEST(QviSetup, ReferenceFeeAndRho) {
  EXPECT_NEAR(ref_fee(), 0.10 * 10'000 * 0.0005 * concentration(0.002) * 10'000 / 500'000, 1e-15);
  EXPECT_NEAR(rho_from_gamma(0.99), -std::log(0.99), 1e-15);
  EXPECT_NEAR(rho_from_gamma(0.99), 0.01005, 1e-5);
  const auto p = reference(4.5);
  const double sd = 0.5 / std::sqrt(0.1);
  EXPECT_NEAR(p.s_grid.lo, 100 - 6 * sd, 1e-9);
  EXPECT_NEAR(p.s_grid.hi, 100 + 6 * sd, 1e-9);
  EXPECT_EQ(p.s_grid.n, 401u);
  EXPECT_EQ(p.c_grid.n, 101u);
}

TEST(QviSetup, Validation) {
  auto p = reference(4.5);
  p.rho = 0;
  EXPECT_LAZYLP_ERROR(p.validate(), DomainError);
  p = reference(4.5);
  p.ou.sigma = 0;
  EXPECT_LAZYLP_ERROR(p.validate(), DegenerateDiffusion);
  p = reference(4.5);
  p.s_grid.n = 2;
  EXPECT_LAZYLP_ERROR(p.validate(), DomainError);
  p = reference(4.5);
  p.s_grid.lo = 99;
  p.s_grid.hi = 101;
  EXPECT_LAZYLP_ERROR(p.validate(), DomainError);
  EXPECT_LAZYLP_ERROR(solve_qvi(reference(4.5), 0.0), DomainError);
}

TEST(Qvi, PerpetuityWhenInterventionIsPointless) {
  auto p = make_qvi_problem({0.05, 100, 0.5}, kRho, 0.3, 0.5, 1e9, 101, 21);
  const auto sol = solve_qvi(p);
  ASSERT_TRUE(sol.converged);
  EXPECT_TRUE(sol.jump_region_empty());
  EXPECT_LT((sol.value.array() - 0.3 / kRho).abs().maxCoeff(), 1e-6 * 0.3 / kRho);
  const auto b = boundary_deviation(sol, 100);
  EXPECT_FALSE(b.lower_dev.has_value());
  EXPECT_FALSE(b.upper_dev.has_value());
}

TEST(Qvi, LargeCostMatchesPureContinuation) {
  const auto sol = solve_qvi(reference(1e9));
  ASSERT_TRUE(sol.converged);
  EXPECT_TRUE(sol.jump_region_empty());
  EXPECT_LT(qvi_residuals(sol).max_complementarity, 1e-6);
}

TEST(Qvi, FreeInterventionMakesCenterIrrelevant) {
  // With every off-diagonal node jumping, the outer iteration contracts at the
  // discount rate, so this structural check uses the gamma-matched rho.
  const auto p = make_qvi_problem({0.05, 100, 0.5}, rho_from_gamma(0.99), ref_fee(), 0.002, 0.0, 201, 51);
  const auto sol = solve_qvi(p);
  ASSERT_TRUE(sol.converged);
  for (std::size_t j = 0; j < p.c_grid.n; ++j)
    for (std::size_t i = 0; i < p.s_grid.n; ++i)
      EXPECT_NEAR(sol.value(i, j), sol.diagonal_value(i), 1e-6 * std::abs(sol.diagonal_value(i)));
  // Jump at the first node off the diagonal on both sides.
  const auto b = boundary_deviation(sol, 100);
  ASSERT_TRUE(b.lower_dev && b.upper_dev);
  EXPECT_LE(*b.lower_dev, 2 * p.s_grid.step() / 100);
  EXPECT_LE(*b.upper_dev, 2 * p.s_grid.step() / 100);
}

TEST(Qvi, ReferenceProblemFeasibleAndComplementary) {
  const auto sol = solve_qvi(reference(4.5));
  ASSERT_TRUE(sol.converged);
  const auto r = qvi_residuals(sol);
  EXPECT_LE(r.max_obstacle_violation, 1e-6);
  EXPECT_LE(r.max_complementarity, 1e-6);
  EXPECT_FALSE(sol.jump_region_empty());
  EXPECT_TRUE(sol.value.allFinite());
}

TEST(Qvi, JumpRegionShrinksWithCost) {
  const double costs[] = {2.25, 4.5, 9.0};
  QviSolution prev;
  for (int k = 0; k < 3; ++k) {
    const auto sol = solve_qvi(reference(costs[k]));
    ASSERT_TRUE(sol.converged);
    if (k > 0) {
      std::size_t violations = 0;
      for (std::size_t j = 0; j < sol.region.size(); ++j)
        for (std::size_t i = 0; i < sol.region[j].size(); ++i)
          violations += sol.region[j][i] == Region::Jump && prev.region[j][i] != Region::Jump;
      EXPECT_EQ(violations, 0u) << "C=" << costs[k];
      EXPECT_LE(jump_count(sol), jump_count(prev));
    }
    prev = sol;
  }
}

TEST(Qvi, WaitingGainsNearTheEdgeWithTheta) {
  const auto base = reference(4.5);
  QviSolution prev;
  for (int k = 0; k < 3; ++k) {
    auto p = base;
    p.ou.theta = 0.05 * (1 << k);
    const auto sol = solve_qvi(p);
    ASSERT_TRUE(sol.converged);
    if (k > 0) {
      std::size_t band = 0, violations = 0;
      for (std::size_t j = 0; j < p.c_grid.n; ++j) {
        const double c = p.c_grid.at(j);
        for (std::size_t i = 0; i < p.s_grid.n; ++i) {
          const double s = p.s_grid.at(i);
          const double d = std::abs(s / c - 1) / p.width;
          if (d <= 1 || d > 2 || (s - c) * (s - p.ou.mu) <= 0) continue;
          ++band;
          violations += sol.region[j][i] == Region::Jump && prev.region[j][i] != Region::Jump;
        }
      }
      EXPECT_GT(band, 0u);
      EXPECT_EQ(violations, 0u) << "theta=" << p.ou.theta;
    }
    prev = sol;
  }
}

TEST(Qvi, GridRefinementDrift) {
  const auto coarse = solve_qvi(reference(4.5, 0.05, 201, 101));
  const auto fine = solve_qvi(reference(4.5, 0.05, 401, 101));
  ASSERT_TRUE(coarse.converged && fine.converged);
  const double coarse_step = coarse.problem.s_grid.step();
  std::size_t compared = 0;
  for (std::size_t j = 0; j < coarse.boundary.size(); ++j) {
    const auto& a = coarse.boundary[j];
    const auto& b = fine.boundary[j];
    ASSERT_EQ(a.c, b.c);
    const double tol = coarse_step / a.c;
    if (a.lower_dev && b.lower_dev) {
      EXPECT_LT(std::abs(*a.lower_dev - *b.lower_dev), tol) << "c=" << a.c;
      ++compared;
    }
    if (a.upper_dev && b.upper_dev) {
      EXPECT_LT(std::abs(*a.upper_dev - *b.upper_dev), tol) << "c=" << a.c;
      ++compared;
    }
  }
  EXPECT_GT(compared, 10u);
}

TEST(Qvi, NoConvergenceFlag) {
  const auto sol = solve_qvi(reference(4.5), 1e-9, 1);
  EXPECT_FALSE(sol.converged);
  EXPECT_EQ(sol.iterations, 1u);
}

TEST(Qvi, CsvExports) {
  const auto p = make_qvi_problem({0.05, 100, 0.5}, kRho, ref_fee(), 0.002, 1e9, 51, 11);
  const auto sol = solve_qvi(p);
  const auto dir = lazylp::testing::scratch_dir();
  write_qvi_solution_csv(dir / "v.csv", sol);
  write_qvi_boundary_csv(dir / "b.csv", sol);
  std::ifstream v(dir / "v.csv"), b(dir / "b.csv");
  std::string line;
  std::getline(v, line);
  EXPECT_EQ(line, "S,c,V,region");
  int rows = 0;
  while (std::getline(v, line)) ++rows;
  EXPECT_EQ(rows, 51 * 11);
  std::getline(b, line);
  EXPECT_EQ(line, "c,lower_dev,upper_dev");
  std::getline(b, line);
  EXPECT_NE(line.find("nan,nan"), std::string::npos);
}
