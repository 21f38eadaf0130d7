#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dego/problems.hpp"
#include "dego/rng.hpp"

using Eigen::VectorXd;

namespace {

// Frozen values from a 30-digit arithmetic oracle evaluating the same
// formulas.  Double evaluation agrees to ~1e-15; the tolerance leaves room.
constexpr double kValueTol = 1e-12;

VectorXd vec2(double a, double b) {
  VectorXd x(2);
  x << a, b;
  return x;
}

VectorXd random_point(const dego::Box& box, dego::RngStream& rng) {
  VectorXd x(box.dim());
  for (int k = 0; k < box.dim(); ++k) x[k] = rng.uniform(box.lower[k], box.upper[k]);
  return x;
}

}  // namespace

TEST(Xiong, MatchesHighPrecisionOracle) {
  EXPECT_NEAR(dego::xiong(0.0), 0.047720007728222355745, kValueTol);
  EXPECT_NEAR(dego::xiong(0.35), -0.38366712237499206382, kValueTol);
  EXPECT_NEAR(dego::xiong(0.5), -0.52177476681994594167, kValueTol);
  EXPECT_NEAR(dego::xiong(0.9), -0.50012402470711174209, kValueTol);
  EXPECT_NEAR(dego::xiong(1.0), -0.53504531481336702162, kValueTol);
}

TEST(Xiong, ThrowsOutsideItsInterval) {
  EXPECT_THROW(dego::xiong(-0.01), std::domain_error);
  EXPECT_THROW(dego::xiong(1.01), std::domain_error);
  EXPECT_THROW(dego::xiong(std::nan("")), std::domain_error);
}

TEST(Xiong, IsContinuousOnAFineGrid) {
  for (int k = 0; k < 100; ++k) {
    const double x = k / 101.0;
    EXPECT_LT(std::abs(dego::xiong(x) - dego::xiong(x + 1e-9)), 1e-6);
  }
}

TEST(Xiong, FlatRegionVariesLessThanTheOscillatoryRegion) {
  const double h = 1e-6;
  auto max_slope = [h](double lo, double hi) {
    double worst = 0.0;
    for (int k = 0; k <= 600; ++k) {
      const double x = lo + (hi - lo) * k / 600.0;
      const double fd = (dego::xiong(x + h) - dego::xiong(x - h)) / (2.0 * h);
      worst = std::max(worst, std::abs(fd));
    }
    return worst;
  };
  const double oscillatory = max_slope(h, 0.3);
  const double flat = max_slope(0.4, 1.0 - h);
  EXPECT_LT(flat, oscillatory);
  // The contrast is strong, not marginal: ~1.6 versus ~31.
  EXPECT_LT(flat, 5.0);
  EXPECT_GT(oscillatory, 20.0);
}

TEST(Tnk, MatchesHighPrecisionOracle) {
  EXPECT_NEAR(dego::tnk_constraint(vec2(0.6, 0.6)), -0.57973566543403328457, kValueTol);
  EXPECT_NEAR(dego::tnk_constraint(vec2(0.3, 0.0)), 0.12000000000049382716, kValueTol);
  EXPECT_NEAR(dego::tnk_constraint(vec2(1.0, 1.0)), -0.067735668653176767189, kValueTol);
  EXPECT_NEAR(dego::tnk_constraint(vec2(0.0, 0.0)), 0.552, kValueTol);
  EXPECT_NEAR(dego::tnk_constraint(vec2(0.8, 0.2)), -0.12800680982147449863, kValueTol);
}

TEST(Tnk, IsFiniteOnTheLowerEdge) {
  for (int k = 0; k <= 10; ++k)
    EXPECT_TRUE(std::isfinite(dego::tnk_constraint(vec2(k / 10.0, 0.0))));
}

TEST(Tnk, OnlyTheArctanTermBreaksCoordinateSymmetry) {
  auto arctan_term = [](double a, double b) {
    return -0.2 * std::cos(20.0 * std::atan(0.3 * a / (b + 1e-8)));
  };
  dego::RngStream rng(7);
  for (int k = 0; k < 50; ++k) {
    const double a = rng.uniform(), b = rng.uniform();
    const double sym_ab = dego::tnk_constraint(vec2(a, b)) - arctan_term(a, b);
    const double sym_ba = dego::tnk_constraint(vec2(b, a)) - arctan_term(b, a);
    EXPECT_NEAR(sym_ab, sym_ba, 1e-15);
  }
}

TEST(Tnk, ThrowsOutsideTheBox) {
  EXPECT_THROW(dego::tnk_constraint(vec2(-0.1, 0.5)), std::domain_error);
  EXPECT_THROW(dego::tnk_constraint(vec2(0.5, 1.1)), std::domain_error);
  EXPECT_THROW(dego::tnk_constraint(VectorXd::Constant(3, 0.5)), std::domain_error);
}

TEST(Trid, AllOnesGivesExactlyMinusNine) {
  EXPECT_EQ(dego::trid10(VectorXd::Ones(10)), -9.0);
}

TEST(Trid, PublishedMinimizerAttainsThePublishedValue) {
  VectorXd x(10);
  for (int i = 1; i <= 10; ++i) x[i - 1] = i * (11.0 - i);
  EXPECT_NEAR(dego::trid10(x), -210.0, 1e-9);

  // Stationarity.  The function is quadratic, so a central difference is the
  // exact derivative for any step; h = 0.5 keeps the arithmetic dyadic.
  const double h = 0.5;
  for (int i = 0; i < 10; ++i) {
    VectorXd up = x, down = x;
    up[i] += h;
    down[i] -= h;
    EXPECT_NEAR((dego::trid10(up) - dego::trid10(down)) / (2.0 * h), 0.0, 1e-9);
  }
}

TEST(Trid, MatchesHighPrecisionOracleAtADyadicPoint) {
  VectorXd x(10);
  x << 3.75, -2.25, 0.5, 11.0, -40.0, 7.25, 99.5, -99.5, 0.125, 1.0;
  EXPECT_NEAR(dego::trid10(x), 31566.953125, 1e-9);
}

TEST(Trid, ThrowsOutsideTheBox) {
  EXPECT_THROW(dego::trid10(VectorXd::Constant(10, 100.5)), std::domain_error);
  EXPECT_THROW(dego::trid10(VectorXd::Ones(9)), std::domain_error);
}

TEST(Trid, PublishedMinimumIsALowerBoundOverAMillionRandomPoints) {
  dego::RngStream rng(20260819);
  const dego::Box box = dego::Box::uniform(10, -100.0, 100.0);
  VectorXd x(10);
  double best = 0.0;
  for (int s = 0; s < 1000000; ++s) {
    for (int k = 0; k < 10; ++k) x[k] = rng.uniform(box.lower[k], box.upper[k]);
    best = std::min(best, dego::trid10(x));
  }
  EXPECT_GE(best, -210.0 - 1e-9);
}

TEST(Hartmann, MatchesHighPrecisionOracle) {
  VectorXd xstar(6);
  xstar << 0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573;
  EXPECT_NEAR(dego::hartmann6(xstar), -3.3223680113913386495, kValueTol);
  EXPECT_NEAR(dego::hartmann6(VectorXd::Constant(6, 0.5)),
              -0.50531499170223313651, kValueTol);
  VectorXd dyadic(6);
  dyadic << 0.125, 0.25, 0.375, 0.5, 0.625, 0.75;
  EXPECT_NEAR(dego::hartmann6(dyadic), -0.4784007916743016858, kValueTol);
}

TEST(Hartmann, ClassicMinimizerReachesThePublishedMinimum) {
  VectorXd xstar(6);
  xstar << 0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573;
  EXPECT_LE(dego::hartmann6(xstar), -3.322);
}

TEST(Hartmann, IsNegativeEverywhere) {
  dego::RngStream rng(11);
  const dego::Box box = dego::Box::uniform(6, 0.0, 1.0);
  for (int s = 0; s < 1000; ++s)
    EXPECT_LT(dego::hartmann6(random_point(box, rng)), 0.0);
}

TEST(Hartmann, ThrowsOutsideTheBox) {
  EXPECT_THROW(dego::hartmann6(VectorXd::Constant(6, -0.2)), std::domain_error);
  EXPECT_THROW(dego::hartmann6(VectorXd::Constant(5, 0.5)), std::domain_error);
}

TEST(Hartmann, PublishedMinimumIsALowerBoundOverAMillionRandomPoints) {
  dego::RngStream rng(20260820);
  VectorXd x(6);
  double best = 0.0;
  for (int s = 0; s < 1000000; ++s) {
    for (int k = 0; k < 6; ++k) x[k] = rng.uniform();
    best = std::min(best, dego::hartmann6(x));
  }
  EXPECT_GE(best, -3.322 - 1e-9);
}

TEST(Evaluators, RepeatedEvaluationAgreesBitwise) {
  dego::RngStream rng(23);
  for (int s = 0; s < 100; ++s) {
    const double x1 = rng.uniform();
    EXPECT_EQ(dego::xiong(x1), dego::xiong(x1));

    const VectorXd x2 = random_point(dego::Box::uniform(2, 0.0, 1.0), rng);
    EXPECT_EQ(dego::tnk_constraint(x2), dego::tnk_constraint(x2));

    const VectorXd x10 = random_point(dego::Box::uniform(10, -100.0, 100.0), rng);
    EXPECT_EQ(dego::trid10(x10), dego::trid10(x10));

    const VectorXd x6 = random_point(dego::Box::uniform(6, 0.0, 1.0), rng);
    EXPECT_EQ(dego::hartmann6(x6), dego::hartmann6(x6));
  }
}

TEST(Constrained2d, DefaultObjectiveIsTheOriginCenteredQuadratic) {
  const dego::Problem p = dego::constrained2d();
  EXPECT_EQ(p.objective(vec2(0.0, 0.0)), 0.0);
  EXPECT_EQ(p.objective(vec2(0.3, 0.4)), 0.3 * 0.3 + 0.4 * 0.4);
  EXPECT_FALSE(p.known_minimum.has_value());
}

TEST(Constrained2d, CustomCenterAndScaleMoveTheQuadratic) {
  const dego::Problem p = dego::constrained2d(Eigen::Vector2d(0.3, 0.4), 2.0);
  EXPECT_EQ(p.objective(vec2(0.3, 0.4)), 0.0);
  EXPECT_NEAR(p.objective(vec2(0.8, 0.4)), 0.5, 1e-15);
}

TEST(Constrained2d, ConstraintDelegatesToTheSharedSurface) {
  const dego::Problem p = dego::constrained2d();
  ASSERT_EQ(p.constraints.size(), 1u);
  dego::RngStream rng(31);
  for (int s = 0; s < 50; ++s) {
    const VectorXd x = random_point(p.bounds, rng);
    EXPECT_EQ(p.constraints[0](x), dego::tnk_constraint(x));
    EXPECT_EQ(p.feasible(x), dego::tnk_constraint(x) <= 0.0);
  }
}

TEST(Constrained2d, FeasibleRegionIsNonemptyOnADenseGrid) {
  const dego::Problem p = dego::constrained2d();
  int feasible = 0, infeasible = 0;
  for (int i = 0; i < 200; ++i)
    for (int j = 0; j < 200; ++j) {
      if (p.feasible(vec2(i / 199.0, j / 199.0)))
        ++feasible;
      else
        ++infeasible;
    }
  EXPECT_GT(feasible, 0);
  EXPECT_GT(infeasible, 0);
}

TEST(Problem, FeasibleRequiresEveryConstraintNonpositive) {
  dego::Problem p;
  p.bounds = dego::Box::uniform(1, -2.0, 2.0);
  p.objective = [](const VectorXd& x) { return x[0]; };
  p.constraints.push_back([](const VectorXd& x) { return x[0] - 1.0; });
  p.constraints.push_back([](const VectorXd& x) { return -x[0] - 1.0; });
  EXPECT_TRUE(p.feasible(VectorXd::Zero(1)));
  EXPECT_TRUE(p.feasible(VectorXd::Ones(1)));
  EXPECT_FALSE(p.feasible(VectorXd::Constant(1, 1.5)));
  EXPECT_FALSE(p.feasible(VectorXd::Constant(1, -1.5)));
}

TEST(Quad1d, MinimumSitsAtThreeTenths) {
  const dego::Problem p = dego::quad1d();
  EXPECT_EQ(p.objective(VectorXd::Constant(1, 0.3)), 0.0);
  EXPECT_NEAR(p.objective(VectorXd::Ones(1)), 0.49, 1e-15);
  ASSERT_TRUE(p.known_minimum.has_value());
  EXPECT_EQ(*p.known_minimum, 0.0);
}

TEST(Registry, EntriesMatchTheProblemsTheyBuild) {
  const auto& entries = dego::benchmark_registry();
  ASSERT_EQ(entries.size(), 5u);
  for (const auto& entry : entries) {
    const dego::Problem p = entry.make();
    EXPECT_EQ(p.name, entry.name);
    EXPECT_EQ(p.dim(), entry.dim);
    EXPECT_EQ(p.bounds.lower, entry.bounds.lower);
    EXPECT_EQ(p.bounds.upper, entry.bounds.upper);
    EXPECT_EQ(p.known_minimum, entry.known_minimum);
    ASSERT_TRUE(p.objective);
    // Every registered evaluator is total on its box.
    dego::RngStream rng(41);
    for (int s = 0; s < 20; ++s) {
      const VectorXd x = random_point(p.bounds, rng);
      EXPECT_TRUE(std::isfinite(p.objective(x)));
      for (const auto& g : p.constraints) EXPECT_TRUE(std::isfinite(g(x)));
    }
  }
}

TEST(Registry, LooksProblemsUpByName) {
  EXPECT_EQ(dego::problem_by_name("trid10").dim(), 10);
  EXPECT_EQ(dego::problem_by_name("hartmann6").dim(), 6);
  EXPECT_THROW(dego::problem_by_name("rosenbrock"), std::invalid_argument);
}
