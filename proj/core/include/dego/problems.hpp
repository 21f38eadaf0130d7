#pragma once

#include <dego/problem.hpp>

#include <optional>
#include <string>
#include <vector>

namespace dego {

// Analytical benchmark functions.  Every evaluator is pure and throws
// std::domain_error when the input leaves its box (or has the wrong size).

// Bent 1d curve on [0, 1]: oscillatory near the left edge, nearly flat over
// [0.4, 1].  Useful for exercising surrogates on non-stationary behaviour.
double xiong(double x);

// Non-stationary constraint surface on [0, 1]^2; feasible where the value
// is <= 0.  The 1e-8 in the denominator keeps the arctan finite on the
// x1 = 0 edge.
double tnk_constraint(const Eigen::VectorXd& x);

// 10d quadratic with coupled neighbour terms on [-100, 100]^10.  Global
// minimum -210 at x_i = i(11 - i).
double trid10(const Eigen::VectorXd& x);

// Classic 6d four-peak exponential test function on [0, 1]^6.  Global
// minimum approx. -3.322.
double hartmann6(const Eigen::VectorXd& x);

// Ready-made Problem instances for the functions above.
Problem xiong_problem();
Problem trid10_problem();
Problem hartmann6_problem();

// 1d sanity problem: (x - 0.3)^2 on [0, 1], minimum 0 at x = 0.3.
Problem quad1d();

// Quadratic objective scale * ((x0 - c0)^2 + (x1 - c1)^2) on [0, 1]^2,
// subject to tnk_constraint(x) <= 0.  The feasible minimum of the default
// (origin-centered, unit-scale) objective is approx. 0.0559 near
// (0.174, 0.161); no exact published value exists, so known_minimum is
// left unset.
Problem constrained2d(const Eigen::Vector2d& center = Eigen::Vector2d::Zero(),
                      double scale = 1.0);

// Registry of the benchmark problems, listable by name.
struct BenchmarkEntry {
  std::string name;
  int dim;
  Box bounds;
  std::optional<double> known_minimum;
  Problem (*make)();
};

const std::vector<BenchmarkEntry>& benchmark_registry();

// Builds the registered problem with the given name.  Throws
// std::invalid_argument for unknown names.
Problem problem_by_name(const std::string& name);

}  // namespace dego
