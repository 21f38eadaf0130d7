#include <dego/problems.hpp>

#include <cmath>
#include <stdexcept>
#include <string>

namespace dego {
namespace {

void check_box(const Eigen::VectorXd& x, int dim, double lo, double hi,
               const char* fn) {
  if (x.size() != dim)
    throw std::domain_error(std::string(fn) + ": expected " +
                            std::to_string(dim) + " coordinates, got " +
                            std::to_string(x.size()));
  for (Eigen::Index k = 0; k < x.size(); ++k)
    if (!(x[k] >= lo && x[k] <= hi))
      throw std::domain_error(std::string(fn) + ": coordinate " +
                              std::to_string(k) + " outside [" +
                              std::to_string(lo) + ", " + std::to_string(hi) +
                              "]");
}

}  // namespace

double xiong(double x) {
  if (!(x >= 0.0 && x <= 1.0))
    throw std::domain_error("xiong: input outside [0, 1]");
  const double t = x - 0.85;
  const double t4 = t * t * t * t;
  return -0.5 * (std::sin(40.0 * t4) * std::cos(2.5 * (x - 0.95)) +
                 0.5 * (x - 0.9) + 1.0);
}

double tnk_constraint(const Eigen::VectorXd& x) {
  check_box(x, 2, 0.0, 1.0, "tnk_constraint");
  const double u = x[0] - 0.6;
  const double v = x[1] - 0.6;
  return 1.6 * u * u + 1.6 * v * v -
         0.2 * std::cos(20.0 * std::atan(0.3 * x[0] / (x[1] + 1e-8))) - 0.4;
}

double trid10(const Eigen::VectorXd& x) {
  check_box(x, 10, -100.0, 100.0, "trid10");
  double squares = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double t = x[i] - 1.0;
    squares += t * t;
  }
  double cross = 0.0;
  for (int i = 1; i < 10; ++i) cross += x[i] * x[i - 1];
  return squares - cross;
}

double hartmann6(const Eigen::VectorXd& x) {
  check_box(x, 6, 0.0, 1.0, "hartmann6");
  static constexpr double kAlpha[4] = {1.0, 1.2, 3.0, 3.2};
  static constexpr double kA[4][6] = {
      {10.0, 3.0, 17.0, 3.5, 1.7, 8.0},
      {0.05, 10.0, 17.0, 0.1, 8.0, 14.0},
      {3.0, 3.5, 1.7, 10.0, 17.0, 8.0},
      {17.0, 8.0, 0.05, 10.0, 0.1, 14.0},
  };
  // The peak locations are these integers scaled by 1e-4.
  static constexpr double kP[4][6] = {
      {1312, 1696, 5569, 124, 8283, 5886},
      {2329, 4135, 8307, 3736, 1004, 9991},
      {2348, 1451, 3522, 2883, 3047, 6650},
      {4047, 8828, 8732, 5743, 1091, 381},
  };
  double f = 0.0;
  for (int i = 0; i < 4; ++i) {
    double s = 0.0;
    for (int j = 0; j < 6; ++j) {
      const double d = x[j] - 1e-4 * kP[i][j];
      s += kA[i][j] * d * d;
    }
    f -= kAlpha[i] * std::exp(-s);
  }
  return f;
}

Problem xiong_problem() {
  Problem p;
  p.name = "xiong";
  p.bounds = Box::uniform(1, 0.0, 1.0);
  p.objective = [](const Eigen::VectorXd& x) {
    if (x.size() != 1) throw std::domain_error("xiong: expected 1 coordinate");
    return xiong(x[0]);
  };
  return p;
}

Problem trid10_problem() {
  Problem p;
  p.name = "trid10";
  p.bounds = Box::uniform(10, -100.0, 100.0);
  p.objective = trid10;
  p.known_minimum = -210.0;
  return p;
}

Problem hartmann6_problem() {
  Problem p;
  p.name = "hartmann6";
  p.bounds = Box::uniform(6, 0.0, 1.0);
  p.objective = hartmann6;
  p.known_minimum = -3.322;
  return p;
}

Problem quad1d() {
  Problem p;
  p.name = "quad1d";
  p.bounds = Box::uniform(1, 0.0, 1.0);
  p.objective = [](const Eigen::VectorXd& x) {
    if (x.size() != 1) throw std::domain_error("quad1d: expected 1 coordinate");
    const double t = x[0] - 0.3;
    return t * t;
  };
  p.known_minimum = 0.0;
  return p;
}

Problem constrained2d(const Eigen::Vector2d& center, double scale) {
  Problem p;
  p.name = "constrained2d";
  p.bounds = Box::uniform(2, 0.0, 1.0);
  p.objective = [center, scale](const Eigen::VectorXd& x) {
    check_box(x, 2, 0.0, 1.0, "constrained2d");
    const double u = x[0] - center[0];
    const double v = x[1] - center[1];
    return scale * (u * u + v * v);
  };
  p.constraints.push_back(tnk_constraint);
  return p;
}

const std::vector<BenchmarkEntry>& benchmark_registry() {
  static const std::vector<BenchmarkEntry> entries = {
      {"xiong", 1, Box::uniform(1, 0.0, 1.0), std::nullopt, &xiong_problem},
      {"quad1d", 1, Box::uniform(1, 0.0, 1.0), 0.0, &quad1d},
      {"constrained2d", 2, Box::uniform(2, 0.0, 1.0), std::nullopt,
       +[] { return constrained2d(); }},
      {"hartmann6", 6, Box::uniform(6, 0.0, 1.0), -3.322, &hartmann6_problem},
      {"trid10", 10, Box::uniform(10, -100.0, 100.0), -210.0,
       &trid10_problem},
  };
  return entries;
}

Problem problem_by_name(const std::string& name) {
  for (const auto& entry : benchmark_registry())
    if (entry.name == name) return entry.make();
  std::string known;
  for (const auto& entry : benchmark_registry()) {
    if (!known.empty()) known += ", ";
    known += entry.name;
  }
  throw std::invalid_argument("unknown problem '" + name + "' (known: " +
                              known + ")");
}

}  // namespace dego
