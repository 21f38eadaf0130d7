#pragma once

#include <Eigen/Dense>
#include <dego/box.hpp>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dego {

using Evaluator = std::function<double(const Eigen::VectorXd&)>;

// A bounded minimization task: minimize objective(x) over the box, subject to
// every constraint evaluating to <= 0.  Evaluators must be pure: repeated
// calls with the same input return the same value.
struct Problem {
  std::string name;
  Box bounds;
  Evaluator objective;
  std::vector<Evaluator> constraints;
  // Published optimum for reporting (optimality gaps); never used by solvers.
  std::optional<double> known_minimum;

  int dim() const { return bounds.dim(); }

  bool feasible(const Eigen::VectorXd& x) const {
    for (const auto& g : constraints)
      if (g(x) > 0.0) return false;
    return true;
  }
};

}  // namespace dego
