#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace dego {

// Axis-aligned box of search bounds, one [lower, upper] pair per dimension.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Box() = default;
  Box(Eigen::VectorXd lo, Eigen::VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size()) throw std::invalid_argument("Box: bound sizes differ");
    for (Eigen::Index k = 0; k < lower.size(); ++k)
      if (!(lower[k] < upper[k])) throw std::invalid_argument("Box: lower must be < upper");
  }

  static Box uniform(int dim, double lo, double hi) {
    return Box(Eigen::VectorXd::Constant(dim, lo), Eigen::VectorXd::Constant(dim, hi));
  }

  int dim() const { return static_cast<int>(lower.size()); }

  Eigen::VectorXd width() const { return upper - lower; }

  Eigen::VectorXd clip(const Eigen::VectorXd& x) const {
    return x.cwiseMax(lower).cwiseMin(upper);
  }

  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const {
    return (x.array() >= lower.array() - tol).all() &&
           (x.array() <= upper.array() + tol).all();
  }
};

}  // namespace dego
