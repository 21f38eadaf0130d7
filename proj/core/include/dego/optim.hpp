#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace dego {

struct AdamConfig {
  double learning_rate = 0.01;
  double beta1 = 0.8;
  double beta2 = 0.9;
  double epsilon = 1e-8;
};

// Adam moment accumulator for gradient ascent on a flat parameter vector.
class AdamState {
 public:
  AdamState(Eigen::Index dim, AdamConfig cfg = {})
      : cfg_(cfg), m_(Eigen::VectorXd::Zero(dim)), v_(Eigen::VectorXd::Zero(dim)) {}

  Eigen::Index dim() const { return m_.size(); }
  const AdamConfig& config() const { return cfg_; }

  // Bias-corrected ascent update for the current gradient.  Add the result
  // to the parameters.
  Eigen::VectorXd update(const Eigen::VectorXd& grad) {
    if (grad.size() != m_.size()) throw std::invalid_argument("AdamState: gradient size mismatch");
    ++t_;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
    v_ = cfg_.beta2 * v_.array().matrix() + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    const Eigen::VectorXd mhat = m_ / bc1;
    const Eigen::VectorXd vhat = v_ / bc2;
    return (cfg_.learning_rate * mhat.array() / (vhat.array().sqrt() + cfg_.epsilon)).matrix();
  }

 private:
  AdamConfig cfg_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  long t_ = 0;
};

// One ascent step: returns params moved along the bias-corrected direction.
inline Eigen::VectorXd adam_step(AdamState& state, const Eigen::VectorXd& params,
                                 const Eigen::VectorXd& grad) {
  return params + state.update(grad);
}

}  // namespace dego
