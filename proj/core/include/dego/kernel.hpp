#pragma once

#include <Eigen/Dense>

namespace dego {

// Squared-exponential kernel with one lengthscale per input dimension:
//
//   k(x, x') = v * exp(-0.5 * sum_k (x_k - x'_k)^2 / l_k^2)
//
// Both the lengthscales and the signal variance are stored in log form so
// that unconstrained gradient steps keep them positive.
struct ArdParams {
  Eigen::VectorXd log_lengthscale;
  double log_variance = 0.0;

  int dim() const { return static_cast<int>(log_lengthscale.size()); }
  Eigen::VectorXd lengthscale() const { return log_lengthscale.array().exp(); }
  double variance() const { return std::exp(log_variance); }

  static ArdParams unit(int d) {
    ArdParams p;
    p.log_lengthscale = Eigen::VectorXd::Zero(d);
    p.log_variance = 0.0;
    return p;
  }
};

// Cross-covariance matrix k(A_i, B_j); A is n x d, B is p x d, result n x p.
Eigen::MatrixXd ard_rbf(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                        const ArdParams& params);

// Gram matrix k(A_i, A_j) with the diagonal pinned to exactly the signal
// variance and the off-diagonals symmetrized, so the result is an exactly
// symmetric matrix regardless of floating point evaluation order.
Eigen::MatrixXd ard_rbf_gram(const Eigen::MatrixXd& A, const ArdParams& params);

// Scaled pairwise squared distances sum_k (a_ik - b_jk)^2 / l_k^2, clamped at
// zero.  Shared by the kernel evaluation and its gradients.
Eigen::MatrixXd scaled_sqdist(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                              const Eigen::VectorXd& lengthscale);

}  // namespace dego
