#include "dego/kernel.hpp"

#include <stdexcept>

namespace dego {

Eigen::MatrixXd scaled_sqdist(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                              const Eigen::VectorXd& lengthscale) {
  if (A.cols() != B.cols() || A.cols() != lengthscale.size())
    throw std::invalid_argument("scaled_sqdist: dimension mismatch");
  const Eigen::MatrixXd As = A.array().rowwise() / lengthscale.transpose().array();
  const Eigen::MatrixXd Bs = B.array().rowwise() / lengthscale.transpose().array();
  const Eigen::VectorXd a2 = As.rowwise().squaredNorm();
  const Eigen::VectorXd b2 = Bs.rowwise().squaredNorm();
  Eigen::MatrixXd D = -2.0 * As * Bs.transpose();
  D.colwise() += a2;
  D.rowwise() += b2.transpose();
  return D.cwiseMax(0.0);
}

Eigen::MatrixXd ard_rbf(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                        const ArdParams& params) {
  const Eigen::MatrixXd D = scaled_sqdist(A, B, params.lengthscale());
  return params.variance() * (-0.5 * D.array()).exp();
}

Eigen::MatrixXd ard_rbf_gram(const Eigen::MatrixXd& A, const ArdParams& params) {
  Eigen::MatrixXd K = ard_rbf(A, A, params);
  K = 0.5 * (K + K.transpose()).eval();
  K.diagonal().setConstant(params.variance());
  return K;
}

}  // namespace dego
