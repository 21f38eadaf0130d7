#pragma once

#include <Eigen/Dense>

namespace dego {

// Per-column affine map to zero mean and unit variance.  Columns with
// (numerically) zero spread keep their mean shift and a unit scale, so the
// transform is always invertible.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& X) {
    Standardizer s;
    s.mean = X.colwise().mean();
    const Eigen::Index n = X.rows();
    Eigen::MatrixXd C = X.rowwise() - s.mean.transpose();
    s.scale = (C.array().square().colwise().sum() / static_cast<double>(n))
                  .sqrt()
                  .transpose();
    for (Eigen::Index k = 0; k < s.scale.size(); ++k)
      if (!(s.scale[k] > 1e-12)) s.scale[k] = 1.0;
    return s;
  }

  static Standardizer identity(int d) {
    Standardizer s;
    s.mean = Eigen::VectorXd::Zero(d);
    s.scale = Eigen::VectorXd::Ones(d);
    return s;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const {
    return (X.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
  }

  Eigen::MatrixXd invert(const Eigen::MatrixXd& Z) const {
    return (Z.array().rowwise() * scale.transpose().array()).matrix().rowwise() +
           mean.transpose();
  }

  // Variance transforms for a single-column standardizer (outputs).
  double var_to_standard(double v) const { return v / (scale[0] * scale[0]); }
  double var_to_raw(double v) const { return v * scale[0] * scale[0]; }
};

}  // namespace dego
