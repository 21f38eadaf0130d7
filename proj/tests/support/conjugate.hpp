#pragma once

// Shared one-layer fixture in the conjugate configuration: inducing points
// at the training inputs, Gaussian likelihood, identity standardizers.  In
// this setting the variational bound can be made tight and every quantity
// has a closed dense-GP counterpart to test against.

#include <Eigen/Dense>
#include <cmath>

#include "dego/dgp.hpp"
#include "dego/gp.hpp"
#include "dego/lhs.hpp"
#include "dego/linalg.hpp"
#include "dego/rng.hpp"

namespace conjugate {

// Keep lengthscales short relative to the point spacing: cond(K) explodes
// with smoother fixtures and drowns the exact identities in rounding noise.
inline dego::DgpModel model(int n, double lengthscale, double noise, dego::RngStream& rng) {
  const dego::Box box = dego::Box::uniform(1, 0, 1);
  Eigen::MatrixXd X = dego::lhs_sample(n, box, rng);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = std::sin(5 * X(i, 0)) + 0.2 * X(i, 0);

  dego::DgpModel m;
  m.X = X;
  m.y = y;
  m.x_std = dego::Standardizer::identity(1);
  m.y_std = dego::Standardizer::identity(1);
  m.log_noise = std::log(noise);
  dego::ArdParams k = dego::ArdParams::unit(1);
  k.log_lengthscale[0] = std::log(lengthscale);
  m.layers.push_back(dego::SvgpLayer::at_prior(X, k, dego::SvgpLayer::zero_mean(1, 1)));
  return m;
}

// Exact posterior of the conjugate model in whitened coordinates.  With
// K = L L' the posterior over u = L^{-1} f(Z) inverts only the
// well-conditioned K + s2*I:
//   S* = I - L' (K + s2 I)^-1 L,   M* = L' (K + s2 I)^-1 y.
inline void set_exact_posterior(dego::DgpModel& m) {
  const Eigen::MatrixXd K = dego::ard_rbf_gram(m.layers[0].Z, m.layers[0].kernel);
  const dego::PsdFactor fk = dego::chol_psd(K);
  const Eigen::MatrixXd& L = fk.matrix_l();
  const double s2 = m.noise_var() + fk.jitter();
  const Eigen::MatrixXd Kn = K + s2 * Eigen::MatrixXd::Identity(K.rows(), K.cols());
  const dego::PsdFactor f = dego::chol_psd(Kn);
  const Eigen::MatrixXd Spost =
      Eigen::MatrixXd::Identity(K.rows(), K.cols()) - L.transpose() * f.solve(L);
  m.layers[0].S[0] = 0.5 * (Spost + Spost.transpose());
  m.layers[0].M = L.transpose() * f.solve(m.y);
}

inline dego::GpModel matching_gp(const dego::DgpModel& m) {
  dego::GpModel gp;
  gp.X = m.X;
  gp.y = m.y;
  gp.kernel = m.layers[0].kernel;
  gp.mean_const = 0.0;
  gp.noise_var = m.noise_var();
  gp.x_std = dego::Standardizer::identity(1);
  gp.y_std = dego::Standardizer::identity(1);
  return gp;
}

}  // namespace conjugate
