#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dego/kernel.hpp"
#include "dego/linalg.hpp"

namespace dego {

// One sparse variational GP layer mapping d_in columns to d_out columns.
//
// The layer decomposes as  output = H W + g(H)  where W is a fixed linear
// mean map (zero for a final regression layer, a truncated identity for
// hidden layers) and g is a zero-mean GP with an anisotropic
// squared-exponential kernel shared across output columns.  Each output
// column c keeps its own Gaussian over the whitened inducing values
// u_c = L^{-1} g(Z)_c, where L is the lower Cholesky factor of k(Z, Z):
//
//   q(u_c) = N(M.col(c), S[c]),   prior p(u_c) = N(0, I).
//
// The whitened coordinates keep every natural-parameter update inside the
// Gaussian family regardless of how ill-conditioned k(Z, Z) is, and make
// the variational state invariant under affine remaps of the data.
struct SvgpLayer {
  Eigen::MatrixXd Z;               // inducing inputs, m x d_in
  ArdParams kernel;                // d_in lengthscales
  Eigen::MatrixXd mean_W;          // fixed mean map, d_in x d_out
  Eigen::MatrixXd M;               // variational means, m x d_out
  std::vector<Eigen::MatrixXd> S;  // variational covariances, d_out of m x m

  int m() const { return static_cast<int>(Z.rows()); }
  int d_in() const { return static_cast<int>(Z.cols()); }
  int d_out() const { return static_cast<int>(mean_W.cols()); }

  // Truncated identity: copies the first min(d_in, d_out) coordinates.
  static Eigen::MatrixXd identity_mean(int d_in, int d_out) {
    return Eigen::MatrixXd::Identity(d_in, d_out);
  }

  static Eigen::MatrixXd zero_mean(int d_in, int d_out) {
    return Eigen::MatrixXd::Zero(d_in, d_out);
  }

  // Layer whose variational distribution equals the prior: M = 0, S = I.
  static SvgpLayer at_prior(Eigen::MatrixXd Z, ArdParams kernel, Eigen::MatrixXd mean_W);
};

// Marginal moments of the layer output at rows of H, column per output dim:
//
//   mean = H W + Phi M                   Phi = k(H, Z) L^{-T}
//   var_c = k_diag - diag(Phi Phi') + diag(Phi S_c Phi')
//
// Variances are clamped at zero.  Pass a prefactored k(Z,Z) to amortize the
// factorization over many calls against the same layer.
struct ConditionalMoments {
  Eigen::MatrixXd mean;  // r x d_out
  Eigen::MatrixXd var;   // r x d_out
};
ConditionalMoments sparse_conditional(const SvgpLayer& layer, const Eigen::MatrixXd& H,
                                      const PsdFactor* kzz = nullptr);

// KL(q || p) summed over output columns; against the whitened prior N(0, I)
// this is free of the kernel entirely:
//   0.5 * [tr(S_c) + M_c' M_c - m - log det S_c]
double kl_to_prior(const SvgpLayer& layer);

// ----- Gaussian coordinate systems -----------------------------------------
//
// The variational updates walk the Gaussian in its natural coordinates while
// gradients arrive in expectation coordinates; these helpers convert between
// the three parameterizations of N(mean, cov):
//
//   natural:      theta1 = cov^{-1} mean,    theta2 = -0.5 cov^{-1}
//   expectation:  eta1 = mean,               eta2 = cov + mean mean'

struct GaussianMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

struct GaussianNatural {
  Eigen::VectorXd theta1;
  Eigen::MatrixXd theta2;
};

struct GaussianExpectation {
  Eigen::VectorXd eta1;
  Eigen::MatrixXd eta2;
};

GaussianNatural natural_from_moments(const GaussianMoments& g);
// Throws NotPositiveDefiniteError when theta2 is not negative definite.
GaussianMoments moments_from_natural(const GaussianNatural& g);
GaussianExpectation expectation_from_moments(const GaussianMoments& g);
GaussianMoments moments_from_expectation(const GaussianExpectation& g);

}  // namespace dego
