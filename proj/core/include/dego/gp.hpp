#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "dego/kernel.hpp"
#include "dego/standardize.hpp"

namespace dego {

// Gaussian process regressor with a constant mean, anisotropic
// squared-exponential kernel and Gaussian observation noise.  Training data
// and hyperparameters are stored in standardized coordinates; predictions
// are mapped back to the raw scales of the data the model was fit on.
struct GpModel {
  Eigen::MatrixXd X;          // standardized inputs, n x d
  Eigen::VectorXd y;          // standardized outputs, n
  ArdParams kernel;
  double mean_const = 0.0;    // constant mean in standardized output space
  double noise_var = 0.0;     // observation noise variance, standardized space
  bool noise_trained = false;
  Standardizer x_std;
  Standardizer y_std;

  int dim() const { return static_cast<int>(X.cols()); }
  int n() const { return static_cast<int>(X.rows()); }
};

struct GpFitConfig {
  int adam_steps = 2000;
  int restarts = 5;
  double adam_lr = 0.01;
  double adam_beta1 = 0.8;
  double adam_beta2 = 0.9;
  // Stops a restart early when the best objective seen has not improved by
  // more than plateau_tol over the last plateau_window steps.
  int plateau_window = 100;
  double plateau_tol = 1e-7;
  bool train_noise = false;
  // Fixed observation noise variance (standardized output space) when
  // train_noise is false; initial value when it is true.
  double noise_var = 1e-8;
  std::uint64_t seed = 0;
};

struct GpLogMarginal {
  double value = 0.0;
  Eigen::VectorXd grad_log_lengthscale;
  double grad_log_variance = 0.0;
  double grad_log_noise = 0.0;  // with respect to log of the noise variance
};

struct GpPrediction {
  Eigen::VectorXd mean;  // raw output space
  Eigen::VectorXd var;   // latent function variance, raw output space
  Eigen::MatrixXd cov;   // optional full covariance (empty unless requested)
};

// Log marginal likelihood of the standardized data under the model, with
// analytic gradients for every log-form hyperparameter.  The constant mean
// is profiled out in closed form by generalized least squares before the
// gradients are taken, so they are total derivatives at the optimal mean.
GpLogMarginal log_marginal_likelihood(const GpModel& model);

// The generalized least squares estimate of the constant mean given the
// current kernel and noise.
double gp_mean_gls(const GpModel& model);

// Fits hyperparameters by Adam ascent on the log marginal likelihood with
// random restarts.  The first restart starts at unit lengthscales and unit
// signal variance; the remaining restarts draw log parameters from N(0, 1).
// The best parameters seen across all restarts win.  When warm_from is
// given, the first restart instead starts at its optimum remapped into the
// refit standardizers (lengthscales move with the per-dimension input
// scales, variances with the squared output scale).
GpModel fit_gp(const Eigen::MatrixXd& X_raw, const Eigen::VectorXd& y_raw,
               const GpFitConfig& cfg, const GpModel* warm_from = nullptr);

// Posterior of the latent function at new points (raw coordinates in, raw
// coordinates out).  The variance column is the diagonal of the posterior
// covariance, clamped at zero.
GpPrediction gp_posterior(const GpModel& model, const Eigen::MatrixXd& X_star_raw,
                          bool want_cov = false);

}  // namespace dego
