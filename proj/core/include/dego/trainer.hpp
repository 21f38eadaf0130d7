#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dego/dgp.hpp"
#include "dego/optim.hpp"
#include "dego/rng.hpp"
#include "dego/svgp.hpp"

namespace dego {

// Which optimizer family drives training.
enum class TrainerMode {
  kNatGrad,   // natural gradient on (M, S), Adam on the hyperparameters
  kAdamOnly,  // Adam on everything; S stays PSD through its Cholesky factor
};

struct TrainConfig {
  int iter = 5000;     // max optimization steps
  double tol = 1e-3;   // stop when the running best improves by less (nats)
  int window = 100;    // ...over this many trailing steps
  int s_train = 20;    // propagation samples per bound evaluation
  AdamConfig adam;     // hyperparameter step (and everything in kAdamOnly)
  // Per-layer natural-gradient step sizes in (0, 1]; empty means 0.1 for
  // every layer.  Earlier layers sit in a more multi-modal landscape, so
  // campaigns may start them lower.
  std::vector<double> nat_steps;
  int max_backoffs = 8;  // cap on the divide-by-10 step reductions
  TrainerMode mode = TrainerMode::kNatGrad;
  double noise_var_init = 1e-2;  // cold-start observation noise (standardized)
};

struct TraceRow {
  int step = 0;
  double elbo = 0.0;  // bound value before this step's updates
  std::vector<double> nat_steps;
  double wall_ms = 0.0;  // cumulative
};

struct TrainResult {
  double best_elbo = 0.0;
  int steps = 0;  // iterations actually run
  std::vector<TraceRow> trace;
};

// One natural-gradient update of a single Gaussian q = N(mean, cov):
//
//   theta <- theta + step * dL/deta
//
// where theta are the natural and eta the expectation parameters, and the
// eta-gradient is assembled by chain rule from the plain (mean, cov)
// gradients.  grad_cov must be the symmetric gradient of the bound.  Throws
// NotPositiveDefiniteError when the step leaves the Gaussian family; callers
// treat that as an oversized step.
GaussianMoments natgrad_step(const GaussianMoments& q, const Eigen::VectorXd& grad_mean,
                             const Eigen::MatrixXd& grad_cov, double step);

// Alternates one Adam step on the hyperparameters and one natural-gradient
// step on every layer's variational distribution, both computed from the
// same bound evaluation.  When a natural step produces a non-PSD covariance
// or non-finite parameters, every step size below the last layer is divided
// by 10 and the step is retried once; a still-failing step leaves the
// variational state untouched for that iteration.  Stops at cfg.iter or when
// the running best bound improves by at most cfg.tol over cfg.window steps.
// The model is updated in place to the last iterate.
TrainResult train(DgpModel& model, const TrainConfig& cfg, RngStream& rng);

// Re-expresses a trained model against standardizers refit to grown data so
// that training can continue from the previous optimum.  Inducing inputs,
// lengthscales and the mean map of the first layer move with the input
// rescaling; the last layer's variational moments, kernel variance and the
// observation noise move with the output rescaling.  The constant offsets a
// mean shift would add to hidden units have no parameter to land in and are
// dropped; they vanish when the data mean is unchanged and are O(1/n)
// otherwise.
DgpModel warm_start(const DgpModel& prev, const Eigen::MatrixXd& X_raw,
                    const Eigen::VectorXd& y_raw);

// Cold fit: initialize at the variational prior and train.
DgpModel fit_dgp(const Eigen::MatrixXd& X_raw, const Eigen::VectorXd& y_raw,
                 const DgpArchitecture& arch, const TrainConfig& cfg, RngStream& rng,
                 TrainResult* result = nullptr);

// Warm fit: remap the previous model to the grown data and keep training.
DgpModel fit_dgp_warm(const Eigen::MatrixXd& X_raw, const Eigen::VectorXd& y_raw,
                      const DgpModel& prev, const TrainConfig& cfg, RngStream& rng,
                      TrainResult* result = nullptr);

}  // namespace dego
