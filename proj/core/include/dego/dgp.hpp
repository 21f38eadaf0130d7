#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "dego/ad.hpp"
#include "dego/rng.hpp"
#include "dego/standardize.hpp"
#include "dego/svgp.hpp"

namespace dego {

// Stack shape: input_dim columns enter the first layer, each hidden layer
// keeps its listed width, and a final single-output layer closes the stack.
// num_inducing is shared by every layer.
struct DgpArchitecture {
  int input_dim = 1;
  std::vector<int> hidden_widths;
  int num_inducing = 10;

  int depth() const { return static_cast<int>(hidden_widths.size()) + 1; }
};

// Composition of sparse variational GP layers with a Gaussian likelihood on
// the single output of the last layer.  Data and parameters live in
// standardized coordinates; predictions are mapped back to raw scales.
struct DgpModel {
  std::vector<SvgpLayer> layers;
  double log_noise = 0.0;  // log observation noise variance, standardized
  Eigen::MatrixXd X;       // standardized training inputs
  Eigen::VectorXd y;       // standardized training outputs
  Standardizer x_std;
  Standardizer y_std;

  int depth() const { return static_cast<int>(layers.size()); }
  int n() const { return static_cast<int>(X.rows()); }
  int input_dim() const { return static_cast<int>(X.cols()); }
  double noise_var() const { return std::exp(log_noise); }
};

// Builds a model at the variational prior.  Inducing inputs of every layer
// start from the (identity-mapped) training inputs, truncated to num_inducing
// rows or padded with a Latin hypercube over the data range when there are
// fewer points than inducing slots.  Hidden layers get truncated-identity
// mean maps, the final layer a zero mean.
DgpModel init_dgp(const Eigen::MatrixXd& X_raw, const Eigen::VectorXd& y_raw,
                  const DgpArchitecture& arch, double noise_var_init, RngStream& rng);

// ----- training objective ---------------------------------------------------

// How the variational parameters enter the differentiation graph: as (M, S)
// leaves for natural-gradient training, or as (M, L) with S = L L' for plain
// gradient ascent on the factor.
enum class VariationalForm { kMeanCov, kMeanFactor };

// Handles to every trainable leaf of one evidence-lower-bound evaluation.
struct DgpLayerVars {
  ad::Var Z;
  ad::Var log_lengthscale;
  ad::Var log_variance;
  ad::Var M;
  std::vector<ad::Var> S;       // kMeanCov: the covariances themselves
  std::vector<ad::Var> factor;  // kMeanFactor: lower-triangular factors
};

struct DgpGraph {
  ad::Tape tape;
  ad::Var elbo;
  std::vector<DgpLayerVars> layers;
  ad::Var log_noise;
};

// Per-sample standard normal draws for the stochastic forward pass: one
// (S * n) x width matrix per hidden layer transition.  Empty for a single
// layer stack, whose bound is evaluated in closed form.
std::vector<Eigen::MatrixXd> draw_propagation_noise(const DgpModel& model, int n_samples,
                                                    RngStream& rng);

// Builds the stochastic evidence lower bound
//
//   L = sum_i E_q[log p(y_i | h_i)] - sum_l KL(q(U_l) || p(U_l))
//
// over the model's training data with the given propagation draws, into a
// caller-owned graph (the tape pins Var handles to its address, so the graph
// is filled in place rather than returned).  The final-layer expectation is
// taken in closed form, so a one-layer stack yields the exact bound
// regardless of n_samples.
void build_elbo_graph(const DgpModel& model, const std::vector<Eigen::MatrixXd>& eps,
                      VariationalForm form, DgpGraph& out);

// Bound value only, with fresh propagation draws.
double elbo_value(const DgpModel& model, int n_samples, RngStream& rng);

// ----- prediction ------------------------------------------------------------

// Caches the per-layer Gram factorizations for repeated prediction against a
// fixed model.
class DgpPredictor {
 public:
  explicit DgpPredictor(const DgpModel& model);

  // Moment-matched Gaussian approximation of the predictive distribution,
  // raw coordinates.  The mixture over n_samples forward draws is collapsed
  // to its mean and variance; include_noise adds the observation noise.
  struct Moments {
    Eigen::VectorXd mean;
    Eigen::VectorXd var;
  };
  Moments predict(const Eigen::MatrixXd& X_raw, int n_samples, RngStream& rng,
                  bool include_noise = false) const;

  // Independent draws of the latent output at each row of X_raw (r x k).
  Eigen::MatrixXd sample(const Eigen::MatrixXd& X_raw, int k, RngStream& rng) const;

 private:
  // Per-sample forward pass in standardized coordinates.
  void propagate_once(const Eigen::MatrixXd& Xs, RngStream& rng, Eigen::VectorXd& mu,
                      Eigen::VectorXd& var) const;

  const DgpModel* model_;
  std::vector<PsdFactor> kzz_;
};

// ----- serialization ---------------------------------------------------------

// Exact round trip: load_dgp(save_dgp(m)) reproduces every parameter bit for
// bit.  The string is JSON.
std::string save_dgp(const DgpModel& model);
DgpModel load_dgp(const std::string& text);

}  // namespace dego
