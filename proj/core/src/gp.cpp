#include "dego/gp.hpp"

#include <cmath>
#include <stdexcept>

#include "dego/linalg.hpp"
#include "dego/normal.hpp"
#include "dego/optim.hpp"
#include "dego/rng.hpp"

namespace dego {

namespace {

// Kernel matrix plus noise, factored once per hyperparameter setting.
struct GpWorkspace {
  Eigen::MatrixXd K;  // noise-free Gram matrix
  PsdFactor factor;   // factor of K + noise I
  Eigen::VectorXd alpha;
  double mean = 0.0;
};

GpWorkspace make_workspace(const GpModel& m) {
  GpWorkspace w;
  w.K = ard_rbf_gram(m.X, m.kernel);
  Eigen::MatrixXd Kn = w.K;
  Kn.diagonal().array() += m.noise_var;
  w.factor = chol_psd(Kn);
  w.mean = m.mean_const;
  w.alpha = w.factor.solve(m.y - Eigen::VectorXd::Constant(m.n(), w.mean));
  return w;
}

}  // namespace

double gp_mean_gls(const GpModel& model) {
  Eigen::MatrixXd Kn = ard_rbf_gram(model.X, model.kernel);
  Kn.diagonal().array() += model.noise_var;
  const PsdFactor f = chol_psd(Kn);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(model.n());
  const Eigen::VectorXd u = f.solve(ones);
  return u.dot(model.y) / u.dot(ones);
}

GpLogMarginal log_marginal_likelihood(const GpModel& model) {
  const int n = model.n();
  const int d = model.dim();
  const GpWorkspace w = make_workspace(model);
  const Eigen::VectorXd r = model.y - Eigen::VectorXd::Constant(n, w.mean);

  GpLogMarginal out;
  out.value = -0.5 * r.dot(w.alpha) - 0.5 * w.factor.log_det() - 0.5 * n * kLogTwoPi;

  // d LML / d theta = 0.5 tr((alpha alpha' - Kn^{-1}) dKn/dtheta)
  const Eigen::MatrixXd Kninv = w.factor.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd A = w.alpha * w.alpha.transpose() - Kninv;

  const Eigen::VectorXd ls = model.kernel.lengthscale();
  out.grad_log_lengthscale.resize(d);
  for (int k = 0; k < d; ++k) {
    // dK/dlog l_k = K .* D_k with D_k(i,j) = (x_ik - x_jk)^2 / l_k^2
    Eigen::MatrixXd diff = model.X.col(k) * Eigen::RowVectorXd::Ones(n);
    diff.rowwise() -= model.X.col(k).transpose();
    const Eigen::MatrixXd dK =
        w.K.cwiseProduct(diff.cwiseProduct(diff)) / (ls[k] * ls[k]);
    out.grad_log_lengthscale[k] = 0.5 * A.cwiseProduct(dK).sum();
  }
  out.grad_log_variance = 0.5 * A.cwiseProduct(w.K).sum();
  out.grad_log_noise = 0.5 * model.noise_var * A.trace();
  return out;
}

GpModel fit_gp(const Eigen::MatrixXd& X_raw, const Eigen::VectorXd& y_raw,
               const GpFitConfig& cfg, const GpModel* warm_from) {
  if (X_raw.rows() != y_raw.size())
    throw std::invalid_argument("fit_gp: X and y row counts differ");
  if (X_raw.rows() < 2) throw std::invalid_argument("fit_gp: need at least two points");
  if (warm_from && warm_from->dim() != X_raw.cols())
    throw std::invalid_argument("fit_gp: warm-start model has a different dimension");

  GpModel model;
  model.x_std = Standardizer::fit(X_raw);
  model.y_std = Standardizer::fit(y_raw);
  model.X = model.x_std.apply(X_raw);
  model.y = model.y_std.apply(y_raw).col(0);
  model.noise_trained = cfg.train_noise;

  const int d = model.dim();
  const int n_hyper = d + 1 + (cfg.train_noise ? 1 : 0);
  RngStream rng(cfg.seed);

  double best_value = -std::numeric_limits<double>::infinity();
  ArdParams best_kernel = ArdParams::unit(d);
  double best_noise = cfg.noise_var;

  for (int restart = 0; restart < cfg.restarts; ++restart) {
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(n_hyper);
    if (cfg.train_noise) theta[n_hyper - 1] = std::log(std::max(cfg.noise_var, 1e-12));
    if (restart > 0) {
      for (int i = 0; i < n_hyper; ++i) theta[i] = rng.normal();
    } else if (warm_from) {
      theta.head(d) =
          warm_from->kernel.log_lengthscale +
          (warm_from->x_std.scale.array().log() - model.x_std.scale.array().log()).matrix();
      const double dy = std::log(warm_from->y_std.scale[0]) - std::log(model.y_std.scale[0]);
      theta[d] = warm_from->kernel.log_variance + 2.0 * dy;
      if (cfg.train_noise)
        theta[n_hyper - 1] = std::log(std::max(warm_from->noise_var, 1e-12)) + 2.0 * dy;
    }

    AdamConfig ac;
    ac.learning_rate = cfg.adam_lr;
    ac.beta1 = cfg.adam_beta1;
    ac.beta2 = cfg.adam_beta2;
    AdamState adam(n_hyper, ac);

    double window_best = -std::numeric_limits<double>::infinity();
    int since_improvement = 0;

    for (int step = 0; step < cfg.adam_steps; ++step) {
      model.kernel.log_lengthscale = theta.head(d);
      model.kernel.log_variance = theta[d];
      model.noise_var = cfg.train_noise ? std::exp(theta[n_hyper - 1]) : cfg.noise_var;
      model.mean_const = gp_mean_gls(model);

      GpLogMarginal lml;
      try {
        lml = log_marginal_likelihood(model);
      } catch (const NotPositiveDefiniteError&) {
        break;  // hopeless corner of hyperparameter space, abandon restart
      }

      if (lml.value > best_value) {
        best_value = lml.value;
        best_kernel = model.kernel;
        best_noise = model.noise_var;
      }
      if (lml.value > window_best + cfg.plateau_tol) {
        window_best = lml.value;
        since_improvement = 0;
      } else if (++since_improvement >= cfg.plateau_window) {
        break;
      }

      Eigen::VectorXd grad(n_hyper);
      grad.head(d) = lml.grad_log_lengthscale;
      grad[d] = lml.grad_log_variance;
      if (cfg.train_noise) grad[n_hyper - 1] = lml.grad_log_noise;
      if (!grad.allFinite()) break;
      theta = adam_step(adam, theta, grad);
    }
  }

  model.kernel = best_kernel;
  model.noise_var = best_noise;
  model.mean_const = gp_mean_gls(model);
  return model;
}

GpPrediction gp_posterior(const GpModel& model, const Eigen::MatrixXd& X_star_raw,
                          bool want_cov) {
  if (X_star_raw.cols() != model.dim())
    throw std::invalid_argument("gp_posterior: dimension mismatch");
  const GpWorkspace w = make_workspace(model);
  const Eigen::MatrixXd Xs = model.x_std.apply(X_star_raw);
  const Eigen::MatrixXd Ks = ard_rbf(model.X, Xs, model.kernel);  // n x n*

  GpPrediction out;
  const Eigen::VectorXd mean_std =
      Eigen::VectorXd::Constant(Xs.rows(), w.mean) + Ks.transpose() * w.alpha;
  out.mean = model.y_std.invert(mean_std).col(0);

  const Eigen::MatrixXd V = w.factor.solve_lower(Ks);  // L^{-1} Ks
  const Eigen::VectorXd var_std =
      (Eigen::VectorXd::Constant(Xs.rows(), model.kernel.variance()) -
       V.colwise().squaredNorm().transpose())
          .cwiseMax(0.0);
  out.var = var_std * model.y_std.scale[0] * model.y_std.scale[0];

  if (want_cov) {
    const Eigen::MatrixXd Kss = ard_rbf_gram(Xs, model.kernel);
    out.cov = (Kss - V.transpose() * V) * model.y_std.scale[0] * model.y_std.scale[0];
  }
  return out;
}

}  // namespace dego
