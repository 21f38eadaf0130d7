#include "dego/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>

#include "dego/linalg.hpp"

namespace dego {

GaussianMoments natgrad_step(const GaussianMoments& q, const Eigen::VectorXd& grad_mean,
                             const Eigen::MatrixXd& grad_cov, double step) {
  if (step == 0.0) return q;
  // Symmetrize defensively; the bound only ever sees cov through symmetric
  // expressions, so this is a no-op up to rounding.
  const Eigen::MatrixXd gS = 0.5 * (grad_cov + grad_cov.transpose());

  GaussianNatural th = natural_from_moments(q);
  // Chain rule from (mean, cov) to expectation parameters (mean, cov + mm'):
  //   dL/deta1 = g_mean - 2 gS mean,   dL/deta2 = gS
  th.theta1 += step * (grad_mean - 2.0 * (gS * q.mean));
  th.theta2 += step * gS;
  if (!th.theta1.allFinite() || !th.theta2.allFinite())
    throw NotPositiveDefiniteError("natural parameters became non-finite");
  return moments_from_natural(th);  // throws when -2 theta2 is not PD
}

namespace {

// One flat-packed parameter slot driven by Adam: where its gradient comes
// from in the evaluation graph and how a delta lands back in the model.
struct Slot {
  Eigen::Index size;
  std::function<Eigen::MatrixXd(const DgpGraph&)> grad;
  std::function<void(const DgpGraph&, const Eigen::MatrixXd&)> apply;
};

// Keeps only the lower triangle of a factor gradient; the upper entries are
// structural zeros that never move.
Eigen::MatrixXd lower_mask(Eigen::MatrixXd g) {
  return g.triangularView<Eigen::Lower>();
}

std::vector<Slot> make_slots(DgpModel& model, TrainerMode mode) {
  std::vector<Slot> slots;
  const int L = model.depth();
  for (int l = 0; l < L; ++l) {
    SvgpLayer* layer = &model.layers[l];
    const Eigen::Index m = layer->m();
    const Eigen::Index din = layer->d_in();
    slots.push_back({m * din,
                     [l](const DgpGraph& g) { return g.tape.grad(g.layers[l].Z); },
                     [layer](const DgpGraph&, const Eigen::MatrixXd& d) { layer->Z += d; }});
    slots.push_back({din,
                     [l](const DgpGraph& g) { return g.tape.grad(g.layers[l].log_lengthscale); },
                     [layer](const DgpGraph&, const Eigen::MatrixXd& d) {
                       layer->kernel.log_lengthscale += d.col(0);
                     }});
    slots.push_back({1,
                     [l](const DgpGraph& g) { return g.tape.grad(g.layers[l].log_variance); },
                     [layer](const DgpGraph&, const Eigen::MatrixXd& d) {
                       layer->kernel.log_variance += d(0, 0);
                     }});
    if (mode == TrainerMode::kAdamOnly) {
      slots.push_back({m * layer->d_out(),
                       [l](const DgpGraph& g) { return g.tape.grad(g.layers[l].M); },
                       [layer](const DgpGraph&, const Eigen::MatrixXd& d) { layer->M += d; }});
      for (int c = 0; c < layer->d_out(); ++c) {
        slots.push_back({m * m,
                         [l, c](const DgpGraph& g) {
                           return lower_mask(g.tape.grad(g.layers[l].factor[c]));
                         },
                         [layer, l, c](const DgpGraph& g, const Eigen::MatrixXd& d) {
                           const Eigen::MatrixXd Lf = g.layers[l].factor[c].value() + d;
                           layer->S[c] = Lf * Lf.transpose();
                         }});
      }
    }
  }
  slots.push_back({1, [](const DgpGraph& g) { return g.tape.grad(g.log_noise); },
                   [&model](const DgpGraph&, const Eigen::MatrixXd& d) { model.log_noise += d(0, 0); }});
  return slots;
}

// Candidate variational states for every (layer, output dim), committed only
// when each one stays inside the Gaussian family.
struct NatCandidates {
  std::vector<std::vector<GaussianMoments>> q;  // [layer][dim]
};

NatCandidates propose_nat_steps(const DgpModel& model, const DgpGraph& g,
                                const std::vector<double>& gamma) {
  NatCandidates cand;
  cand.q.resize(model.layers.size());
  for (size_t l = 0; l < model.layers.size(); ++l) {
    const SvgpLayer& layer = model.layers[l];
    const Eigen::MatrixXd gM = g.tape.grad(g.layers[l].M);
    for (int c = 0; c < layer.d_out(); ++c) {
      const Eigen::MatrixXd gS = g.tape.grad(g.layers[l].S[c]);
      GaussianMoments q{layer.M.col(c), layer.S[c]};
      cand.q[l].push_back(natgrad_step(q, gM.col(c), gS, gamma[l]));
    }
  }
  return cand;
}

void commit(DgpModel& model, const NatCandidates& cand) {
  for (size_t l = 0; l < model.layers.size(); ++l)
    for (int c = 0; c < model.layers[l].d_out(); ++c) {
      model.layers[l].M.col(c) = cand.q[l][c].mean;
      model.layers[l].S[c] = cand.q[l][c].cov;
    }
}

}  // namespace

TrainResult train(DgpModel& model, const TrainConfig& cfg, RngStream& rng) {
  if (cfg.iter < 1) throw std::invalid_argument("train: iter must be >= 1");
  if (cfg.tol < 0) throw std::invalid_argument("train: tol must be >= 0");
  if (cfg.window < 1) throw std::invalid_argument("train: window must be >= 1");
  if (cfg.s_train < 1) throw std::invalid_argument("train: s_train must be >= 1");
  const int L = model.depth();
  std::vector<double> gamma = cfg.nat_steps;
  if (gamma.empty()) gamma.assign(L, 0.1);
  if (static_cast<int>(gamma.size()) != L)
    throw std::invalid_argument("train: one natural step size per layer expected");
  for (double g : gamma)
    if (!(g > 0.0 && g <= 1.0))
      throw std::invalid_argument("train: natural step sizes must lie in (0, 1]");

  const VariationalForm form = cfg.mode == TrainerMode::kNatGrad ? VariationalForm::kMeanCov
                                                                 : VariationalForm::kMeanFactor;
  std::vector<Slot> slots = make_slots(model, cfg.mode);
  Eigen::Index dim = 0;
  for (const Slot& s : slots) dim += s.size;
  AdamState adam(dim, cfg.adam);

  TrainResult res;
  res.trace.reserve(cfg.iter);
  res.best_elbo = -std::numeric_limits<double>::infinity();
  std::vector<double> running_best;
  running_best.reserve(cfg.iter);
  int backoffs = 0;
  int bad_evals = 0;
  const auto t0 = std::chrono::steady_clock::now();

  DgpGraph graph;
  for (int t = 0; t < cfg.iter; ++t) {
    const std::vector<Eigen::MatrixXd> eps = draw_propagation_noise(model, cfg.s_train, rng);
    double elbo = std::numeric_limits<double>::quiet_NaN();
    bool evaluated = false;
    try {
      build_elbo_graph(model, eps, form, graph);
      elbo = graph.elbo.value()(0, 0);
      if (!std::isfinite(elbo)) throw NotPositiveDefiniteError("non-finite bound");
      graph.tape.backward(graph.elbo);
      evaluated = true;
      bad_evals = 0;
    } catch (const NotPositiveDefiniteError&) {
      // A broken evaluation skips the whole iteration; persistent breakage
      // means the model state is beyond saving.
      if (++bad_evals >= 5)
        throw std::runtime_error("train: bound evaluation kept failing; model state is degenerate");
    }

    if (evaluated) {
      // Hyperparameter ascent and the variational step both use this
      // evaluation's gradients.
      Eigen::VectorXd flat(dim);
      Eigen::Index at = 0;
      for (const Slot& s : slots) {
        const Eigen::MatrixXd g = s.grad(graph);
        flat.segment(at, s.size) = Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
        at += s.size;
      }
      if (flat.allFinite()) {
        const Eigen::VectorXd delta = adam.update(flat);
        at = 0;
        for (const Slot& s : slots) {
          const Eigen::MatrixXd g0 = s.grad(graph);  // only for the shape
          s.apply(graph, Eigen::Map<const Eigen::MatrixXd>(delta.segment(at, s.size).data(),
                                                           g0.rows(), g0.cols()));
          at += s.size;
        }
      }

      if (cfg.mode == TrainerMode::kNatGrad) {
        try {
          commit(model, propose_nat_steps(model, graph, gamma));
        } catch (const NotPositiveDefiniteError&) {
          // Oversized step: back off every layer below the last and retry
          // once with the reduced sizes.
          bool retried = false;
          if (backoffs < cfg.max_backoffs && L > 1) {
            for (int j = 0; j + 1 < L; ++j) gamma[j] /= 10.0;
            ++backoffs;
            retried = true;
          }
          if (retried) {
            try {
              commit(model, propose_nat_steps(model, graph, gamma));
            } catch (const NotPositiveDefiniteError&) {
              // Leave q untouched this iteration.
            }
          }
        }
      }
    }

    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    res.trace.push_back({t, elbo, gamma, ms});
    const double prev_best = running_best.empty() ? -std::numeric_limits<double>::infinity()
                                                  : running_best.back();
    running_best.push_back(std::isfinite(elbo) ? std::max(prev_best, elbo) : prev_best);
    res.steps = t + 1;

    // Improvement of the running best over the trailing window.
    if (t >= cfg.window) {
      const double delta = running_best[t] - running_best[t - cfg.window];
      if (std::isfinite(delta) && delta <= cfg.tol) break;
    }
  }
  res.best_elbo = running_best.empty() ? -std::numeric_limits<double>::infinity()
                                       : running_best.back();
  return res;
}

DgpModel warm_start(const DgpModel& prev, const Eigen::MatrixXd& X_raw,
                    const Eigen::VectorXd& y_raw) {
  if (X_raw.cols() != prev.input_dim())
    throw std::invalid_argument("warm_start: input dimension changed");
  if (X_raw.rows() != y_raw.size())
    throw std::invalid_argument("warm_start: X and y row counts differ");

  DgpModel m = prev;
  m.x_std = Standardizer::fit(X_raw);
  m.y_std = Standardizer::fit(y_raw);
  m.X = m.x_std.apply(X_raw);
  m.y = m.y_std.apply(y_raw).col(0);

  // Input side: express the first layer in the new standardized coordinates.
  // Inducing inputs follow the raw points they stand for, lengthscales and
  // the linear mean rows follow the per-dimension rescaling.  Pairwise
  // scaled distances are preserved, so the prior Gram matrix and with it the
  // whitened variational state carry over unchanged.
  SvgpLayer& first = m.layers.front();
  first.Z = m.x_std.apply(prev.x_std.invert(prev.layers.front().Z));
  const Eigen::ArrayXd ratio = prev.x_std.scale.array() / m.x_std.scale.array();  // s_old / s_new
  first.kernel.log_lengthscale += ratio.log().matrix();
  first.mean_W = ratio.inverse().matrix().asDiagonal() * prev.layers.front().mean_W;

  // Output side: the last layer's function value picks up the factor
  // a = s_old / s_new under the new output scale.  Scaling the kernel
  // variance by a^2 scales the prior factor by a, which carries the whitened
  // moments to the rescaled function values with M and S untouched.
  SvgpLayer& last = m.layers.back();
  const double a = prev.y_std.scale[0] / m.y_std.scale[0];
  last.kernel.log_variance += 2.0 * std::log(a);
  m.log_noise += 2.0 * std::log(a);
  return m;
}

DgpModel fit_dgp(const Eigen::MatrixXd& X_raw, const Eigen::VectorXd& y_raw,
                 const DgpArchitecture& arch, const TrainConfig& cfg, RngStream& rng,
                 TrainResult* result) {
  DgpModel m = init_dgp(X_raw, y_raw, arch, cfg.noise_var_init, rng);
  TrainResult r = train(m, cfg, rng);
  if (result) *result = std::move(r);
  return m;
}

DgpModel fit_dgp_warm(const Eigen::MatrixXd& X_raw, const Eigen::VectorXd& y_raw,
                      const DgpModel& prev, const TrainConfig& cfg, RngStream& rng,
                      TrainResult* result) {
  DgpModel m = warm_start(prev, X_raw, y_raw);
  TrainResult r = train(m, cfg, rng);
  if (result) *result = std::move(r);
  return m;
}

}  // namespace dego
