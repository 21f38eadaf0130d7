#include "dego/engine.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <utility>

#include "dego/lhs.hpp"

namespace dego {

double feasible_min(const History& history) {
  if (history.records.empty()) throw std::invalid_argument("feasible_min: empty history");
  double best = kNoFeasible;
  for (const EvalRecord& r : history.records)
    if (r.feasible && r.y < best) best = r.y;
  return best;
}

bool near_duplicate(const Eigen::MatrixXd& X_raw, const Eigen::VectorXd& x, const Box& bounds,
                    double tol) {
  if (X_raw.cols() != x.size())
    throw std::invalid_argument("near_duplicate: dimension mismatch");
  const Eigen::ArrayXd w = bounds.width().array();
  for (Eigen::Index i = 0; i < X_raw.rows(); ++i) {
    const double dist =
        ((X_raw.row(i).transpose() - x).array() / w).abs().maxCoeff();
    if (dist <= tol) return true;
  }
  return false;
}

const char* to_string(RetrainMode mode) {
  switch (mode) {
    case RetrainMode::kNone: return "none";
    case RetrainMode::kCold: return "cold";
    case RetrainMode::kWarm: return "warm";
  }
  return "?";
}

const char* to_string(BenchModelKind kind) {
  switch (kind) {
    case BenchModelKind::kConstantMean: return "constant-mean";
    case BenchModelKind::kGp: return "gp";
    case BenchModelKind::kDgpAdam: return "dgp-adam";
    case BenchModelKind::kDgpNatGrad: return "dgp-natgrad";
  }
  return "?";
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct EvalOut {
  double y = 0.0;
  Eigen::VectorXd g;
};

// Evaluates the exact functions, converting any failure (including
// non-finite values) into RunAborted carrying the history so far.
EvalOut eval_point(const Problem& problem, const Eigen::VectorXd& x, const History& h) {
  EvalOut out;
  out.g.resize(static_cast<Eigen::Index>(problem.constraints.size()));
  try {
    out.y = problem.objective(x);
    for (std::size_t i = 0; i < problem.constraints.size(); ++i)
      out.g[static_cast<Eigen::Index>(i)] = problem.constraints[i](x);
  } catch (const std::exception& e) {
    throw RunAborted(std::string("evaluator failed: ") + e.what(), h);
  }
  if (!std::isfinite(out.y) || !out.g.allFinite())
    throw RunAborted("evaluator returned a non-finite value", h);
  return out;
}

void append_record(History& h, int iteration, const Eigen::VectorXd& x, const EvalOut& v,
                   RetrainMode mode, double wall_ms) {
  EvalRecord r;
  r.iteration = iteration;
  r.x = x;
  r.y = v.y;
  r.constraints = v.g;
  r.feasible = (v.g.array() <= 0.0).all();
  const double prev = h.records.empty() ? kNoFeasible : h.records.back().y_min;
  r.y_min = (r.feasible && v.y < prev) ? v.y : prev;
  r.retrain = mode;
  r.wall_ms = wall_ms;
  h.records.push_back(std::move(r));
}

// One trained surrogate per problem output.
struct Surrogate {
  ModelKind kind = ModelKind::kDgp;
  DgpModel dgp;
  GpModel gp;
  bool trained = false;
};

void refit(Surrogate& s, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, bool cold,
           const DegoConfig& cfg, const DgpArchitecture& arch, RngStream& rng) {
  if (s.kind == ModelKind::kDgp) {
    if (cold || !s.trained)
      s.dgp = fit_dgp(X, y, arch, cfg.train, rng);
    else
      s.dgp = fit_dgp_warm(X, y, s.dgp, cfg.train, rng);
  } else {
    GpFitConfig gc = cfg.gp;
    gc.seed = rng.next_u64();
    if (cold || !s.trained) {
      s.gp = fit_gp(X, y, gc);
    } else {
      // Warm refit: continue from the previous optimum, no random restarts.
      gc.restarts = 1;
      s.gp = fit_gp(X, y, gc, &s.gp);
    }
  }
  s.trained = true;
}

struct BatchMoments {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
};

// Everything an infill evaluator needs.  Copied into the closures by value;
// the pointed-to surrogates and predictors outlive the infill search.
struct InfillContext {
  const std::vector<Surrogate>* sur = nullptr;
  std::vector<const DgpPredictor*> preds;  // per output, null for dense GPs
  RngStream pred_base{0};
  int s_pred = 1;
};

// Raw-space predictive moments of output o over the rows of X.  Deep
// surrogates reuse the same propagation draws on every call (the stream is
// copied, never advanced), so one infill search optimizes a fixed surface
// and candidate comparisons are paired across generations.
BatchMoments output_moments(const InfillContext& ctx, int o, const Eigen::MatrixXd& X) {
  const Surrogate& s = (*ctx.sur)[static_cast<std::size_t>(o)];
  if (s.kind == ModelKind::kGp) {
    const GpPrediction p = gp_posterior(s.gp, X);
    return {p.mean, p.var};
  }
  RngStream r = ctx.pred_base.child(static_cast<std::uint64_t>(o));
  const DgpPredictor::Moments m = ctx.preds[static_cast<std::size_t>(o)]->predict(
      X, ctx.s_pred, r, /*include_noise=*/false);
  return {m.mean, m.var};
}

const Standardizer& output_ystd(const Surrogate& s) {
  return s.kind == ModelKind::kGp ? s.gp.y_std : s.dgp.y_std;
}

// Product of the constraints' feasibility probabilities, from raw moments
// (the g <= 0 boundary only exists in raw units).
BatchEvaluator feasibility_product(const InfillContext& ctx, int n_constraints) {
  return [ctx, n_constraints](const Eigen::MatrixXd& X) {
    Eigen::VectorXd out = Eigen::VectorXd::Ones(X.rows());
    for (int i = 0; i < n_constraints; ++i) {
      const BatchMoments m = output_moments(ctx, 1 + i, X);
      for (Eigen::Index j = 0; j < X.rows(); ++j)
        out[j] *= probability_of_feasibility(m.mean[j], std::sqrt(std::max(0.0, m.var[j])));
    }
    return out;
  };
}

// The improvement-style criterion over the objective surrogate, computed on
// standardized moments (the argmax is invariant under the affine map, and
// standardized units keep the criterion well scaled).
BatchEvaluator objective_criterion(const InfillContext& ctx, Criterion crit, double y_min_raw) {
  const Surrogate& s = (*ctx.sur)[0];
  const Standardizer& ystd = output_ystd(s);
  const double mu = ystd.mean[0];
  const double sc = ystd.scale[0];
  const double ymin_s = (y_min_raw - mu) / sc;

  if (crit == Criterion::kSamplingImprovement && s.kind == ModelKind::kDgp) {
    return [ctx, mu, sc, ymin_s](const Eigen::MatrixXd& X) {
      RngStream r = ctx.pred_base.child(0);
      const Eigen::MatrixXd draws = ctx.preds[0]->sample(X, ctx.s_pred, r);
      Eigen::VectorXd out(X.rows());
      for (Eigen::Index j = 0; j < X.rows(); ++j) {
        const Eigen::VectorXd row = ((draws.row(j).transpose().array() - mu) / sc).matrix();
        out[j] = ei_sampling(row, ymin_s);
      }
      return out;
    };
  }
  // A dense GP's predictive is exactly Gaussian, so the sampling criterion
  // falls back to its closed form there.
  const bool use_pi = crit == Criterion::kProbabilityOfImprovement;
  return [ctx, mu, sc, ymin_s, use_pi](const Eigen::MatrixXd& X) {
    const BatchMoments m = output_moments(ctx, 0, X);
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index j = 0; j < X.rows(); ++j) {
      const double mean_s = (m.mean[j] - mu) / sc;
      const double std_s = std::sqrt(std::max(0.0, m.var[j])) / sc;
      out[j] = use_pi ? probability_of_improvement(mean_s, std_s, ymin_s)
                      : expected_improvement(mean_s, std_s, ymin_s);
    }
    return out;
  };
}

BatchEvaluator constraint_violation(const InfillContext& ctx, int i, bool posterior_mean_only) {
  return [ctx, i, posterior_mean_only](const Eigen::MatrixXd& X) {
    const BatchMoments m = output_moments(ctx, 1 + i, X);
    if (posterior_mean_only) return m.mean;
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index j = 0; j < X.rows(); ++j)
      out[j] = expected_violation(m.mean[j], std::sqrt(std::max(0.0, m.var[j])));
    return out;
  };
}

// Per-constraint acceptance thresholds: configured values, or the default
// 1e-3 of each constraint's observed range over the evaluated points.
std::vector<double> resolve_thresholds(const AcquisitionSpec& spec, const History& h,
                                       int n_constraints) {
  if (!spec.ev_thresholds.empty()) return spec.ev_thresholds;
  std::vector<double> out(static_cast<std::size_t>(n_constraints), 0.0);
  for (int i = 0; i < n_constraints; ++i) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const EvalRecord& r : h.records) {
      lo = std::min(lo, r.constraints[i]);
      hi = std::max(hi, r.constraints[i]);
    }
    out[static_cast<std::size_t>(i)] = 1e-3 * std::max(0.0, hi - lo);
  }
  return out;
}

}  // namespace

History run_bo(const Problem& problem, const DegoConfig& cfg, const RefitObserver& observer) {
  const int d = problem.dim();
  const int c = static_cast<int>(problem.constraints.size());
  const int n_init = cfg.n_init == 0 ? 5 * d : cfg.n_init;
  const int n_add = cfg.n_add == 0 ? 10 * d : cfg.n_add;
  if (n_init < d + 1) throw std::invalid_argument("run_bo: n_init must be at least d+1");
  if (n_add < 1) throw std::invalid_argument("run_bo: n_add must be at least 1");
  if (cfg.n_update < 1) throw std::invalid_argument("run_bo: n_update must be at least 1");
  if (cfg.layers < 1) throw std::invalid_argument("run_bo: need at least one layer");
  if (cfg.s_pred < 1) throw std::invalid_argument("run_bo: s_pred must be at least 1");
  validate(cfg.acquisition);
  if (!cfg.acquisition.ev_thresholds.empty() &&
      cfg.acquisition.ev_thresholds.size() != static_cast<std::size_t>(c))
    throw std::invalid_argument("run_bo: one threshold per constraint required");
  if (!cfg.constraint_kinds.empty() &&
      cfg.constraint_kinds.size() != static_cast<std::size_t>(c))
    throw std::invalid_argument("run_bo: one model kind per constraint required");

  const RngStream root(cfg.seed);
  History h;
  h.n_init = n_init;

  RngStream doe_rng = root.child(0);
  const Eigen::MatrixXd X0 = lhs_sample(n_init, problem.bounds, doe_rng);
  for (int i = 0; i < n_init; ++i) {
    const auto t0 = Clock::now();
    const EvalOut v = eval_point(problem, X0.row(i).transpose(), h);
    append_record(h, 0, X0.row(i).transpose(), v, RetrainMode::kNone, ms_since(t0));
  }

  std::vector<Surrogate> sur(static_cast<std::size_t>(1 + c));
  sur[0].kind = cfg.objective_kind;
  for (int i = 0; i < c; ++i)
    sur[static_cast<std::size_t>(1 + i)].kind =
        cfg.constraint_kinds.empty() ? cfg.objective_kind
                                     : cfg.constraint_kinds[static_cast<std::size_t>(i)];

  DgpArchitecture arch;
  arch.input_dim = d;
  arch.hidden_widths.assign(static_cast<std::size_t>(cfg.layers - 1), d);
  arch.num_inducing = n_init + n_add;

  const RngStream iter_root = root.child(1);
  for (int k = 0; k < n_add; ++k) {
    const auto t0 = Clock::now();
    const bool cold = (k % cfg.n_update == 0);
    const RetrainMode mode = cold ? RetrainMode::kCold : RetrainMode::kWarm;
    const RngStream iter_rng = iter_root.child(static_cast<std::uint64_t>(k));

    Eigen::MatrixXd X(h.size(), d);
    Eigen::VectorXd y(h.size());
    Eigen::MatrixXd G(h.size(), c);
    for (int i = 0; i < h.size(); ++i) {
      X.row(i) = h.records[static_cast<std::size_t>(i)].x.transpose();
      y[i] = h.records[static_cast<std::size_t>(i)].y;
      G.row(i) = h.records[static_cast<std::size_t>(i)].constraints.transpose();
    }

    std::vector<std::unique_ptr<DgpPredictor>> preds(sur.size());
    for (int o = 0; o <= c; ++o) {
      Surrogate& s = sur[static_cast<std::size_t>(o)];
      RngStream train_rng = iter_rng.child(static_cast<std::uint64_t>(o));
      refit(s, X, o == 0 ? y : G.col(o - 1).eval(), cold, cfg, arch, train_rng);
      if (s.kind == ModelKind::kDgp)
        preds[static_cast<std::size_t>(o)] = std::make_unique<DgpPredictor>(s.dgp);
      if (observer) {
        RefitEvent ev;
        ev.iteration = k + 1;
        ev.output = o;
        ev.mode = mode;
        ev.dgp = s.kind == ModelKind::kDgp ? &s.dgp : nullptr;
        ev.gp = s.kind == ModelKind::kGp ? &s.gp : nullptr;
        observer(ev);
      }
    }

    InfillContext ctx;
    ctx.sur = &sur;
    ctx.preds.resize(sur.size(), nullptr);
    for (std::size_t o = 0; o < sur.size(); ++o)
      if (preds[o]) ctx.preds[o] = preds[o].get();
    ctx.pred_base = iter_rng.child(101);
    ctx.s_pred = cfg.s_pred;

    const double y_min_raw = feasible_min(h);
    AcquisitionSpec spec = cfg.acquisition;
    BatchEvaluator acq;
    std::vector<BatchEvaluator> violations;
    if (y_min_raw == kNoFeasible) {
      // Nothing feasible yet: search purely for feasibility.
      acq = feasibility_product(ctx, c);
      spec.constraint_mode = ConstraintMode::kFeasibilityProduct;
      spec.ev_thresholds.clear();
    } else {
      const Standardizer& ystd = output_ystd(sur[0]);
      spec.y_min = (y_min_raw - ystd.mean[0]) / ystd.scale[0];
      acq = objective_criterion(ctx, spec.criterion, y_min_raw);
      if (c > 0) {
        switch (spec.constraint_mode) {
          case ConstraintMode::kExpectedViolation:
            spec.ev_thresholds = resolve_thresholds(spec, h, c);
            for (int i = 0; i < c; ++i)
              violations.push_back(constraint_violation(ctx, i, false));
            break;
          case ConstraintMode::kDirect:
            spec.ev_thresholds.assign(static_cast<std::size_t>(c), 0.0);
            for (int i = 0; i < c; ++i)
              violations.push_back(constraint_violation(ctx, i, true));
            break;
          case ConstraintMode::kFeasibilityProduct: {
            const BatchEvaluator crit = acq;
            const BatchEvaluator pof = feasibility_product(ctx, c);
            acq = [crit, pof](const Eigen::MatrixXd& Xq) {
              return (crit(Xq).array() * pof(Xq).array()).matrix().eval();
            };
            spec.ev_thresholds.clear();
            break;
          }
        }
      }
    }

    RngStream de_rng = iter_rng.child(102);
    Eigen::VectorXd x_new = optimize_acquisition(acq, violations, problem.bounds, spec, de_rng);
    if (near_duplicate(X, x_new, problem.bounds)) {
      RngStream retry_rng = iter_rng.child(103);
      x_new = optimize_acquisition(acq, violations, problem.bounds, spec, retry_rng);
    }

    const EvalOut v = eval_point(problem, x_new, h);
    append_record(h, k + 1, x_new, v, mode, ms_since(t0));
  }
  return h;
}

History run_dego(const Problem& problem, const DegoConfig& cfg, const RefitObserver& observer) {
  DegoConfig c = cfg;
  c.objective_kind = ModelKind::kDgp;
  c.constraint_kinds.clear();
  return run_bo(problem, c, observer);
}

History run_gp_baseline(const Problem& problem, const DegoConfig& cfg,
                        const RefitObserver& observer) {
  DegoConfig c = cfg;
  c.objective_kind = ModelKind::kGp;
  c.constraint_kinds.clear();
  return run_bo(problem, c, observer);
}

}  // namespace dego
