#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "dego/engine.hpp"
#include "dego/lhs.hpp"
#include "dego/normal.hpp"

namespace dego {

namespace {

// Linear-interpolation quantile of a sorted vector (the convention that is
// exact on the sample itself at p = 0, 0.5, 1 for odd sizes).
double quantile_sorted(const std::vector<double>& v, double p) {
  const std::size_t n = v.size();
  if (n == 1) return v[0];
  const double h = p * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double frac = h - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

double sample_std(const Eigen::VectorXd& v, double mean) {
  if (v.size() < 2) return 0.0;
  return std::sqrt((v.array() - mean).square().sum() / (v.size() - 1.0));
}

int worker_cap(int n_tasks) {
  int cap = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("DEGO_MAX_WORKERS")) {
    const int v = std::atoi(env);
    if (v > 0) cap = v;
  }
  return std::clamp(cap, 1, n_tasks);
}

}  // namespace

CampaignStats campaign_stats(const std::vector<History>& histories,
                             std::optional<double> known_minimum) {
  if (histories.empty()) throw std::invalid_argument("campaign_stats: no histories");
  const int rows = histories[0].size();
  for (const History& h : histories)
    if (h.size() != rows)
      throw std::invalid_argument("campaign_stats: histories have different lengths");

  const int reps = static_cast<int>(histories.size());
  CampaignStats s;
  s.n_succeeded = reps;
  s.q1.resize(rows);
  s.median.resize(rows);
  s.q3.resize(rows);
  std::vector<double> col(static_cast<std::size_t>(reps));
  for (int i = 0; i < rows; ++i) {
    for (int r = 0; r < reps; ++r)
      col[static_cast<std::size_t>(r)] =
          histories[static_cast<std::size_t>(r)].records[static_cast<std::size_t>(i)].y_min;
    std::sort(col.begin(), col.end());
    s.q1[i] = quantile_sorted(col, 0.25);
    s.median[i] = quantile_sorted(col, 0.5);
    s.q3[i] = quantile_sorted(col, 0.75);
  }

  Eigen::VectorXd finals(reps);
  for (int r = 0; r < reps; ++r)
    finals[r] = histories[static_cast<std::size_t>(r)].records.back().y_min;
  s.final_mean = finals.mean();
  s.final_std = sample_std(finals, s.final_mean);
  if (known_minimum) s.gap_to_known = s.final_mean - *known_minimum;
  return s;
}

CampaignResult run_campaign(const Problem& problem, const DegoConfig& cfg, int n_repetitions,
                            std::uint64_t base_seed) {
  if (n_repetitions < 1)
    throw std::invalid_argument("run_campaign: need at least one repetition");

  CampaignResult result;
  result.repetitions.resize(static_cast<std::size_t>(n_repetitions));
  const RngStream base(base_seed);

  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int r = next.fetch_add(1); r < n_repetitions; r = next.fetch_add(1)) {
      RepetitionOutcome& out = result.repetitions[static_cast<std::size_t>(r)];
      out.repetition = r;
      out.seed = base.child(static_cast<std::uint64_t>(r)).next_u64();
      DegoConfig rep_cfg = cfg;
      rep_cfg.seed = out.seed;
      try {
        out.history = run_bo(problem, rep_cfg);
        out.ok = true;
      } catch (const RunAborted& e) {
        out.error = e.what();
        out.history = e.partial();
      } catch (const std::exception& e) {
        out.error = e.what();
      }
    }
  };

  const int n_workers = worker_cap(n_repetitions);
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  std::vector<History> ok;
  for (const RepetitionOutcome& out : result.repetitions)
    if (out.ok) ok.push_back(out.history);
  if (!ok.empty()) {
    result.stats = campaign_stats(ok, problem.known_minimum);
  } else {
    result.stats.final_mean = std::numeric_limits<double>::quiet_NaN();
    result.stats.final_std = std::numeric_limits<double>::quiet_NaN();
  }
  result.stats.n_succeeded = static_cast<int>(ok.size());
  result.stats.n_failed = n_repetitions - result.stats.n_succeeded;
  return result;
}

namespace {

struct Scored {
  double rmse = 0.0;
  double loglik = 0.0;
};

Scored score_predictions(const Eigen::VectorXd& mean, const Eigen::VectorXd& var,
                         const Eigen::VectorXd& y_test) {
  Scored s;
  s.rmse = std::sqrt((mean - y_test).squaredNorm() / y_test.size());
  for (Eigen::Index j = 0; j < y_test.size(); ++j)
    // Floor the variance so exact interpolation does not send a single
    // log-density term to infinity.
    s.loglik += gaussian_log_density(y_test[j], mean[j], std::max(var[j], 1e-12));
  return s;
}

Scored score_model(BenchModelKind kind, const Problem& problem, const ModelBenchConfig& cfg,
                   const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   const Eigen::MatrixXd& Xt, const Eigen::VectorXd& yt, RngStream& rng) {
  switch (kind) {
    case BenchModelKind::kConstantMean: {
      const double mean = y.mean();
      const double var = (y.array() - mean).square().sum() / y.size();
      return score_predictions(Eigen::VectorXd::Constant(yt.size(), mean),
                               Eigen::VectorXd::Constant(yt.size(), var), yt);
    }
    case BenchModelKind::kGp: {
      GpFitConfig gc = cfg.gp;
      gc.seed = rng.next_u64();
      const GpModel gp = fit_gp(X, y, gc);
      const GpPrediction p = gp_posterior(gp, Xt);
      const double noise_raw = gp.y_std.var_to_raw(gp.noise_var);
      return score_predictions(p.mean, (p.var.array() + noise_raw).matrix(), yt);
    }
    case BenchModelKind::kDgpAdam:
    case BenchModelKind::kDgpNatGrad: {
      TrainConfig tc = cfg.train;
      tc.mode = kind == BenchModelKind::kDgpAdam ? TrainerMode::kAdamOnly
                                                 : TrainerMode::kNatGrad;
      DgpArchitecture arch;
      arch.input_dim = static_cast<int>(X.cols());
      arch.hidden_widths.assign(static_cast<std::size_t>(cfg.layers - 1),
                                static_cast<int>(X.cols()));
      arch.num_inducing = static_cast<int>(X.rows());
      const DgpModel m = fit_dgp(X, y, arch, tc, rng);
      const DgpPredictor pred(m);
      const DgpPredictor::Moments mom = pred.predict(Xt, cfg.s_pred, rng, /*include_noise=*/true);
      return score_predictions(mom.mean, mom.var, yt);
    }
  }
  throw std::logic_error("score_model: unknown kind");
}

}  // namespace

std::vector<ModelBenchCell> model_quality_benchmark(const Problem& problem,
                                                    const ModelBenchConfig& cfg) {
  if (cfg.density < 1) throw std::invalid_argument("model_quality_benchmark: density >= 1");
  if (cfg.n_repetitions < 1)
    throw std::invalid_argument("model_quality_benchmark: need a repetition");
  if (cfg.n_test < 1) throw std::invalid_argument("model_quality_benchmark: need test points");
  if (cfg.layers < 1) throw std::invalid_argument("model_quality_benchmark: need a layer");

  const int d = problem.dim();
  const int reps = cfg.n_repetitions;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  std::vector<ModelBenchCell> cells(cfg.kinds.size());
  for (std::size_t k = 0; k < cfg.kinds.size(); ++k) {
    cells[k].kind = cfg.kinds[k];
    cells[k].rmse_per_rep = Eigen::VectorXd::Constant(reps, nan);
    cells[k].loglik_per_rep = Eigen::VectorXd::Constant(reps, nan);
  }

  const RngStream base(cfg.seed);
  for (int r = 0; r < reps; ++r) {
    const RngStream rep = base.child(static_cast<std::uint64_t>(r));
    RngStream doe_rng = rep.child(0);
    RngStream test_rng = rep.child(1);
    const Eigen::MatrixXd X = lhs_sample(cfg.density * d, problem.bounds, doe_rng);
    const Eigen::MatrixXd Xt = lhs_sample(cfg.n_test, problem.bounds, test_rng);
    Eigen::VectorXd y(X.rows()), yt(Xt.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) y[i] = problem.objective(X.row(i).transpose());
    for (Eigen::Index i = 0; i < Xt.rows(); ++i)
      yt[i] = problem.objective(Xt.row(i).transpose());

    for (std::size_t k = 0; k < cfg.kinds.size(); ++k) {
      RngStream fit_rng = rep.child(2 + static_cast<std::uint64_t>(k));
      try {
        const Scored s = score_model(cfg.kinds[k], problem, cfg, X, y, Xt, yt, fit_rng);
        cells[k].rmse_per_rep[r] = s.rmse;
        cells[k].loglik_per_rep[r] = s.loglik;
      } catch (const std::exception&) {
        ++cells[k].failures;
      }
    }
  }

  for (ModelBenchCell& cell : cells) {
    std::vector<double> rmse, ll;
    for (int r = 0; r < reps; ++r) {
      if (std::isnan(cell.rmse_per_rep[r])) continue;
      rmse.push_back(cell.rmse_per_rep[r]);
      ll.push_back(cell.loglik_per_rep[r]);
    }
    if (rmse.empty()) {
      cell.rmse_mean = cell.rmse_std = cell.loglik_mean = cell.loglik_std = nan;
      continue;
    }
    const auto agg = [](const std::vector<double>& v, double& mean, double& std) {
      const Eigen::Map<const Eigen::VectorXd> m(v.data(), static_cast<Eigen::Index>(v.size()));
      mean = m.mean();
      std = sample_std(m, mean);
    };
    agg(rmse, cell.rmse_mean, cell.rmse_std);
    agg(ll, cell.loglik_mean, cell.loglik_std);
  }
  return cells;
}

}  // namespace dego
