#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <stdexcept>
#include <vector>

#include "dego/engine.hpp"
#include "dego/problems.hpp"
#include "dego/rng.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

dego::EvalRecord record_with(double y, bool feasible) {
  dego::EvalRecord r;
  r.x = VectorXd::Zero(1);
  r.y = y;
  r.feasible = feasible;
  return r;
}

dego::History history_with_y_min(const std::vector<double>& y_min) {
  dego::History h;
  h.n_init = 1;
  for (const double v : y_min) {
    dego::EvalRecord r = record_with(v, true);
    r.y_min = v;
    h.records.push_back(std::move(r));
  }
  return h;
}

// A small GP-surrogate configuration that keeps loop tests fast.
dego::DegoConfig small_gp_config() {
  dego::DegoConfig cfg;
  cfg.objective_kind = dego::ModelKind::kGp;
  cfg.gp.adam_steps = 150;
  cfg.gp.restarts = 2;
  cfg.acquisition.de.population = 40;
  cfg.acquisition.de.generations = 30;
  return cfg;
}

// Checks every structural loop invariant at once: row count, iteration
// numbering, the cold/warm cadence, box membership, and that the running
// minimum column is the feasible minimum of the rows above it.
void expect_valid_history(const dego::History& h, const dego::Problem& problem, int n_init,
                          int n_add, int n_update) {
  ASSERT_EQ(h.size(), n_init + n_add);
  EXPECT_EQ(h.n_init, n_init);
  const int n_constraints = static_cast<int>(problem.constraints.size());
  double running = dego::kNoFeasible;
  for (int i = 0; i < h.size(); ++i) {
    const dego::EvalRecord& r = h.records[static_cast<std::size_t>(i)];
    if (i < n_init) {
      EXPECT_EQ(r.iteration, 0);
      EXPECT_EQ(r.retrain, dego::RetrainMode::kNone);
    } else {
      const int k = i - n_init;
      EXPECT_EQ(r.iteration, k + 1);
      EXPECT_EQ(r.retrain,
                k % n_update == 0 ? dego::RetrainMode::kCold : dego::RetrainMode::kWarm);
    }
    EXPECT_TRUE(problem.bounds.contains(r.x));
    EXPECT_TRUE(std::isfinite(r.y));
    ASSERT_EQ(r.constraints.size(), n_constraints);
    EXPECT_EQ(r.feasible, (r.constraints.array() <= 0.0).all());
    if (r.feasible) running = std::min(running, r.y);
    EXPECT_EQ(r.y_min, running);
    if (i > 0) EXPECT_LE(r.y_min, h.records[static_cast<std::size_t>(i - 1)].y_min);
    EXPECT_GE(r.wall_ms, 0.0);
  }
}

// Deterministic draw from a stationary smooth prior via a cosine-feature
// expansion; used as a surface where a fitted model must beat a constant.
dego::Problem smooth_random_surface(std::uint64_t seed) {
  const int k = 100;
  const double inv_lengthscale = 4.0;
  auto omega = std::make_shared<std::vector<double>>();
  auto phase = std::make_shared<std::vector<double>>();
  dego::RngStream rng(seed);
  for (int j = 0; j < k; ++j) omega->push_back(rng.normal() * inv_lengthscale);
  for (int j = 0; j < k; ++j) phase->push_back(rng.uniform() * 2.0 * M_PI);
  dego::Problem p;
  p.name = "smooth-random-1d";
  p.bounds = dego::Box::uniform(1, 0.0, 1.0);
  p.objective = [omega, phase, k](const VectorXd& x) {
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += std::cos((*omega)[static_cast<std::size_t>(j)] * x[0] +
                                              (*phase)[static_cast<std::size_t>(j)]);
    return std::sqrt(2.0 / k) * s;
  };
  return p;
}

TEST(FeasibleMin, EnumeratesAHandCheckedFixture) {
  dego::History h;
  h.records = {record_with(5.0, true), record_with(3.0, false), record_with(4.0, true),
               record_with(7.0, true)};
  EXPECT_EQ(dego::feasible_min(h), 4.0);

  for (auto& r : h.records) r.feasible = false;
  EXPECT_EQ(dego::feasible_min(h), dego::kNoFeasible);

  dego::History empty;
  EXPECT_THROW(dego::feasible_min(empty), std::invalid_argument);
}

TEST(FeasibleMin, UnconstrainedRowsGiveThePlainMinimum) {
  dego::History h;
  h.records = {record_with(2.5, true), record_with(-1.0, true), record_with(0.0, true)};
  EXPECT_EQ(dego::feasible_min(h), -1.0);
}

TEST(NearDuplicate, UsesBoxScaledDistances) {
  const dego::Box box(Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(10.0, 1.0));
  MatrixXd X(2, 2);
  X << 5.0, 0.5, 9.0, 0.1;

  VectorXd x(2);
  x << 5.0 + 4e-8, 0.5;  // 4e-9 of the first width
  EXPECT_TRUE(dego::near_duplicate(X, x, box));

  x << 5.0 + 2e-7, 0.5;  // 2e-8 of the first width
  EXPECT_FALSE(dego::near_duplicate(X, x, box));

  // The same absolute offset along the narrow dimension is 20x the tolerance.
  x << 5.0, 0.5 + 2e-8;
  EXPECT_FALSE(dego::near_duplicate(X, x, box));

  EXPECT_THROW(dego::near_duplicate(X, VectorXd::Zero(3), box), std::invalid_argument);
}

TEST(Engine, QuadraticGpLoopFindsTheMinimum) {
  dego::DegoConfig cfg = small_gp_config();
  cfg.n_init = 5;
  cfg.n_add = 15;
  cfg.seed = 3;
  const dego::Problem p = dego::quad1d();
  const dego::History h = dego::run_gp_baseline(p, cfg);
  expect_valid_history(h, p, 5, 15, cfg.n_update);
  EXPECT_LE(h.records.back().y_min, 1e-3);
}

TEST(Engine, RerunsAreBitIdentical) {
  dego::DegoConfig cfg = small_gp_config();
  cfg.n_init = 5;
  cfg.n_add = 5;
  cfg.seed = 19;
  const dego::Problem p = dego::quad1d();
  const dego::History a = dego::run_bo(p, cfg);
  const dego::History b = dego::run_bo(p, cfg);
  ASSERT_EQ(a.size(), b.size());
  for (int i = 0; i < a.size(); ++i) {
    const auto& ra = a.records[static_cast<std::size_t>(i)];
    const auto& rb = b.records[static_cast<std::size_t>(i)];
    EXPECT_TRUE(ra.x == rb.x);
    EXPECT_EQ(ra.y, rb.y);
    EXPECT_EQ(ra.y_min, rb.y_min);
    EXPECT_EQ(ra.feasible, rb.feasible);
  }
}

TEST(Engine, RefitEventsKeepTheInducingCountFixed) {
  dego::DegoConfig cfg;
  cfg.n_init = 6;
  cfg.n_add = 3;
  cfg.objective_kind = dego::ModelKind::kDgp;
  cfg.layers = 2;
  cfg.train.iter = 40;
  cfg.train.s_train = 3;
  cfg.train.tol = 0.0;
  cfg.s_pred = 16;
  cfg.acquisition.de.population = 20;
  cfg.acquisition.de.generations = 10;
  cfg.seed = 11;

  std::vector<dego::RetrainMode> modes;
  std::vector<int> iterations;
  const auto observer = [&](const dego::RefitEvent& e) {
    EXPECT_EQ(e.output, 0);
    ASSERT_NE(e.dgp, nullptr);
    EXPECT_EQ(e.gp, nullptr);
    // Every layer holds one inducing input per point of the full budget,
    // from the very first refit on.
    for (const auto& layer : e.dgp->layers) EXPECT_EQ(layer.Z.rows(), 9);
    modes.push_back(e.mode);
    iterations.push_back(e.iteration);
  };

  const dego::Problem p = dego::xiong_problem();
  const dego::History h = dego::run_bo(p, cfg, observer);
  expect_valid_history(h, p, 6, 3, cfg.n_update);

  ASSERT_EQ(modes.size(), 3u);
  EXPECT_EQ(iterations, (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(modes[0], dego::RetrainMode::kCold);
  EXPECT_EQ(modes[1], dego::RetrainMode::kWarm);
  EXPECT_EQ(modes[2], dego::RetrainMode::kWarm);
}

TEST(Engine, ConstrainedLoopTracksOnlyFeasibleMinima) {
  dego::DegoConfig cfg = small_gp_config();
  cfg.n_init = 8;
  cfg.n_add = 10;
  cfg.constraint_kinds = {dego::ModelKind::kGp};
  cfg.gp.restarts = 1;
  cfg.seed = 0;
  const dego::Problem p = dego::constrained2d();
  const dego::History h = dego::run_bo(p, cfg);
  expect_valid_history(h, p, 8, 10, cfg.n_update);
  ASSERT_TRUE(std::isfinite(h.records.back().y_min));
  // The distance-to-origin objective is small only near the feasible
  // region's lower-left boundary; reaching 0.1 needs targeted sampling.
  EXPECT_LE(h.records.back().y_min, 0.1);
}

TEST(Engine, SearchesForFeasibilityWhenTheDesignHasNone) {
  dego::Problem p;
  p.name = "sliver";
  p.bounds = dego::Box::uniform(1, 0.0, 1.0);
  p.objective = [](const VectorXd& x) { return x[0] * x[0]; };
  p.constraints = {[](const VectorXd& x) { return 0.95 - x[0]; }};

  dego::DegoConfig cfg = small_gp_config();
  cfg.n_init = 5;
  cfg.n_add = 6;
  cfg.gp.adam_steps = 120;
  cfg.gp.restarts = 1;
  cfg.acquisition.de.population = 30;
  cfg.acquisition.de.generations = 25;
  cfg.seed = 2;  // this design's five points all land below 0.95

  const dego::History h = dego::run_bo(p, cfg);
  expect_valid_history(h, p, 5, 6, cfg.n_update);
  for (int i = 0; i < 5; ++i) {
    EXPECT_FALSE(h.records[static_cast<std::size_t>(i)].feasible);
    EXPECT_EQ(h.records[static_cast<std::size_t>(i)].y_min, dego::kNoFeasible);
  }
  // The feasibility search recovers on the first added point.
  const dego::EvalRecord& first = h.records[5];
  EXPECT_TRUE(first.feasible);
  EXPECT_GE(first.x[0], 0.95);
  EXPECT_TRUE(std::isfinite(h.records.back().y_min));
}

TEST(Engine, AbortCarriesTheEvaluatedPrefix) {
  auto count = std::make_shared<std::atomic<int>>(0);
  dego::Problem p;
  p.name = "flaky";
  p.bounds = dego::Box::uniform(1, 0.0, 1.0);
  p.objective = [count](const VectorXd& x) {
    if (count->fetch_add(1) == 5) throw std::runtime_error("synthetic failure");
    const double t = x[0] - 0.3;
    return t * t;
  };

  dego::DegoConfig cfg = small_gp_config();
  cfg.n_init = 5;
  cfg.n_add = 3;
  cfg.gp.adam_steps = 60;
  cfg.gp.restarts = 1;

  try {
    dego::run_bo(p, cfg);
    FAIL() << "expected RunAborted";
  } catch (const dego::RunAborted& e) {
    EXPECT_NE(std::string(e.what()).find("synthetic failure"), std::string::npos);
    ASSERT_EQ(e.partial().size(), 5);  // the full design, nothing after it
    for (const auto& r : e.partial().records) EXPECT_EQ(r.iteration, 0);
  }
}

TEST(Engine, RejectsBadConfigs) {
  const dego::Problem p = dego::quad1d();
  const dego::DegoConfig good = small_gp_config();

  dego::DegoConfig cfg = good;
  cfg.n_init = 1;  // below d + 1
  EXPECT_THROW(dego::run_bo(p, cfg), std::invalid_argument);

  cfg = good;
  cfg.n_add = -2;
  EXPECT_THROW(dego::run_bo(p, cfg), std::invalid_argument);

  cfg = good;
  cfg.n_update = 0;
  EXPECT_THROW(dego::run_bo(p, cfg), std::invalid_argument);

  cfg = good;
  cfg.layers = 0;
  EXPECT_THROW(dego::run_bo(p, cfg), std::invalid_argument);

  cfg = good;
  cfg.s_pred = 0;
  EXPECT_THROW(dego::run_bo(p, cfg), std::invalid_argument);

  cfg = good;
  cfg.acquisition.de.population = 2;
  EXPECT_THROW(dego::run_bo(p, cfg), std::invalid_argument);

  cfg = good;
  cfg.acquisition.ev_thresholds = {1e-3};  // but the problem is unconstrained
  EXPECT_THROW(dego::run_bo(p, cfg), std::invalid_argument);

  cfg = good;
  cfg.constraint_kinds = {dego::ModelKind::kGp};
  EXPECT_THROW(dego::run_bo(p, cfg), std::invalid_argument);
}

TEST(Campaign, StatisticsMatchAHandComputedFixture) {
  const std::vector<dego::History> histories = {history_with_y_min({4, 3, 2, 1}),
                                                history_with_y_min({5, 4, 3, 2}),
                                                history_with_y_min({6, 5, 4, 3})};
  const dego::CampaignStats s = dego::campaign_stats(histories, 0.5);

  ASSERT_EQ(s.median.size(), 4);
  for (int i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(s.median[i], 5.0 - i);
    EXPECT_DOUBLE_EQ(s.q1[i], 4.5 - i);
    EXPECT_DOUBLE_EQ(s.q3[i], 5.5 - i);
  }
  EXPECT_DOUBLE_EQ(s.final_mean, 2.0);
  EXPECT_DOUBLE_EQ(s.final_std, 1.0);
  ASSERT_TRUE(s.gap_to_known.has_value());
  EXPECT_DOUBLE_EQ(*s.gap_to_known, 1.5);
  EXPECT_EQ(s.n_succeeded, 3);
  EXPECT_EQ(s.n_failed, 0);

  const dego::CampaignStats one = dego::campaign_stats({history_with_y_min({2, 1})}, {});
  EXPECT_DOUBLE_EQ(one.final_std, 0.0);
  EXPECT_FALSE(one.gap_to_known.has_value());
}

TEST(Campaign, RejectsEmptyOrRaggedHistories) {
  EXPECT_THROW(dego::campaign_stats({}, {}), std::invalid_argument);
  EXPECT_THROW(
      dego::campaign_stats({history_with_y_min({1, 2}), history_with_y_min({1})}, {}),
      std::invalid_argument);

  const dego::Problem p = dego::quad1d();
  EXPECT_THROW(dego::run_campaign(p, small_gp_config(), 0, 1), std::invalid_argument);
}

TEST(Campaign, ARepetitionMatchesItsStandaloneRun) {
  dego::DegoConfig cfg = small_gp_config();
  cfg.n_init = 5;
  cfg.n_add = 4;
  cfg.gp.adam_steps = 60;
  cfg.gp.restarts = 1;
  cfg.acquisition.de.population = 20;
  cfg.acquisition.de.generations = 10;

  const dego::Problem p = dego::quad1d();
  const dego::CampaignResult r = dego::run_campaign(p, cfg, 2, 42);
  ASSERT_EQ(r.repetitions.size(), 2u);
  EXPECT_TRUE(r.repetitions[0].ok);
  EXPECT_TRUE(r.repetitions[1].ok);

  // Each repetition draws its seed from its own child stream of the base
  // seed, so it can be reproduced with a plain run.
  const std::uint64_t seed1 = dego::RngStream(42).child(1).next_u64();
  EXPECT_EQ(r.repetitions[1].seed, seed1);
  dego::DegoConfig solo = cfg;
  solo.seed = seed1;
  const dego::History h = dego::run_bo(p, solo);
  ASSERT_EQ(h.size(), r.repetitions[1].history.size());
  for (int i = 0; i < h.size(); ++i) {
    EXPECT_TRUE(h.records[static_cast<std::size_t>(i)].x ==
                r.repetitions[1].history.records[static_cast<std::size_t>(i)].x);
    EXPECT_EQ(h.records[static_cast<std::size_t>(i)].y,
              r.repetitions[1].history.records[static_cast<std::size_t>(i)].y);
  }
}

TEST(Campaign, SameBaseSeedIsDeterministicAcrossWorkers) {
  dego::DegoConfig cfg = small_gp_config();
  cfg.n_init = 5;
  cfg.n_add = 3;
  cfg.gp.adam_steps = 60;
  cfg.gp.restarts = 1;
  cfg.acquisition.de.population = 20;
  cfg.acquisition.de.generations = 10;

  const dego::Problem p = dego::quad1d();
  const dego::CampaignResult a = dego::run_campaign(p, cfg, 4, 7);
  const dego::CampaignResult b = dego::run_campaign(p, cfg, 4, 7);
  ASSERT_EQ(a.repetitions.size(), b.repetitions.size());
  for (std::size_t r = 0; r < a.repetitions.size(); ++r) {
    ASSERT_EQ(a.repetitions[r].history.size(), b.repetitions[r].history.size());
    for (int i = 0; i < a.repetitions[r].history.size(); ++i) {
      EXPECT_TRUE(a.repetitions[r].history.records[static_cast<std::size_t>(i)].x ==
                  b.repetitions[r].history.records[static_cast<std::size_t>(i)].x);
      EXPECT_EQ(a.repetitions[r].history.records[static_cast<std::size_t>(i)].y,
                b.repetitions[r].history.records[static_cast<std::size_t>(i)].y);
    }
  }
  EXPECT_EQ(a.stats.final_mean, b.stats.final_mean);
}

TEST(Campaign, FailuresKeepPartialHistoriesAndLeaveTheStats) {
  // One worker serializes the repetitions, so the failure lands in the
  // first one: its design completes, the first infill evaluation throws.
  setenv("DEGO_MAX_WORKERS", "1", 1);
  auto count = std::make_shared<std::atomic<int>>(0);
  dego::Problem p;
  p.name = "flaky";
  p.bounds = dego::Box::uniform(1, 0.0, 1.0);
  p.objective = [count](const VectorXd& x) {
    if (count->fetch_add(1) == 5) throw std::runtime_error("synthetic failure");
    const double t = x[0] - 0.3;
    return t * t;
  };

  dego::DegoConfig cfg = small_gp_config();
  cfg.n_init = 5;
  cfg.n_add = 3;
  cfg.gp.adam_steps = 60;
  cfg.gp.restarts = 1;
  cfg.acquisition.de.population = 20;
  cfg.acquisition.de.generations = 10;

  const dego::CampaignResult r = dego::run_campaign(p, cfg, 2, 5);
  unsetenv("DEGO_MAX_WORKERS");

  ASSERT_EQ(r.repetitions.size(), 2u);
  EXPECT_FALSE(r.repetitions[0].ok);
  EXPECT_NE(r.repetitions[0].error.find("synthetic failure"), std::string::npos);
  EXPECT_EQ(r.repetitions[0].history.size(), 5);
  EXPECT_TRUE(r.repetitions[1].ok);
  EXPECT_EQ(r.repetitions[1].history.size(), 8);

  // The statistics cover the surviving repetition alone.
  EXPECT_EQ(r.stats.n_succeeded, 1);
  EXPECT_EQ(r.stats.n_failed, 1);
  EXPECT_EQ(r.stats.median.size(), 8);
  EXPECT_EQ(r.stats.final_mean, r.repetitions[1].history.records.back().y_min);
  EXPECT_EQ(r.stats.final_std, 0.0);
}

TEST(ModelBench, ConstantMeanIsExactOnAConstantSurface) {
  dego::Problem p;
  p.name = "constant";
  p.bounds = dego::Box::uniform(1, 0.0, 1.0);
  p.objective = [](const VectorXd&) { return 7.25; };

  dego::ModelBenchConfig cfg;
  cfg.density = 6;
  cfg.n_repetitions = 3;
  cfg.kinds = {dego::BenchModelKind::kConstantMean};
  cfg.n_test = 50;
  cfg.seed = 21;

  const std::vector<dego::ModelBenchCell> cells = dego::model_quality_benchmark(p, cfg);
  ASSERT_EQ(cells.size(), 1u);
  const dego::ModelBenchCell& c = cells[0];
  EXPECT_EQ(c.kind, dego::BenchModelKind::kConstantMean);
  EXPECT_EQ(c.failures, 0);
  ASSERT_EQ(c.rmse_per_rep.size(), 3);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(c.rmse_per_rep[i], 0.0);
  EXPECT_EQ(c.rmse_mean, 0.0);
  EXPECT_EQ(c.rmse_std, 0.0);
  EXPECT_TRUE(std::isfinite(c.loglik_mean));

  const std::vector<dego::ModelBenchCell> again = dego::model_quality_benchmark(p, cfg);
  EXPECT_EQ(again[0].loglik_mean, c.loglik_mean);
}

TEST(ModelBench, TheGpBeatsTheConstantMeanOnASmoothSurface) {
  dego::ModelBenchConfig cfg;
  cfg.density = 10;
  cfg.n_repetitions = 10;
  cfg.kinds = {dego::BenchModelKind::kConstantMean, dego::BenchModelKind::kGp};
  cfg.n_test = 200;
  cfg.gp.adam_steps = 200;
  cfg.gp.restarts = 2;
  cfg.seed = 13;

  const dego::Problem p = smooth_random_surface(99);
  const std::vector<dego::ModelBenchCell> cells = dego::model_quality_benchmark(p, cfg);
  ASSERT_EQ(cells.size(), 2u);
  const dego::ModelBenchCell& flat = cells[0];
  const dego::ModelBenchCell& gp = cells[1];
  EXPECT_EQ(flat.failures, 0);
  EXPECT_EQ(gp.failures, 0);

  int rmse_wins = 0, loglik_wins = 0;
  for (int i = 0; i < 10; ++i) {
    if (gp.rmse_per_rep[i] < flat.rmse_per_rep[i]) ++rmse_wins;
    if (gp.loglik_per_rep[i] > flat.loglik_per_rep[i]) ++loglik_wins;
  }
  EXPECT_GE(rmse_wins, 9);
  EXPECT_GE(loglik_wins, 9);
  EXPECT_LT(gp.rmse_mean, flat.rmse_mean);
}

}  // namespace
