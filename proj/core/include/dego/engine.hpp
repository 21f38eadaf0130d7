#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dego/acquisition.hpp"
#include "dego/gp.hpp"
#include "dego/problem.hpp"
#include "dego/trainer.hpp"

namespace dego {

// Value of the running minimum while no feasible point exists.
inline constexpr double kNoFeasible = std::numeric_limits<double>::infinity();

// Surrogate family for one output of a problem.
enum class ModelKind { kGp, kDgp };

enum class RetrainMode { kNone, kCold, kWarm };  // kNone marks initial-design rows

// One evaluated point.  Rows are appended in evaluation order: the initial
// design carries iteration 0, the k-th added point iteration k+1.
struct EvalRecord {
  int iteration = 0;
  Eigen::VectorXd x;
  double y = 0.0;
  Eigen::VectorXd constraints;  // raw constraint values, one per constraint
  bool feasible = true;
  double y_min = kNoFeasible;  // feasible minimum over all rows so far
  RetrainMode retrain = RetrainMode::kNone;
  double wall_ms = 0.0;  // this row's share of wall time (train + infill + evaluate)
};

struct History {
  std::vector<EvalRecord> records;
  int n_init = 0;

  int size() const { return static_cast<int>(records.size()); }
};

// Minimum objective over the rows satisfying every constraint; kNoFeasible
// when no row does.  Unconstrained rows are always feasible, so this is the
// plain minimum for unconstrained problems.
double feasible_min(const History& history);

// Scaled duplicate test: true when some row of X_raw is within tol of x in
// the per-dimension width units of the box.
bool near_duplicate(const Eigen::MatrixXd& X_raw, const Eigen::VectorXd& x, const Box& bounds,
                    double tol = 1e-8);

// Settings for one optimization run.  Zero n_init / n_add mean the
// dimension-scaled defaults 5*d and 10*d.  Every surrogate keeps its
// inducing-point count fixed at n_init + n_add for the whole run, so the
// final iteration trains with one inducing input per data point.
struct DegoConfig {
  int n_init = 0;
  int n_add = 0;
  int layers = 2;  // GP layers in the stack; 1 is a single sparse layer
  TrainConfig train;
  int s_pred = 100;   // predictive draws per candidate during infill search
  int n_update = 5;   // cold retrain period; other iterations warm-start
  AcquisitionSpec acquisition;
  std::uint64_t seed = 0;
  ModelKind objective_kind = ModelKind::kDgp;
  // Per-constraint surrogate kinds; empty means the objective's kind.
  std::vector<ModelKind> constraint_kinds;
  GpFitConfig gp;  // applies wherever a kind is kGp
};

// Notification after each surrogate refit, before the infill search that
// uses it.  Exactly one model pointer is non-null; output 0 is the
// objective, then the constraints in order.
struct RefitEvent {
  int iteration = 0;
  int output = 0;
  RetrainMode mode = RetrainMode::kCold;
  const DgpModel* dgp = nullptr;
  const GpModel* gp = nullptr;
};
using RefitObserver = std::function<void(const RefitEvent&)>;

// Thrown when an objective or constraint evaluator fails mid-run; carries
// every row evaluated before the failure so callers can persist it.
class RunAborted : public std::runtime_error {
 public:
  RunAborted(const std::string& what, History partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const History& partial() const { return partial_; }

 private:
  History partial_;
};

// The optimization loop: evaluate a Latin hypercube design, then repeat
// {refit one surrogate per output (cold every n_update-th iteration, warm
// otherwise), maximize the infill criterion, evaluate the new point}.  When
// no feasible point exists yet the infill criterion switches to the product
// of the constraints' feasibility probabilities until one appears.  A
// proposal landing within 1e-8 (scaled) of an evaluated point triggers one
// fresh-seeded re-run of the infill search.  Fully deterministic for a
// fixed config on one platform.
History run_bo(const Problem& problem, const DegoConfig& cfg,
               const RefitObserver& observer = {});

// run_bo with every output modeled by the deep stack.
History run_dego(const Problem& problem, const DegoConfig& cfg,
                 const RefitObserver& observer = {});

// run_bo with every output modeled by the dense GP and the closed-form
// criteria.
History run_gp_baseline(const Problem& problem, const DegoConfig& cfg,
                        const RefitObserver& observer = {});

// ----- repeated-seed campaigns -------------------------------------------------

struct RepetitionOutcome {
  int repetition = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;  // empty when ok
  History history;    // partial when the run aborted
};

struct CampaignStats {
  // Per-row statistics of the running minimum across successful repetitions,
  // indexed like the history rows (initial design first).
  Eigen::VectorXd q1, median, q3;
  double final_mean = 0.0;
  double final_std = 0.0;  // sample standard deviation; 0 for one repetition
  std::optional<double> gap_to_known;  // final_mean - known minimum, when published
  int n_succeeded = 0;
  int n_failed = 0;
};

struct CampaignResult {
  CampaignStats stats;
  std::vector<RepetitionOutcome> repetitions;
};

// Statistics of complete histories (linear-interpolation quartiles).  All
// histories must share the same row count.
CampaignStats campaign_stats(const std::vector<History>& histories,
                             std::optional<double> known_minimum);

// Runs n_repetitions independent copies of run_bo, each seeded from its own
// child of base_seed, so repetition r is reproducible in isolation and the
// whole campaign is deterministic.  Failed repetitions keep their partial
// history and error text and are excluded from the statistics.  Repetitions
// run concurrently up to DEGO_MAX_WORKERS (default: hardware concurrency).
CampaignResult run_campaign(const Problem& problem, const DegoConfig& cfg, int n_repetitions,
                            std::uint64_t base_seed);

// ----- surrogate quality benchmarking ------------------------------------------

enum class BenchModelKind {
  kConstantMean,  // predicts the training mean with the training variance
  kGp,
  kDgpAdam,     // deep stack trained by Adam alone
  kDgpNatGrad,  // deep stack trained by the alternating natural-gradient scheme
};

struct ModelBenchConfig {
  int density = 10;  // training points per input dimension
  int n_repetitions = 10;
  std::vector<BenchModelKind> kinds = {BenchModelKind::kGp, BenchModelKind::kDgpAdam,
                                       BenchModelKind::kDgpNatGrad};
  int layers = 2;     // stack depth for the deep kinds
  int n_test = 1000;  // held-out Latin hypercube test points
  int s_pred = 100;
  TrainConfig train;  // deep kinds; the optimizer mode is overridden per kind
  GpFitConfig gp;
  std::uint64_t seed = 0;
};

struct ModelBenchCell {
  BenchModelKind kind = BenchModelKind::kGp;
  // Across successful repetitions: root-mean-square prediction error and the
  // summed predictive log density over the test set.
  double rmse_mean = 0.0, rmse_std = 0.0;
  double loglik_mean = 0.0, loglik_std = 0.0;
  Eigen::VectorXd rmse_per_rep, loglik_per_rep;  // NaN where the fit failed
  int failures = 0;
};

// Per repetition: a fresh density*d training design and an independent
// n_test design, both Latin hypercube; each model kind is fit on the former
// and scored on the latter (the log density includes observation noise).
std::vector<ModelBenchCell> model_quality_benchmark(const Problem& problem,
                                                    const ModelBenchConfig& cfg);

const char* to_string(BenchModelKind kind);
const char* to_string(RetrainMode mode);

}  // namespace dego
