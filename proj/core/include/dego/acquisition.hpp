#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "dego/box.hpp"
#include "dego/rng.hpp"

namespace dego {

// ----- infill criteria --------------------------------------------------------
//
// All criteria consume the moments of a Gaussian predictive distribution and
// handle std = 0 as the point-mass limit, so callers never need to guard a
// collapsed posterior.  Outputs are clamped to their mathematical ranges:
// the analytic expressions can round to a negative subnormal deep in the
// no-improvement tail.

// E[max(0, y_min - t)] for t ~ N(mean, std^2):
//   (y_min - mean) * Phi(z) + std * phi(z),  z = (y_min - mean) / std.
// std = 0 gives max(0, y_min - mean).
double expected_improvement(double mean, double std, double y_min);

// P(t < y_min) = Phi((y_min - mean) / std); std = 0 gives the strict
// indicator of mean < y_min.
double probability_of_improvement(double mean, double std, double y_min);

// Monte-Carlo improvement: the average of max(0, y_min - s) over predictive
// draws.  Needs at least one sample.
double ei_sampling(const Eigen::VectorXd& samples, double y_min);

// E[max(0, t)] for a constraint value t ~ N(mean, std^2), feasibility being
// t <= 0:
//   mean * Phi(mean / std) + std * phi(mean / std).
// std = 0 gives max(0, mean).
double expected_violation(double mean, double std);

// P(t <= 0) = Phi(-mean / std); std = 0 gives the indicator of mean <= 0.
// Independent constraints combine by multiplying their probabilities.
double probability_of_feasibility(double mean, double std);

// ----- global optimization of a criterion -------------------------------------

enum class Criterion {
  kExpectedImprovement,
  kProbabilityOfImprovement,
  // Improvement averaged over predictive draws instead of the moment-matched
  // closed form; the only criterion that sees a non-Gaussian predictive.
  kSamplingImprovement,
};

// How constraints enter candidate selection.
enum class ConstraintMode {
  // Candidates whose expected violation exceeds a per-constraint threshold
  // rank below every acceptable candidate, ordered by total excess.
  kExpectedViolation,
  // The criterion is multiplied by the product of per-constraint
  // feasibility probabilities; no candidate is ever excluded outright.
  kFeasibilityProduct,
  // Rank by the posterior mean of each constraint against a zero threshold
  // (accept only where the surrogate predicts feasibility).
  kDirect,
};

struct DeSettings {
  int population = 400;
  int generations = 100;
  double weight = 0.7;     // differential weight F
  double crossover = 0.9;  // binomial crossover rate CR
};

struct RefineSettings {
  // Coordinate pattern-search polish applied to the best individual: each
  // iteration polls +/- one step along every axis and halves the step when
  // no poll improves.
  int iterations = 200;
  double initial_step = 0.05;  // fraction of the box width per coordinate
};

// Settings bundle for one infill selection.  y_min is the incumbent feasible
// best in whatever output space the criterion evaluator works in; the caller
// refreshes it every iteration.
struct AcquisitionSpec {
  Criterion criterion = Criterion::kExpectedImprovement;
  double y_min = 0.0;
  ConstraintMode constraint_mode = ConstraintMode::kExpectedViolation;
  // One acceptance threshold per constraint evaluator (>= 0 each); empty
  // means a zero threshold for every constraint.
  std::vector<double> ev_thresholds;
  DeSettings de;
  RefineSettings refine;
};

// Throws std::invalid_argument unless population >= 4, generations >= 1,
// thresholds are all >= 0, the crossover rate lies in [0, 1], and the
// differential weight, refine iterations and step are positive.
void validate(const AcquisitionSpec& spec);

// Vectorized evaluator: one value per row of the input matrix.  Evaluators
// must be pure, so evaluating a population in one batch equals evaluating
// its rows one at a time.
using BatchEvaluator = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

// Maximizes the criterion over the box with differential evolution
// (rand/1/bin) followed by the pattern-search polish, and returns the
// incumbent.  `violations` holds one evaluator per constraint returning the
// violation measure compared against spec.ev_thresholds: candidates over any
// threshold are ranked by total excess violation below every acceptable
// candidate, so an acceptable candidate is returned whenever the search saw
// one.  Under kFeasibilityProduct the caller folds the feasibility product
// into `acq` and must pass no violation evaluators.  The draw sequence
// depends only on the spec and the stream state, never on evaluated values,
// so a fixed seed reproduces the returned point bit for bit.
Eigen::VectorXd optimize_acquisition(const BatchEvaluator& acq,
                                     const std::vector<BatchEvaluator>& violations,
                                     const Box& bounds, const AcquisitionSpec& spec,
                                     RngStream& rng);

}  // namespace dego
