#include "dego/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dego/normal.hpp"

namespace dego {

double expected_improvement(double mean, double std, double y_min) {
  const double gap = y_min - mean;
  if (std <= 0.0) return std::max(0.0, gap);
  const double z = gap / std;
  return std::max(0.0, gap * norm_cdf(z) + std * norm_pdf(z));
}

double probability_of_improvement(double mean, double std, double y_min) {
  if (std <= 0.0) return mean < y_min ? 1.0 : 0.0;
  return norm_cdf((y_min - mean) / std);
}

double ei_sampling(const Eigen::VectorXd& samples, double y_min) {
  if (samples.size() == 0) throw std::invalid_argument("ei_sampling: no samples");
  return (y_min - samples.array()).max(0.0).mean();
}

double expected_violation(double mean, double std) {
  if (std <= 0.0) return std::max(0.0, mean);
  const double z = mean / std;
  return std::max(0.0, mean * norm_cdf(z) + std * norm_pdf(z));
}

double probability_of_feasibility(double mean, double std) {
  if (std <= 0.0) return mean <= 0.0 ? 1.0 : 0.0;
  return norm_cdf(-mean / std);
}

void validate(const AcquisitionSpec& spec) {
  if (spec.de.population < 4)
    throw std::invalid_argument("AcquisitionSpec: population must be >= 4");
  if (spec.de.generations < 1)
    throw std::invalid_argument("AcquisitionSpec: generations must be >= 1");
  if (!(spec.de.weight > 0.0))
    throw std::invalid_argument("AcquisitionSpec: differential weight must be positive");
  if (!(spec.de.crossover >= 0.0 && spec.de.crossover <= 1.0))
    throw std::invalid_argument("AcquisitionSpec: crossover rate must lie in [0, 1]");
  for (double t : spec.ev_thresholds)
    if (!(t >= 0.0)) throw std::invalid_argument("AcquisitionSpec: thresholds must be >= 0");
  if (spec.refine.iterations < 0)
    throw std::invalid_argument("AcquisitionSpec: refine iterations must be >= 0");
  if (!(spec.refine.initial_step > 0.0))
    throw std::invalid_argument("AcquisitionSpec: refine step must be positive");
}

namespace {

// Feasibility-first ordering for maximization: any excess violation loses to
// none, less excess beats more, and the criterion value decides only between
// equally violated candidates.
bool ranks_better(double value_a, double excess_a, double value_b, double excess_b) {
  if (excess_a != excess_b) return excess_a < excess_b;
  return value_a > value_b;
}

// Criterion values and total excess violation for every row of X.
struct Scored {
  Eigen::VectorXd value;
  Eigen::VectorXd excess;
};

Scored score_batch(const BatchEvaluator& acq, const std::vector<BatchEvaluator>& violations,
                   const std::vector<double>& thresholds, const Eigen::MatrixXd& X) {
  Scored s;
  s.value = acq(X);
  if (s.value.size() != X.rows())
    throw std::invalid_argument("optimize_acquisition: criterion returned wrong batch size");
  s.excess = Eigen::VectorXd::Zero(X.rows());
  for (std::size_t i = 0; i < violations.size(); ++i) {
    const Eigen::VectorXd v = violations[i](X);
    if (v.size() != X.rows())
      throw std::invalid_argument("optimize_acquisition: constraint returned wrong batch size");
    s.excess += (v.array() - thresholds[i]).max(0.0).matrix();
  }
  return s;
}

}  // namespace

Eigen::VectorXd optimize_acquisition(const BatchEvaluator& acq,
                                     const std::vector<BatchEvaluator>& violations,
                                     const Box& bounds, const AcquisitionSpec& spec,
                                     RngStream& rng) {
  validate(spec);
  if (spec.constraint_mode == ConstraintMode::kFeasibilityProduct && !violations.empty())
    throw std::invalid_argument(
        "optimize_acquisition: feasibility-product mode folds constraints into "
        "the criterion; pass no violation evaluators");
  std::vector<double> thresholds = spec.ev_thresholds;
  if (thresholds.empty()) thresholds.assign(violations.size(), 0.0);
  if (thresholds.size() != violations.size())
    throw std::invalid_argument("optimize_acquisition: one threshold per constraint required");

  const int d = bounds.dim();
  const int P = spec.de.population;
  const Eigen::VectorXd& lo = bounds.lower;
  const Eigen::VectorXd& hi = bounds.upper;

  Eigen::MatrixXd pop(P, d);
  for (int i = 0; i < P; ++i)
    for (int j = 0; j < d; ++j) pop(i, j) = rng.uniform(lo[j], hi[j]);
  Scored cur = score_batch(acq, violations, thresholds, pop);

  int ib = 0;
  for (int i = 1; i < P; ++i)
    if (ranks_better(cur.value[i], cur.excess[i], cur.value[ib], cur.excess[ib])) ib = i;
  Eigen::VectorXd best_x = pop.row(ib);
  double best_value = cur.value[ib];
  double best_excess = cur.excess[ib];

  Eigen::MatrixXd trial(P, d);
  for (int g = 0; g < spec.de.generations; ++g) {
    // The whole trial generation is drawn before any evaluation, so the
    // random sequence is independent of the criterion's values.
    for (int i = 0; i < P; ++i) {
      int r1, r2, r3;
      do r1 = static_cast<int>(rng.uniform_index(P)); while (r1 == i);
      do r2 = static_cast<int>(rng.uniform_index(P)); while (r2 == i || r2 == r1);
      do r3 = static_cast<int>(rng.uniform_index(P)); while (r3 == i || r3 == r1 || r3 == r2);
      const int jrand = static_cast<int>(rng.uniform_index(d));
      for (int j = 0; j < d; ++j) {
        const bool cross = rng.uniform() < spec.de.crossover || j == jrand;
        if (cross) {
          const double m = pop(r1, j) + spec.de.weight * (pop(r2, j) - pop(r3, j));
          trial(i, j) = std::clamp(m, lo[j], hi[j]);
        } else {
          trial(i, j) = pop(i, j);
        }
      }
    }
    const Scored cand = score_batch(acq, violations, thresholds, trial);
    for (int i = 0; i < P; ++i) {
      // Ties replace the parent (keeps the population moving on plateaus)
      // but never displace the incumbent.
      if (!ranks_better(cur.value[i], cur.excess[i], cand.value[i], cand.excess[i])) {
        pop.row(i) = trial.row(i);
        cur.value[i] = cand.value[i];
        cur.excess[i] = cand.excess[i];
        if (ranks_better(cur.value[i], cur.excess[i], best_value, best_excess)) {
          best_x = pop.row(i);
          best_value = cur.value[i];
          best_excess = cur.excess[i];
        }
      }
    }
  }

  const Eigen::VectorXd width = bounds.width();
  double step = spec.refine.initial_step;
  Eigen::MatrixXd poll(2 * d, d);
  for (int it = 0; it < spec.refine.iterations && step > 1e-13; ++it) {
    for (int j = 0; j < d; ++j) {
      poll.row(2 * j) = best_x;
      poll(2 * j, j) = std::clamp(best_x[j] + step * width[j], lo[j], hi[j]);
      poll.row(2 * j + 1) = best_x;
      poll(2 * j + 1, j) = std::clamp(best_x[j] - step * width[j], lo[j], hi[j]);
    }
    const Scored cand = score_batch(acq, violations, thresholds, poll);
    int k = 0;
    for (int i = 1; i < 2 * d; ++i)
      if (ranks_better(cand.value[i], cand.excess[i], cand.value[k], cand.excess[k])) k = i;
    if (ranks_better(cand.value[k], cand.excess[k], best_value, best_excess)) {
      best_x = poll.row(k);
      best_value = cand.value[k];
      best_excess = cand.excess[k];
    } else {
      step *= 0.5;
    }
  }
  return best_x;
}

}  // namespace dego
