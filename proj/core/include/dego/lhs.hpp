#pragma once

#include <Eigen/Dense>

#include "dego/box.hpp"
#include "dego/rng.hpp"

namespace dego {

// Latin hypercube sample of n points inside `bounds`.
//
// Each dimension is split into n equal strata; every stratum receives exactly
// one point, placed uniformly at random within the stratum, and the strata
// are matched across dimensions through independent random permutations.
// Returns an n x d matrix, one point per row.  Deterministic given the
// stream state.
Eigen::MatrixXd lhs_sample(int n, const Box& bounds, RngStream& rng);

}  // namespace dego
