#include "dego/lhs.hpp"

#include <numeric>
#include <stdexcept>
#include <vector>

namespace dego {

Eigen::MatrixXd lhs_sample(int n, const Box& bounds, RngStream& rng) {
  if (n <= 0) throw std::invalid_argument("lhs_sample: n must be positive");
  const int d = bounds.dim();
  Eigen::MatrixXd pts(n, d);
  std::vector<int> perm(n);
  for (int k = 0; k < d; ++k) {
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(i) + 1));
      std::swap(perm[i], perm[j]);
    }
    const double lo = bounds.lower[k];
    const double w = bounds.upper[k] - bounds.lower[k];
    for (int i = 0; i < n; ++i) {
      const double cell = (static_cast<double>(perm[i]) + rng.uniform()) / n;
      pts(i, k) = lo + w * cell;
    }
  }
  return pts;
}

}  // namespace dego
