#include "dego/linalg.hpp"

#include <Eigen/Cholesky>

namespace dego {

PsdFactor try_chol(const Eigen::MatrixXd& A, double jitter, bool& ok) {
  Eigen::MatrixXd work = A;
  if (jitter != 0.0) work.diagonal().array() += jitter;
  Eigen::LLT<Eigen::MatrixXd> llt(work);
  if (llt.info() != Eigen::Success) {
    ok = false;
    return {};
  }
  Eigen::MatrixXd L = llt.matrixL();
  if (!L.allFinite() || (L.diagonal().array() <= 0.0).any()) {
    ok = false;
    return {};
  }
  ok = true;
  return PsdFactor(std::move(L), jitter);
}

PsdFactor chol_psd(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("chol_psd: matrix must be square");
  if (!A.allFinite()) throw std::invalid_argument("chol_psd: matrix has non-finite entries");

  bool ok = false;
  PsdFactor f = try_chol(A, 0.0, ok);
  if (ok) return f;

  const double scale = A.diagonal().mean();
  if (!(scale > 0.0)) {
    throw NotPositiveDefiniteError("chol_psd: non-positive diagonal, cannot jitter");
  }
  for (double level = 1e-8; level <= 1e-2 * (1.0 + 1e-12); level *= 10.0) {
    f = try_chol(A, level * scale, ok);
    if (ok) return f;
  }
  throw NotPositiveDefiniteError("chol_psd: factorization failed at the jitter cap");
}

}  // namespace dego
