#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace dego {

// Thrown when a matrix cannot be factored as PSD even at the jitter cap.
class NotPositiveDefiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Cholesky factor of A + jitter * I together with the jitter that was
// actually applied.  All downstream solves and log-determinants reuse the
// factor; A itself is not stored.
class PsdFactor {
 public:
  PsdFactor() = default;
  PsdFactor(Eigen::MatrixXd L, double jitter) : L_(std::move(L)), jitter_(jitter) {}

  Eigen::Index rows() const { return L_.rows(); }
  double jitter() const { return jitter_; }
  const Eigen::MatrixXd& matrix_l() const { return L_; }

  // Solves (A + jitter I) X = B.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& B) const {
    Eigen::MatrixXd X = L_.triangularView<Eigen::Lower>().solve(B);
    L_.triangularView<Eigen::Lower>().transpose().solveInPlace(X);
    return X;
  }

  // Solves L Y = B (forward substitution only).
  Eigen::MatrixXd solve_lower(const Eigen::MatrixXd& B) const {
    return L_.triangularView<Eigen::Lower>().solve(B);
  }

  double log_det() const {
    return 2.0 * L_.diagonal().array().log().sum();
  }

 private:
  Eigen::MatrixXd L_;
  double jitter_ = 0.0;
};

// Cholesky factorization with a jitter ladder.
//
// Attempts the factorization of A as given first, then with a diagonal boost
// of 1e-8 * mean(diag A) escalated tenfold per retry up to 1e-2 * mean(diag A).
// Throws NotPositiveDefiniteError when every rung fails and
// std::invalid_argument when A is not square or contains non-finite values.
PsdFactor chol_psd(const Eigen::MatrixXd& A);

// Single factorization attempt without the ladder; `ok` reports success.
PsdFactor try_chol(const Eigen::MatrixXd& A, double jitter, bool& ok);

}  // namespace dego
