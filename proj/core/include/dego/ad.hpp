#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

#include "dego/linalg.hpp"

namespace dego::ad {

using Mat = Eigen::MatrixXd;

class Tape;

// Handle to a node on a tape.  Cheap to copy; the tape owns all storage.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  Eigen::Index rows() const;
  Eigen::Index cols() const;
  const Mat& value() const;
};

// Wengert-list reverse-mode differentiation over dense matrices.
//
// Values are computed eagerly as the expression graph is built; backward()
// walks the list in reverse and accumulates adjoints into every node that
// (transitively) depends on a leaf.  The graph is rebuilt per evaluation,
// which keeps control flow (sampling, per-layer loops) ordinary C++.
class Tape {
 public:
  // Var handles store the tape's address, so a tape must stay where it was
  // built.
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable input.  Gradient is available after backward().
  Var leaf(Mat value);

  // Non-differentiable input.
  Var constant(Mat value);
  Var constant_scalar(double value);

  // Runs reverse accumulation from `loss`, which must be 1 x 1.
  void backward(const Var& loss);

  // Gradient of the last backward() target with respect to `v`.  Returns a
  // zero matrix of the node's shape when no adjoint reached it.
  Mat grad(const Var& v) const;

  // Drops all nodes but keeps allocated capacity for the next graph.
  void reset();

  int size() const { return static_cast<int>(nodes_.size()); }

  // --- interface for op builders -------------------------------------
  // The backward callback receives the tape and the emitted node's own id,
  // reads the node's adjoint, and accumulates into its parents.
  using BackwardFn = std::function<void(Tape&, int self)>;
  int emit(Mat value, bool requires_grad, BackwardFn back);
  const Mat& val(int id) const { return nodes_[id].value; }
  bool needs_grad(int id) const { return nodes_[id].requires_grad; }
  const Mat& adjoint(int id) const { return nodes_[id].grad; }
  void accumulate(int id, const Mat& g);

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// ----- elementwise and structural ops -------------------------------------

Var add(Var a, Var b);              // same shape
Var sub(Var a, Var b);              // same shape
Var neg(Var a);
Var scale(Var a, double c);         // c * a
Var add_const(Var a, double c);     // a + c elementwise
Var cmul(Var a, Var b);             // elementwise product, same shape
Var cdiv(Var a, Var b);             // elementwise quotient, same shape
Var add_scalar(Var a, Var s);       // s is 1 x 1, broadcast add
Var cmul_scalar(Var a, Var s);      // s is 1 x 1
Var cdiv_scalar(Var a, Var s);      // s is 1 x 1
Var matmul(Var a, Var b);
Var transpose(Var a);
Var exp_elem(Var a);
Var log_elem(Var a);                // values must be positive
Var sqrt_elem(Var a);               // values must be positive
Var square(Var a);
Var clamp_min(Var a, double lo);    // gradient is zero on clamped entries
Var sum(Var a);                     // 1 x 1
Var rowsum(Var a);                  // n x 1
Var colsum(Var a);                  // 1 x m
Var diag_part(Var a);               // square input, returns n x 1
Var col(Var a, Eigen::Index j);     // j-th column as n x 1
Var hstack(const std::vector<Var>& parts);        // concatenate columns
Var repeat_rows(Var a, int times);                // stack `times` copies
Var broadcast_col(Var v, Eigen::Index ncols);     // n x 1 -> n x ncols
Var broadcast_row(Var v, Eigen::Index nrows);     // 1 x m -> nrows x m

// ----- fused kernel ops ----------------------------------------------------

// Cross-covariance of the anisotropic squared-exponential kernel.
// A is n x d, B is p x d, log_ls is d x 1, log_var is 1 x 1.
Var ard_rbf_cross(Var A, Var B, Var log_ls, Var log_var);

// Gram variant with an exactly symmetric value and the diagonal pinned to
// the signal variance.
Var ard_rbf_gram(Var A, Var log_ls, Var log_var);

// Diagonal of the Gram matrix for n points: a constant column of the signal
// variance (n x 1).
Var ard_rbf_diag(Eigen::Index n, Var log_var);

// ----- triangular ops ------------------------------------------------------

// Lower Cholesky factor of a symmetric PSD matrix, via the jitter ladder.
// The jitter is treated as constant in the backward pass, and the adjoint of
// A comes out symmetrized, which is the right convention when A is produced
// by an exactly symmetric op such as ard_rbf_gram.
Var chol_lower(Var A);

// L^{-1} B by forward substitution.  Only the lower triangle of L is read,
// so the adjoint of L is zero above the diagonal.
Var tri_solve_left(Var L, Var B);

// ----- factored PSD ops ----------------------------------------------------

// Shares one Cholesky factorization between solves and the log-determinant
// of the same matrix.  The factorization applies the jitter ladder; the
// jitter is treated as constant in the backward pass.
class PsdContext {
 public:
  PsdContext(Tape& tape, Var A);

  Var solve(Var B) const;   // (A + jitter I)^{-1} B
  Var logdet() const;       // log det (A + jitter I), 1 x 1
  double jitter() const { return factor_->jitter(); }

 private:
  Tape* tape_;
  Var A_;
  std::shared_ptr<PsdFactor> factor_;
};

}  // namespace dego::ad
