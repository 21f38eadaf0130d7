#include "dego/ad.hpp"

#include <stdexcept>
#include <string>

#include "dego/kernel.hpp"

namespace dego::ad {

Eigen::Index Var::rows() const { return tape->val(id).rows(); }
Eigen::Index Var::cols() const { return tape->val(id).cols(); }
const Mat& Var::value() const { return tape->val(id); }

Var Tape::leaf(Mat value) { return {this, emit(std::move(value), true, nullptr)}; }

Var Tape::constant(Mat value) { return {this, emit(std::move(value), false, nullptr)}; }

Var Tape::constant_scalar(double value) {
  Mat m(1, 1);
  m(0, 0) = value;
  return constant(std::move(m));
}

int Tape::emit(Mat value, bool requires_grad, BackwardFn back) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.backward = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::accumulate(int id, const Mat& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(const Var& loss) {
  if (loss.tape != this) throw std::invalid_argument("backward: loss from another tape");
  const Mat& lv = nodes_[loss.id].value;
  if (lv.rows() != 1 || lv.cols() != 1)
    throw std::invalid_argument("backward: loss must be a 1 x 1 node");
  for (Node& n : nodes_) n.grad.resize(0, 0);
  nodes_[loss.id].grad = Mat::Ones(1, 1);
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this, i);
  }
}

Mat Tape::grad(const Var& v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::reset() { nodes_.clear(); }

namespace {

Tape& same_tape(const Var& a, const Var& b) {
  if (a.tape != b.tape) throw std::invalid_argument("ad op: operands on different tapes");
  return *a.tape;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

void check_scalar(const Var& s, const char* op) {
  if (s.rows() != 1 || s.cols() != 1)
    throw std::invalid_argument(std::string(op) + ": expected 1 x 1 operand");
}

bool rg(Tape& t, const Var& a) { return t.needs_grad(a.id); }

}  // namespace

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_same_shape(a, b, "add");
  const int id = t.emit(a.value() + b.value(), rg(t, a) || rg(t, b),
                        [pa = a.id, pb = b.id](Tape& tp, int self) {
                          tp.accumulate(pa, tp.adjoint(self));
                          tp.accumulate(pb, tp.adjoint(self));
                        });
  return {&t, id};
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_same_shape(a, b, "sub");
  const int id = t.emit(a.value() - b.value(), rg(t, a) || rg(t, b),
                        [pa = a.id, pb = b.id](Tape& tp, int self) {
                          tp.accumulate(pa, tp.adjoint(self));
                          tp.accumulate(pb, -tp.adjoint(self));
                        });
  return {&t, id};
}

Var neg(Var a) {
  Tape& t = *a.tape;
  const int id = t.emit(-a.value(), rg(t, a), [pa = a.id](Tape& tp, int self) {
    tp.accumulate(pa, -tp.adjoint(self));
  });
  return {&t, id};
}

Var scale(Var a, double c) {
  Tape& t = *a.tape;
  const int id = t.emit(c * a.value(), rg(t, a), [pa = a.id, c](Tape& tp, int self) {
    tp.accumulate(pa, c * tp.adjoint(self));
  });
  return {&t, id};
}

Var add_const(Var a, double c) {
  Tape& t = *a.tape;
  const int id = t.emit(a.value().array() + c, rg(t, a), [pa = a.id](Tape& tp, int self) {
    tp.accumulate(pa, tp.adjoint(self));
  });
  return {&t, id};
}

Var cmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_same_shape(a, b, "cmul");
  const int id = t.emit(a.value().cwiseProduct(b.value()), rg(t, a) || rg(t, b),
                        [pa = a.id, pb = b.id](Tape& tp, int self) {
                          const Mat& g = tp.adjoint(self);
                          tp.accumulate(pa, g.cwiseProduct(tp.val(pb)));
                          tp.accumulate(pb, g.cwiseProduct(tp.val(pa)));
                        });
  return {&t, id};
}

Var cdiv(Var a, Var b) {
  Tape& t = same_tape(a, b);
  check_same_shape(a, b, "cdiv");
  const int id = t.emit(a.value().cwiseQuotient(b.value()), rg(t, a) || rg(t, b),
                        [pa = a.id, pb = b.id](Tape& tp, int self) {
                          const Mat& g = tp.adjoint(self);
                          const Mat& bv = tp.val(pb);
                          tp.accumulate(pa, g.cwiseQuotient(bv));
                          tp.accumulate(pb, -g.cwiseProduct(tp.val(self))
                                                 .cwiseQuotient(bv));
                        });
  return {&t, id};
}

Var add_scalar(Var a, Var s) {
  Tape& t = same_tape(a, s);
  check_scalar(s, "add_scalar");
  const int id = t.emit(a.value().array() + s.value()(0, 0), rg(t, a) || rg(t, s),
                        [pa = a.id, ps = s.id](Tape& tp, int self) {
                          const Mat& g = tp.adjoint(self);
                          tp.accumulate(pa, g);
                          tp.accumulate(ps, Mat::Constant(1, 1, g.sum()));
                        });
  return {&t, id};
}

Var cmul_scalar(Var a, Var s) {
  Tape& t = same_tape(a, s);
  check_scalar(s, "cmul_scalar");
  const int id = t.emit(a.value() * s.value()(0, 0), rg(t, a) || rg(t, s),
                        [pa = a.id, ps = s.id](Tape& tp, int self) {
                          const Mat& g = tp.adjoint(self);
                          tp.accumulate(pa, g * tp.val(ps)(0, 0));
                          tp.accumulate(
                              ps, Mat::Constant(1, 1, g.cwiseProduct(tp.val(pa)).sum()));
                        });
  return {&t, id};
}

Var cdiv_scalar(Var a, Var s) {
  Tape& t = same_tape(a, s);
  check_scalar(s, "cdiv_scalar");
  const double sv = s.value()(0, 0);
  const int id = t.emit(a.value() / sv, rg(t, a) || rg(t, s),
                        [pa = a.id, ps = s.id](Tape& tp, int self) {
                          const Mat& g = tp.adjoint(self);
                          const double d = tp.val(ps)(0, 0);
                          tp.accumulate(pa, g / d);
                          tp.accumulate(ps,
                                        Mat::Constant(1, 1,
                                                      -g.cwiseProduct(tp.val(self)).sum() / d));
                        });
  return {&t, id};
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  const int id = t.emit(a.value() * b.value(), rg(t, a) || rg(t, b),
                        [pa = a.id, pb = b.id](Tape& tp, int self) {
                          const Mat& g = tp.adjoint(self);
                          if (tp.needs_grad(pa)) tp.accumulate(pa, g * tp.val(pb).transpose());
                          if (tp.needs_grad(pb)) tp.accumulate(pb, tp.val(pa).transpose() * g);
                        });
  return {&t, id};
}

Var transpose(Var a) {
  Tape& t = *a.tape;
  const int id = t.emit(a.value().transpose(), rg(t, a), [pa = a.id](Tape& tp, int self) {
    tp.accumulate(pa, tp.adjoint(self).transpose());
  });
  return {&t, id};
}

Var exp_elem(Var a) {
  Tape& t = *a.tape;
  const int id = t.emit(a.value().array().exp(), rg(t, a), [pa = a.id](Tape& tp, int self) {
    tp.accumulate(pa, tp.adjoint(self).cwiseProduct(tp.val(self)));
  });
  return {&t, id};
}

Var log_elem(Var a) {
  Tape& t = *a.tape;
  const int id = t.emit(a.value().array().log(), rg(t, a), [pa = a.id](Tape& tp, int self) {
    tp.accumulate(pa, tp.adjoint(self).cwiseQuotient(tp.val(pa)));
  });
  return {&t, id};
}

Var sqrt_elem(Var a) {
  Tape& t = *a.tape;
  const int id = t.emit(a.value().array().sqrt(), rg(t, a), [pa = a.id](Tape& tp, int self) {
    tp.accumulate(pa, (0.5 * tp.adjoint(self).array() / tp.val(self).array()).matrix());
  });
  return {&t, id};
}

Var square(Var a) {
  Tape& t = *a.tape;
  const int id = t.emit(a.value().array().square(), rg(t, a), [pa = a.id](Tape& tp, int self) {
    tp.accumulate(pa, 2.0 * tp.adjoint(self).cwiseProduct(tp.val(pa)));
  });
  return {&t, id};
}

Var clamp_min(Var a, double lo) {
  Tape& t = *a.tape;
  const int id = t.emit(a.value().cwiseMax(lo), rg(t, a), [pa = a.id, lo](Tape& tp, int self) {
    const Mat mask = (tp.val(pa).array() > lo).cast<double>();
    tp.accumulate(pa, tp.adjoint(self).cwiseProduct(mask));
  });
  return {&t, id};
}

Var sum(Var a) {
  Tape& t = *a.tape;
  const int id = t.emit(Mat::Constant(1, 1, a.value().sum()), rg(t, a),
                        [pa = a.id](Tape& tp, int self) {
                          const double g = tp.adjoint(self)(0, 0);
                          tp.accumulate(pa, Mat::Constant(tp.val(pa).rows(), tp.val(pa).cols(), g));
                        });
  return {&t, id};
}

Var rowsum(Var a) {
  Tape& t = *a.tape;
  const int id = t.emit(a.value().rowwise().sum(), rg(t, a), [pa = a.id](Tape& tp, int self) {
    tp.accumulate(pa, tp.adjoint(self) * Eigen::RowVectorXd::Ones(tp.val(pa).cols()));
  });
  return {&t, id};
}

Var colsum(Var a) {
  Tape& t = *a.tape;
  const int id = t.emit(a.value().colwise().sum(), rg(t, a), [pa = a.id](Tape& tp, int self) {
    tp.accumulate(pa, Eigen::VectorXd::Ones(tp.val(pa).rows()) * tp.adjoint(self));
  });
  return {&t, id};
}

Var diag_part(Var a) {
  Tape& t = *a.tape;
  if (a.rows() != a.cols()) throw std::invalid_argument("diag_part: matrix must be square");
  const int id = t.emit(a.value().diagonal(), rg(t, a), [pa = a.id](Tape& tp, int self) {
    Mat g = Mat::Zero(tp.val(pa).rows(), tp.val(pa).cols());
    g.diagonal() = tp.adjoint(self).col(0);
    tp.accumulate(pa, g);
  });
  return {&t, id};
}

Var col(Var a, Eigen::Index j) {
  Tape& t = *a.tape;
  if (j < 0 || j >= a.cols()) throw std::invalid_argument("col: index out of range");
  const int id = t.emit(a.value().col(j), rg(t, a), [pa = a.id, j](Tape& tp, int self) {
    Mat g = Mat::Zero(tp.val(pa).rows(), tp.val(pa).cols());
    g.col(j) = tp.adjoint(self).col(0);
    tp.accumulate(pa, g);
  });
  return {&t, id};
}

Var hstack(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("hstack: no parts");
  Tape& t = *parts.front().tape;
  Eigen::Index rows = parts.front().rows(), cols = 0;
  bool need = false;
  std::vector<int> ids;
  std::vector<Eigen::Index> widths;
  ids.reserve(parts.size());
  for (const Var& p : parts) {
    if (p.tape != &t) throw std::invalid_argument("hstack: operands on different tapes");
    if (p.rows() != rows) throw std::invalid_argument("hstack: row count mismatch");
    ids.push_back(p.id);
    widths.push_back(p.cols());
    cols += p.cols();
    need = need || t.needs_grad(p.id);
  }
  Mat v(rows, cols);
  Eigen::Index at = 0;
  for (size_t i = 0; i < ids.size(); ++i) {
    v.middleCols(at, widths[i]) = t.val(ids[i]);
    at += widths[i];
  }
  const int id = t.emit(std::move(v), need,
                        [ids, widths](Tape& tp, int self) {
                          const Mat& g = tp.adjoint(self);
                          Eigen::Index at = 0;
                          for (size_t i = 0; i < ids.size(); ++i) {
                            tp.accumulate(ids[i], g.middleCols(at, widths[i]));
                            at += widths[i];
                          }
                        });
  return {&t, id};
}

Var repeat_rows(Var a, int times) {
  Tape& t = *a.tape;
  if (times <= 0) throw std::invalid_argument("repeat_rows: times must be positive");
  const Eigen::Index r = a.rows(), c = a.cols();
  Mat v(r * times, c);
  for (int i = 0; i < times; ++i) v.middleRows(i * r, r) = a.value();
  const int id = t.emit(std::move(v), rg(t, a), [pa = a.id, times, r](Tape& tp, int self) {
    const Mat& g = tp.adjoint(self);
    Mat acc = g.middleRows(0, r);
    for (int i = 1; i < times; ++i) acc += g.middleRows(static_cast<Eigen::Index>(i) * r, r);
    tp.accumulate(pa, acc);
  });
  return {&t, id};
}

Var broadcast_col(Var v, Eigen::Index ncols) {
  Tape& t = *v.tape;
  if (v.cols() != 1) throw std::invalid_argument("broadcast_col: expected column vector");
  const int id = t.emit(v.value() * Eigen::RowVectorXd::Ones(ncols), rg(t, v),
                        [pv = v.id](Tape& tp, int self) {
                          tp.accumulate(pv, tp.adjoint(self).rowwise().sum());
                        });
  return {&t, id};
}

Var broadcast_row(Var v, Eigen::Index nrows) {
  Tape& t = *v.tape;
  if (v.rows() != 1) throw std::invalid_argument("broadcast_row: expected row vector");
  const int id = t.emit(Eigen::VectorXd::Ones(nrows) * v.value(), rg(t, v),
                        [pv = v.id](Tape& tp, int self) {
                          tp.accumulate(pv, tp.adjoint(self).colwise().sum());
                        });
  return {&t, id};
}

// ----- fused kernel ops ----------------------------------------------------

namespace {

// Accumulates the adjoints of K = v * exp(-0.5 * D) where
// D_ij = sum_k (a_ik - b_jk)^2 / l_k^2.  `sym` marks the Gram case where A
// and B are the same node, so the point adjoint combines both roles and the
// diagonal carries no lengthscale or point dependence.
void ard_rbf_backward(Tape& tp, int self, int pa, int pb, int pls, int plv, bool sym) {
  const Mat& g = tp.adjoint(self);
  const Mat& K = tp.val(self);
  Mat E = g.cwiseProduct(K);
  if (tp.needs_grad(plv)) tp.accumulate(plv, Mat::Constant(1, 1, E.sum()));
  const bool need_pts = tp.needs_grad(pa) || (!sym && tp.needs_grad(pb));
  const bool need_ls = tp.needs_grad(pls);
  if (!need_pts && !need_ls) return;

  if (sym) E.diagonal().setZero();
  const Mat& A = tp.val(pa);
  const Mat& B = tp.val(pb);
  const Eigen::VectorXd ls = tp.val(pls).col(0).array().exp();
  const Eigen::Index d = A.cols();
  Mat ga, gb;
  Eigen::VectorXd gls;
  if (need_pts) {
    ga = Mat::Zero(A.rows(), d);
    gb = Mat::Zero(B.rows(), d);
  }
  if (need_ls) gls = Eigen::VectorXd::Zero(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double inv_l2 = 1.0 / (ls[k] * ls[k]);
    // diff(i, j) = a_ik - b_jk
    Mat diff = A.col(k) * Eigen::RowVectorXd::Ones(B.rows());
    diff.rowwise() -= B.col(k).transpose();
    const Mat t = E.cwiseProduct(diff);
    if (need_pts) {
      ga.col(k) = -inv_l2 * t.rowwise().sum();
      gb.col(k) = inv_l2 * t.colwise().sum().transpose();
    }
    if (need_ls) gls[k] = inv_l2 * E.cwiseProduct(diff.cwiseProduct(diff)).sum();
  }
  if (need_pts) {
    if (sym) {
      tp.accumulate(pa, ga + gb);
    } else {
      tp.accumulate(pa, ga);
      tp.accumulate(pb, gb);
    }
  }
  if (need_ls) tp.accumulate(pls, gls);
}

}  // namespace

Var ard_rbf_cross(Var A, Var B, Var log_ls, Var log_var) {
  Tape& t = same_tape(A, B);
  same_tape(A, log_ls);
  same_tape(A, log_var);
  check_scalar(log_var, "ard_rbf_cross");
  if (log_ls.cols() != 1 || log_ls.rows() != A.cols())
    throw std::invalid_argument("ard_rbf_cross: log_ls must be d x 1");
  ArdParams p;
  p.log_lengthscale = log_ls.value().col(0);
  p.log_variance = log_var.value()(0, 0);
  const bool need = rg(t, A) || rg(t, B) || rg(t, log_ls) || rg(t, log_var);
  const int id = t.emit(dego::ard_rbf(A.value(), B.value(), p), need,
                        [pa = A.id, pb = B.id, pls = log_ls.id, plv = log_var.id](
                            Tape& tp, int self) {
                          ard_rbf_backward(tp, self, pa, pb, pls, plv, false);
                        });
  return {&t, id};
}

Var ard_rbf_gram(Var A, Var log_ls, Var log_var) {
  Tape& t = same_tape(A, log_ls);
  same_tape(A, log_var);
  check_scalar(log_var, "ard_rbf_gram");
  if (log_ls.cols() != 1 || log_ls.rows() != A.cols())
    throw std::invalid_argument("ard_rbf_gram: log_ls must be d x 1");
  ArdParams p;
  p.log_lengthscale = log_ls.value().col(0);
  p.log_variance = log_var.value()(0, 0);
  const bool need = rg(t, A) || rg(t, log_ls) || rg(t, log_var);
  const int id = t.emit(dego::ard_rbf_gram(A.value(), p), need,
                        [pa = A.id, pls = log_ls.id, plv = log_var.id](Tape& tp, int self) {
                          ard_rbf_backward(tp, self, pa, pa, pls, plv, true);
                        });
  return {&t, id};
}

Var ard_rbf_diag(Eigen::Index n, Var log_var) {
  Tape& t = *log_var.tape;
  check_scalar(log_var, "ard_rbf_diag");
  const double v = std::exp(log_var.value()(0, 0));
  const int id = t.emit(Mat::Constant(n, 1, v), rg(t, log_var),
                        [plv = log_var.id](Tape& tp, int self) {
                          tp.accumulate(plv,
                                        Mat::Constant(1, 1,
                                                      tp.adjoint(self)
                                                          .cwiseProduct(tp.val(self))
                                                          .sum()));
                        });
  return {&t, id};
}

// ----- triangular ops ------------------------------------------------------

Var chol_lower(Var A) {
  Tape& t = *A.tape;
  if (A.rows() != A.cols()) throw std::invalid_argument("chol_lower: matrix must be square");
  Mat L = chol_psd(A.value()).matrix_l();
  const int id = t.emit(std::move(L), rg(t, A), [pa = A.id](Tape& tp, int self) {
    const Mat& L = tp.val(self);
    // Reverse rule for A = L L': with P the lower triangle of L' Lbar and
    // its diagonal halved, Abar = sym(L^{-T} P L^{-1}).  Adjoints landing on
    // the structurally zero upper triangle of L are discarded.
    const Mat Lbar = tp.adjoint(self).triangularView<Eigen::Lower>();
    Mat P = L.transpose() * Lbar;
    P.triangularView<Eigen::StrictlyUpper>().setZero();
    P.diagonal() *= 0.5;
    const Mat X = L.triangularView<Eigen::Lower>().transpose().solve(P);
    const Mat Abar =
        L.triangularView<Eigen::Lower>().transpose().solve(X.transpose()).transpose();
    tp.accumulate(pa, 0.5 * (Abar + Abar.transpose()));
  });
  return {&t, id};
}

Var tri_solve_left(Var L, Var B) {
  Tape& t = same_tape(L, B);
  if (L.rows() != L.cols()) throw std::invalid_argument("tri_solve_left: L must be square");
  if (B.rows() != L.rows()) throw std::invalid_argument("tri_solve_left: row count mismatch");
  Mat V = L.value().triangularView<Eigen::Lower>().solve(B.value());
  const int id = t.emit(std::move(V), rg(t, L) || rg(t, B),
                        [pl = L.id, pb = B.id](Tape& tp, int self) {
                          const Mat& Lv = tp.val(pl);
                          // Bbar = L^{-T} Vbar and Lbar = -Bbar V', masked to
                          // the triangle the forward pass actually read.
                          const Mat gb = Lv.triangularView<Eigen::Lower>()
                                             .transpose()
                                             .solve(tp.adjoint(self));
                          if (tp.needs_grad(pb)) tp.accumulate(pb, gb);
                          if (tp.needs_grad(pl)) {
                            Mat gl = -gb * tp.val(self).transpose();
                            gl.triangularView<Eigen::StrictlyUpper>().setZero();
                            tp.accumulate(pl, gl);
                          }
                        });
  return {&t, id};
}

// ----- factored PSD ops ----------------------------------------------------

PsdContext::PsdContext(Tape& tape, Var A) : tape_(&tape), A_(A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("PsdContext: matrix must be square");
  factor_ = std::make_shared<PsdFactor>(chol_psd(A.value()));
}

Var PsdContext::solve(Var B) const {
  Tape& t = *tape_;
  if (B.rows() != A_.rows()) throw std::invalid_argument("PsdContext::solve: row mismatch");
  Mat X = factor_->solve(B.value());
  const bool need = t.needs_grad(A_.id) || t.needs_grad(B.id);
  const int id = t.emit(std::move(X), need,
                        [pa = A_.id, pb = B.id, fac = factor_](Tape& tp, int self) {
                          const Mat gb = fac->solve(tp.adjoint(self));
                          if (tp.needs_grad(pb)) tp.accumulate(pb, gb);
                          if (tp.needs_grad(pa))
                            tp.accumulate(pa, -gb * tp.val(self).transpose());
                        });
  return {&t, id};
}

Var PsdContext::logdet() const {
  Tape& t = *tape_;
  const int id = t.emit(Mat::Constant(1, 1, factor_->log_det()), t.needs_grad(A_.id),
                        [pa = A_.id, fac = factor_](Tape& tp, int self) {
                          const Eigen::Index m = fac->rows();
                          const Mat inv = fac->solve(Mat::Identity(m, m));
                          tp.accumulate(pa, tp.adjoint(self)(0, 0) * inv);
                        });
  return {&t, id};
}

}  // namespace dego::ad
