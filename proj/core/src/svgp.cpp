#include "dego/svgp.hpp"

#include <stdexcept>

namespace dego {

SvgpLayer SvgpLayer::at_prior(Eigen::MatrixXd Z, ArdParams kernel, Eigen::MatrixXd mean_W) {
  if (Z.cols() != mean_W.rows()) throw std::invalid_argument("SvgpLayer: mean map rows != d_in");
  if (Z.cols() != kernel.dim()) throw std::invalid_argument("SvgpLayer: kernel dim != d_in");
  SvgpLayer l;
  l.Z = std::move(Z);
  l.kernel = std::move(kernel);
  l.mean_W = std::move(mean_W);
  const int d_out = l.d_out();
  l.M = Eigen::MatrixXd::Zero(l.m(), d_out);
  l.S.assign(d_out, Eigen::MatrixXd::Identity(l.m(), l.m()));
  return l;
}

ConditionalMoments sparse_conditional(const SvgpLayer& layer, const Eigen::MatrixXd& H,
                                      const PsdFactor* kzz) {
  if (H.cols() != layer.d_in())
    throw std::invalid_argument("sparse_conditional: input dimension mismatch");
  PsdFactor local;
  if (!kzz) {
    local = chol_psd(ard_rbf_gram(layer.Z, layer.kernel));
    kzz = &local;
  }
  const Eigen::Index r = H.rows();
  const int d_out = layer.d_out();
  const Eigen::MatrixXd Kzh = ard_rbf(layer.Z, H, layer.kernel);  // m x r
  const Eigen::MatrixXd V = kzz->solve_lower(Kzh);                // L^{-1} k(Z,H), m x r

  ConditionalMoments out;
  out.mean = H * layer.mean_W + V.transpose() * layer.M;

  const Eigen::ArrayXd base = layer.kernel.variance() -
                              (V.cwiseProduct(V)).colwise().sum().transpose().array();
  out.var.resize(r, d_out);
  for (int c = 0; c < d_out; ++c) {
    const Eigen::ArrayXd corr =
        (V.cwiseProduct(layer.S[c] * V)).colwise().sum().transpose().array();
    out.var.col(c) = (base + corr).max(0.0).matrix();
  }
  return out;
}

double kl_to_prior(const SvgpLayer& layer) {
  const int m = layer.m();
  double total = 0.0;
  for (int c = 0; c < layer.d_out(); ++c) {
    const double quad = layer.M.col(c).squaredNorm();
    const double logdet_s = chol_psd(layer.S[c]).log_det();
    total += 0.5 * (layer.S[c].trace() + quad - m - logdet_s);
  }
  return total;
}

GaussianNatural natural_from_moments(const GaussianMoments& g) {
  const PsdFactor f = chol_psd(g.cov);
  const Eigen::Index m = g.mean.size();
  GaussianNatural out;
  out.theta1 = f.solve(g.mean);
  out.theta2 = -0.5 * f.solve(Eigen::MatrixXd::Identity(m, m));
  out.theta2 = 0.5 * (out.theta2 + out.theta2.transpose()).eval();
  return out;
}

GaussianMoments moments_from_natural(const GaussianNatural& g) {
  // cov = (-2 theta2)^{-1}; the factorization doubles as the negative
  // definiteness check for theta2.
  Eigen::MatrixXd P = -2.0 * g.theta2;
  P = 0.5 * (P + P.transpose()).eval();
  bool ok = false;
  const PsdFactor f = try_chol(P, 0.0, ok);
  if (!ok) throw NotPositiveDefiniteError("moments_from_natural: theta2 not negative definite");
  const Eigen::Index m = g.theta1.size();
  GaussianMoments out;
  out.cov = f.solve(Eigen::MatrixXd::Identity(m, m));
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  out.mean = out.cov * g.theta1;
  return out;
}

GaussianExpectation expectation_from_moments(const GaussianMoments& g) {
  GaussianExpectation out;
  out.eta1 = g.mean;
  out.eta2 = g.cov + g.mean * g.mean.transpose();
  return out;
}

GaussianMoments moments_from_expectation(const GaussianExpectation& g) {
  GaussianMoments out;
  out.mean = g.eta1;
  out.cov = g.eta2 - g.eta1 * g.eta1.transpose();
  return out;
}

}  // namespace dego
