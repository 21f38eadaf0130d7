#include "dego/dgp.hpp"

#include <json.hpp>
#include <numeric>
#include <stdexcept>

#include "dego/box.hpp"
#include "dego/lhs.hpp"
#include "dego/normal.hpp"

namespace dego {

namespace {

constexpr double kVarFloor = 1e-12;

// Inducing inputs for one layer: a random subset of the rows of P, padded
// with a Latin hypercube over the per-column data range when more slots than
// points are available.
Eigen::MatrixXd init_inducing(const Eigen::MatrixXd& P, int m, RngStream& rng) {
  const int n = static_cast<int>(P.rows());
  const int d = static_cast<int>(P.cols());
  if (m <= n) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(i) + 1));
      std::swap(idx[i], idx[j]);
    }
    Eigen::MatrixXd Z(m, d);
    for (int i = 0; i < m; ++i) Z.row(i) = P.row(idx[i]);
    return Z;
  }
  Eigen::MatrixXd Z(m, d);
  Z.topRows(n) = P;
  Eigen::VectorXd lo = P.colwise().minCoeff();
  Eigen::VectorXd hi = P.colwise().maxCoeff();
  for (int k = 0; k < d; ++k) {
    if (!(hi[k] - lo[k] > 1e-9)) {
      lo[k] -= 0.5;
      hi[k] += 0.5;
    }
  }
  Z.bottomRows(m - n) = lhs_sample(m - n, Box(lo, hi), rng);
  return Z;
}

}  // namespace

DgpModel init_dgp(const Eigen::MatrixXd& X_raw, const Eigen::VectorXd& y_raw,
                  const DgpArchitecture& arch, double noise_var_init, RngStream& rng) {
  if (X_raw.rows() != y_raw.size()) throw std::invalid_argument("init_dgp: X/y size mismatch");
  if (X_raw.cols() != arch.input_dim) throw std::invalid_argument("init_dgp: input_dim mismatch");
  if (arch.num_inducing < 1) throw std::invalid_argument("init_dgp: need at least one inducing point");
  if (!(noise_var_init > 0.0)) throw std::invalid_argument("init_dgp: noise must be positive");

  DgpModel model;
  model.x_std = Standardizer::fit(X_raw);
  model.y_std = Standardizer::fit(y_raw);
  model.X = model.x_std.apply(X_raw);
  model.y = model.y_std.apply(y_raw).col(0);
  model.log_noise = std::log(noise_var_init);

  std::vector<int> widths;
  widths.push_back(arch.input_dim);
  for (int w : arch.hidden_widths) widths.push_back(w);
  widths.push_back(1);

  Eigen::MatrixXd P = model.X;  // layer inputs under the identity mean maps
  for (size_t l = 0; l + 1 < widths.size(); ++l) {
    const int d_in = widths[l];
    const int d_out = widths[l + 1];
    const bool final_layer = (l + 2 == widths.size());
    const Eigen::MatrixXd W = final_layer ? SvgpLayer::zero_mean(d_in, d_out)
                                          : SvgpLayer::identity_mean(d_in, d_out);
    model.layers.push_back(
        SvgpLayer::at_prior(init_inducing(P, arch.num_inducing, rng),
                            ArdParams::unit(d_in), W));
    if (!final_layer) P = (P * SvgpLayer::identity_mean(d_in, d_out)).eval();
  }
  return model;
}

std::vector<Eigen::MatrixXd> draw_propagation_noise(const DgpModel& model, int n_samples,
                                                    RngStream& rng) {
  std::vector<Eigen::MatrixXd> eps;
  const int L = model.depth();
  if (L < 2) return eps;
  if (n_samples < 1) throw std::invalid_argument("draw_propagation_noise: need n_samples >= 1");
  const Eigen::Index rows = static_cast<Eigen::Index>(n_samples) * model.n();
  for (int l = 0; l + 1 < L; ++l) {
    Eigen::MatrixXd e(rows, model.layers[l].d_out());
    for (Eigen::Index i = 0; i < e.rows(); ++i)
      for (Eigen::Index j = 0; j < e.cols(); ++j) e(i, j) = rng.normal();
    eps.push_back(std::move(e));
  }
  return eps;
}

namespace {

// Appends one layer's marginal moments and KL to the graph.
struct LayerGraphOut {
  ad::Var mean;  // r x d_out
  ad::Var var;   // r x d_out, clamped at kVarFloor
  ad::Var kl;    // 1 x 1
};

LayerGraphOut layer_graph(ad::Tape& t, const SvgpLayer& layer, DgpLayerVars& lv, ad::Var H,
                          VariationalForm form) {
  const int d_out = layer.d_out();
  const int m = layer.m();

  lv.Z = t.leaf(layer.Z);
  lv.log_lengthscale = t.leaf(layer.kernel.log_lengthscale);
  lv.log_variance = t.leaf(Eigen::MatrixXd::Constant(1, 1, layer.kernel.log_variance));
  lv.M = t.leaf(layer.M);

  std::vector<ad::Var> S_vars;
  if (form == VariationalForm::kMeanCov) {
    for (int c = 0; c < d_out; ++c) {
      lv.S.push_back(t.leaf(layer.S[c]));
      S_vars.push_back(lv.S.back());
    }
  } else {
    for (int c = 0; c < d_out; ++c) {
      const Eigen::MatrixXd Lf = chol_psd(layer.S[c]).matrix_l();
      lv.factor.push_back(t.leaf(Lf));
      S_vars.push_back(ad::matmul(lv.factor.back(), ad::transpose(lv.factor.back())));
      lv.S.push_back(S_vars.back());
    }
  }

  // The kernel enters the bound only through its Cholesky factor:
  // V = L^{-1} k(Z, H) carries both the mean projection and the variance
  // deflation, and the whitened KL needs no kernel term at all.
  const ad::Var Kzz = ad::ard_rbf_gram(lv.Z, lv.log_lengthscale, lv.log_variance);
  const ad::Var Lk = ad::chol_lower(Kzz);
  const ad::Var Kzh = ad::ard_rbf_cross(lv.Z, H, lv.log_lengthscale, lv.log_variance);
  const ad::Var V = ad::tri_solve_left(Lk, Kzh);  // m x r

  ad::Var mean = ad::matmul(ad::transpose(V), lv.M);
  if (!layer.mean_W.isZero(0.0)) {
    mean = ad::add(ad::matmul(H, t.constant(layer.mean_W)), mean);
  }

  const ad::Var q1 = ad::colsum(ad::cmul(V, V));                          // 1 x r
  const ad::Var base = ad::sub(ad::ard_rbf_diag(H.rows(), lv.log_variance),
                               ad::transpose(q1));                        // r x 1

  std::vector<ad::Var> var_cols;
  ad::Var kl = t.constant_scalar(0.0);
  for (int c = 0; c < d_out; ++c) {
    const ad::Var Sc = S_vars[c];
    const ad::Var q2 = ad::colsum(ad::cmul(V, ad::matmul(Sc, V)));        // 1 x r
    var_cols.push_back(ad::clamp_min(ad::add(base, ad::transpose(q2)), kVarFloor));

    const ad::Var Mc = ad::col(lv.M, c);
    const ad::Var tr = ad::sum(ad::diag_part(Sc));
    const ad::Var quad = ad::sum(ad::square(Mc));
    const ad::PsdContext sctx(t, Sc);
    ad::Var kl_c = ad::sub(ad::add(tr, quad), sctx.logdet());
    kl_c = ad::scale(ad::add_const(kl_c, -static_cast<double>(m)), 0.5);
    kl = ad::add(kl, kl_c);
  }

  LayerGraphOut out;
  out.mean = mean;
  out.var = d_out == 1 ? var_cols[0] : ad::hstack(var_cols);
  out.kl = kl;
  return out;
}

}  // namespace

void build_elbo_graph(const DgpModel& model, const std::vector<Eigen::MatrixXd>& eps,
                      VariationalForm form, DgpGraph& g) {
  const int L = model.depth();
  const int n = model.n();
  if (L >= 2 && static_cast<int>(eps.size()) != L - 1)
    throw std::invalid_argument("build_elbo_graph: need one noise block per hidden transition");
  if (L >= 2 && eps[0].rows() % n != 0)
    throw std::invalid_argument("build_elbo_graph: noise rows must be a multiple of n");
  const int n_samples = L >= 2 ? static_cast<int>(eps[0].rows() / n) : 1;

  g.tape.reset();
  g.layers.assign(L, {});
  g.log_noise = g.tape.leaf(Eigen::MatrixXd::Constant(1, 1, model.log_noise));

  ad::Var H = g.tape.constant(model.X);
  ad::Var kl_total = g.tape.constant_scalar(0.0);
  ad::Var final_mean, final_var;
  for (int l = 0; l < L; ++l) {
    LayerGraphOut out = layer_graph(g.tape, model.layers[l], g.layers[l], H, form);
    kl_total = ad::add(kl_total, out.kl);
    if (l + 1 == L) {
      final_mean = out.mean;
      final_var = out.var;
      break;
    }
    ad::Var mu = out.mean;
    ad::Var va = out.var;
    if (l == 0 && n_samples > 1) {
      mu = ad::repeat_rows(mu, n_samples);
      va = ad::repeat_rows(va, n_samples);
    }
    if (static_cast<Eigen::Index>(eps[l].rows()) != mu.rows() ||
        static_cast<Eigen::Index>(eps[l].cols()) != mu.cols())
      throw std::invalid_argument("build_elbo_graph: noise block shape mismatch");
    H = ad::add(mu, ad::cmul(ad::sqrt_elem(va), g.tape.constant(eps[l])));
  }

  // Closed-form Gaussian expectation on the last layer:
  //   E[log N(y | h, s2)] = -0.5 log(2 pi s2) - ((y - mu)^2 + v) / (2 s2)
  const Eigen::Index rows = final_mean.rows();
  Eigen::MatrixXd y_rep(rows, 1);
  for (Eigen::Index i = 0; i < rows; ++i) y_rep(i, 0) = model.y[i % n];
  const ad::Var sigma2 = ad::exp_elem(g.log_noise);
  const ad::Var resid = ad::sub(g.tape.constant(y_rep), final_mean);
  const ad::Var scaled = ad::cdiv_scalar(ad::add(ad::square(resid), final_var), sigma2);
  ad::Var inner = ad::add(ad::scale(ad::log_elem(sigma2), static_cast<double>(rows)),
                          ad::sum(scaled));
  inner = ad::add_const(inner, static_cast<double>(rows) * kLogTwoPi);
  const double div = (L >= 2) ? static_cast<double>(n_samples) : 1.0;
  const ad::Var lik = ad::scale(inner, -0.5 / div);

  g.elbo = ad::sub(lik, kl_total);
}

double elbo_value(const DgpModel& model, int n_samples, RngStream& rng) {
  const std::vector<Eigen::MatrixXd> eps = draw_propagation_noise(model, n_samples, rng);
  DgpGraph g;
  build_elbo_graph(model, eps, VariationalForm::kMeanCov, g);
  return g.elbo.value()(0, 0);
}

// ----- prediction ------------------------------------------------------------

DgpPredictor::DgpPredictor(const DgpModel& model) : model_(&model) {
  kzz_.reserve(model.layers.size());
  for (const SvgpLayer& l : model.layers) kzz_.push_back(chol_psd(ard_rbf_gram(l.Z, l.kernel)));
}

void DgpPredictor::propagate_once(const Eigen::MatrixXd& Xs, RngStream& rng,
                                  Eigen::VectorXd& mu, Eigen::VectorXd& var) const {
  const int L = model_->depth();
  Eigen::MatrixXd H = Xs;
  for (int l = 0; l + 1 < L; ++l) {
    const ConditionalMoments cm = sparse_conditional(model_->layers[l], H, &kzz_[l]);
    Eigen::MatrixXd next = cm.mean;
    for (Eigen::Index i = 0; i < next.rows(); ++i)
      for (Eigen::Index j = 0; j < next.cols(); ++j)
        next(i, j) += std::sqrt(std::max(cm.var(i, j), 0.0)) * rng.normal();
    H = std::move(next);
  }
  const ConditionalMoments cm = sparse_conditional(model_->layers[L - 1], H, &kzz_[L - 1]);
  mu = cm.mean.col(0);
  var = cm.var.col(0);
}

DgpPredictor::Moments DgpPredictor::predict(const Eigen::MatrixXd& X_raw, int n_samples,
                                            RngStream& rng, bool include_noise) const {
  if (n_samples < 1) throw std::invalid_argument("DgpPredictor::predict: n_samples >= 1");
  const Eigen::MatrixXd Xs = model_->x_std.apply(X_raw);
  const Eigen::Index r = Xs.rows();
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(r), s2 = Eigen::VectorXd::Zero(r);
  Eigen::VectorXd mu, var;
  for (int s = 0; s < n_samples; ++s) {
    propagate_once(Xs, rng, mu, var);
    s1 += mu;
    s2 += var + mu.cwiseProduct(mu);
  }
  const Eigen::VectorXd mean_std = s1 / n_samples;
  Eigen::VectorXd var_std =
      (s2 / n_samples - mean_std.cwiseProduct(mean_std)).cwiseMax(0.0);
  if (include_noise) var_std.array() += model_->noise_var();

  Moments out;
  const double sc = model_->y_std.scale[0];
  out.mean = (mean_std.array() * sc + model_->y_std.mean[0]).matrix();
  out.var = var_std * sc * sc;
  return out;
}

Eigen::MatrixXd DgpPredictor::sample(const Eigen::MatrixXd& X_raw, int k,
                                     RngStream& rng) const {
  const Eigen::MatrixXd Xs = model_->x_std.apply(X_raw);
  Eigen::MatrixXd draws(Xs.rows(), k);
  Eigen::VectorXd mu, var;
  const double sc = model_->y_std.scale[0];
  for (int j = 0; j < k; ++j) {
    propagate_once(Xs, rng, mu, var);
    for (Eigen::Index i = 0; i < draws.rows(); ++i) {
      const double z = mu[i] + std::sqrt(std::max(var[i], 0.0)) * rng.normal();
      draws(i, j) = z * sc + model_->y_std.mean[0];
    }
  }
  return draws;
}

// ----- serialization ---------------------------------------------------------

namespace {

using nlohmann::json;

json mat_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd mat_from_json(const json& j) {
  const Eigen::Index r = static_cast<Eigen::Index>(j.size());
  if (r == 0) return {};
  const Eigen::Index c = static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index k = 0; k < c; ++k) m(i, k) = j.at(i).at(k).get<double>();
  return m;
}

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vec_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
  return v;
}

}  // namespace

std::string save_dgp(const DgpModel& model) {
  json j;
  // Format 2: M and S hold the whitened variational parameters.
  j["format"] = 2;
  j["log_noise"] = model.log_noise;
  j["x_std"] = {{"mean", vec_to_json(model.x_std.mean)}, {"scale", vec_to_json(model.x_std.scale)}};
  j["y_std"] = {{"mean", vec_to_json(model.y_std.mean)}, {"scale", vec_to_json(model.y_std.scale)}};
  j["X"] = mat_to_json(model.X);
  j["y"] = vec_to_json(model.y);
  json layers = json::array();
  for (const SvgpLayer& l : model.layers) {
    json jl;
    jl["Z"] = mat_to_json(l.Z);
    jl["log_lengthscale"] = vec_to_json(l.kernel.log_lengthscale);
    jl["log_variance"] = l.kernel.log_variance;
    jl["mean_W"] = mat_to_json(l.mean_W);
    jl["M"] = mat_to_json(l.M);
    json S = json::array();
    for (const Eigen::MatrixXd& s : l.S) S.push_back(mat_to_json(s));
    jl["S"] = std::move(S);
    layers.push_back(std::move(jl));
  }
  j["layers"] = std::move(layers);
  return j.dump();
}

DgpModel load_dgp(const std::string& text) {
  const json j = json::parse(text);
  if (j.at("format").get<int>() != 2)
    throw std::invalid_argument("load_dgp: unsupported format version");
  DgpModel model;
  model.log_noise = j.at("log_noise").get<double>();
  model.x_std.mean = vec_from_json(j.at("x_std").at("mean"));
  model.x_std.scale = vec_from_json(j.at("x_std").at("scale"));
  model.y_std.mean = vec_from_json(j.at("y_std").at("mean"));
  model.y_std.scale = vec_from_json(j.at("y_std").at("scale"));
  model.X = mat_from_json(j.at("X"));
  model.y = vec_from_json(j.at("y"));
  for (const json& jl : j.at("layers")) {
    SvgpLayer l;
    l.Z = mat_from_json(jl.at("Z"));
    l.kernel.log_lengthscale = vec_from_json(jl.at("log_lengthscale"));
    l.kernel.log_variance = jl.at("log_variance").get<double>();
    l.mean_W = mat_from_json(jl.at("mean_W"));
    l.M = mat_from_json(jl.at("M"));
    for (const json& js : jl.at("S")) l.S.push_back(mat_from_json(js));
    model.layers.push_back(std::move(l));
  }
  return model;
}

}  // namespace dego
