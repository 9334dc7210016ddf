#include "molstyle/styleflow.hpp"

#include <cmath>
#include <numbers>

namespace molstyle::flow {

using nn::Index;

StylePrior batch_prior(const Mat& latents) {
  const Index K = latents.rows();
  if (K < 2) throw TooFewInstances(K);
  StylePrior p;
  p.k = K;
  p.mu0 = latents.colwise().mean();
  p.var0 = ((latents.rowwise() - p.mu0).array().square().colwise().sum() / static_cast<double>(K - 1)).matrix();
  p.var0 = p.var0.cwiseMax(kVarianceFloor);
  return p;
}

Mat gaussian_log_density(const Mat& z, const StylePrior& prior) {
  const double log2pi = std::log(2 * std::numbers::pi);
  const Eigen::ArrayXXd diff = z.rowwise() - prior.mu0;
  const Eigen::ArrayXXd scaled = diff.rowwise() / prior.var0.array();
  const double log_det = prior.var0.array().log().sum();
  Mat out(z.rows(), 1);
  out.col(0) = -0.5 * ((diff * scaled).rowwise().sum() + log_det + log2pi * static_cast<double>(z.cols()));
  return out;
}

Var MaskedStep::forward(const Var& z, const Var& context) const {
  const Var w1m = nn::mul(w1, Var::constant(mask1));
  const Var w2m = nn::mul(w2, Var::constant(mask2));
  const Var bias = nn::add(b1, nn::matmul(context, v1));
  const Var h = nn::tanh(nn::add_row(nn::matmul(z, w1m), bias));
  return nn::add_row(nn::matmul(h, w2m), b2);
}

StyleFlow::StyleFlow(nn::ParamSet& params, const std::string& name, const FlowConfig& config, nn::Rng& rng)
    : config_(config) {
  const Index d = config.dim, H = config.hidden, C = config.context_dim;
  if (d < 1 || H < 1 || C < 1 || config.steps < 1) throw std::invalid_argument("bad flow config");
  conditioner_ = nn::Mlp(params, name + ".conditioner", {d, C, C}, rng);
  for (int t = 0; t < config.steps; ++t) {
    const std::string p = name + ".step" + std::to_string(t);
    MaskedStep s;
    // Input column i has degree i + 1; hidden unit k gets degree
    // 1 + (k mod max(d - 1, 1)); output column j (for both e and phi) has
    // degree j + 1 and reads hidden units of strictly smaller degree.
    std::vector<int> hidden_deg(H);
    for (Index k = 0; k < H; ++k) hidden_deg[k] = 1 + static_cast<int>(k % std::max<Index>(d - 1, 1));
    s.mask1 = Mat::Zero(d, H);
    for (Index i = 0; i < d; ++i)
      for (Index k = 0; k < H; ++k) s.mask1(i, k) = hidden_deg[k] >= i + 1 ? 1.0 : 0.0;
    s.mask2 = Mat::Zero(H, 2 * d);
    for (Index k = 0; k < H; ++k)
      for (Index j = 0; j < d; ++j) {
        const double on = j + 1 > hidden_deg[k] ? 1.0 : 0.0;
        s.mask2(k, j) = on;
        s.mask2(k, d + j) = on;
      }
    s.w1 = params.add(p + ".w1", nn::xavier(d, H, rng));
    s.v1 = params.add(p + ".v1", nn::xavier(C, H, rng));
    s.b1 = params.add(p + ".b1", Mat::Zero(1, H));
    s.w2 = params.add(p + ".w2", nn::xavier(H, 2 * d, rng) * 0.1);
    Mat b2 = Mat::Zero(1, 2 * d);
    b2.rightCols(d).setConstant(config.gate_bias);
    s.b2 = params.add(p + ".b2", b2);
    steps_.push_back(std::move(s));
  }
}

Var StyleFlow::condition(const StylePrior& prior) const {
  if (prior.mu0.size() != config_.dim) throw std::invalid_argument("condition: prior width mismatch");
  return conditioner_(Var::constant(prior.mu0));
}

StepOutput StyleFlow::step(int t, const Var& z, const Var& context) const {
  const Index d = config_.dim;
  if (z.cols() != d) throw std::invalid_argument("flow step: latent width mismatch");
  const Var out = steps_.at(t).forward(z, context);
  const Var e = nn::slice_cols(out, 0, d);
  const Var phi = nn::slice_cols(out, d, d);
  StepOutput s;
  s.gate = nn::sigmoid(phi);
  // z' = s z + (1 - s) e = e + s (z - e)
  s.z = nn::add(e, nn::mul(s.gate, nn::sub(z, e)));
  // log sigmoid(phi) = -softplus(-phi)
  s.logdet = nn::neg(nn::sum_cols(nn::softplus(nn::neg(phi))));
  return s;
}

StyleCode StyleFlow::transform(const StylePrior& prior, const Mat& z0) const {
  const Var c = condition(prior);
  StyleCode code;
  code.z0 = z0;
  Var z = Var::constant(z0);
  Var logdet = Var::constant(Mat::Zero(z0.rows(), 1));
  for (int t = 0; t < steps(); ++t) {
    const StepOutput s = step(t, z, c);
    z = s.z;
    logdet = nn::add(logdet, s.logdet);
    code.gates.push_back(s.gate.value());
  }
  code.h_s = z;
  code.log_density = nn::sub(Var::constant(gaussian_log_density(z0, prior)), logdet);
  return code;
}

StyleCode StyleFlow::sample(const StylePrior& prior, int batch, nn::Rng& rng) const {
  Mat z0 = nn::standard_normal(batch, config_.dim, rng);
  z0 = (z0.array().rowwise() * prior.var0.array().sqrt()).matrix();
  z0.rowwise() += prior.mu0;
  return transform(prior, z0);
}

Mat StyleFlow::invert_step(int t, const Mat& z_next, const Var& context) const {
  nn::NoGradGuard guard;
  const Index d = config_.dim;
  Mat z = Mat::Zero(z_next.rows(), d);
  for (Index i = 0; i < d; ++i) {
    // Column i of (e, phi) depends only on z columns < i, already recovered.
    const Mat out = steps_.at(t).forward(Var::constant(z), context).value();
    const Eigen::ArrayXd e = out.col(i).array();
    const Eigen::ArrayXd gate = 1.0 / (1.0 + (-out.col(d + i).array()).exp());
    z.col(i) = ((z_next.col(i).array() - (1 - gate) * e) / gate).matrix();
  }
  return z;
}

Mat StyleFlow::invert(const Mat& h_s, const Var& context) const {
  Mat z = h_s;
  for (int t = steps() - 1; t >= 0; --t) z = invert_step(t, z, context);
  return z;
}

}  // namespace molstyle::flow
