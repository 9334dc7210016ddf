#include "molstyle/nn/optim.hpp"

#include <cmath>

namespace molstyle::nn {

Adam::Adam(ParamSet& params, AdamConfig config) : params_(&params), config_(config) {
  for (const auto& v : params.vars()) {
    m_.push_back(Mat::Zero(v.rows(), v.cols()));
    v_.push_back(Mat::Zero(v.rows(), v.cols()));
  }
}

void Adam::step() {
  if (frozen_) throw FrozenModel();
  ++t_;
  double scale = 1.0;
  if (config_.clip_norm > 0) {
    const double norm = params_->grad_norm();
    if (norm > config_.clip_norm) scale = config_.clip_norm / norm;
  }
  const double c1 = 1 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1 - std::pow(config_.beta2, static_cast<double>(t_));
  const auto& vars = params_->vars();
  for (std::size_t i = 0; i < vars.size(); ++i) {
    Var p = vars[i];
    if (p.grad().size() == 0) continue;
    const Mat g = p.grad() * scale;
    m_[i] = config_.beta1 * m_[i] + (1 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1 - config_.beta2) * g.cwiseProduct(g);
    p.mutable_value().array() -=
        config_.learning_rate * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.epsilon);
  }
}

}  // namespace molstyle::nn
