#pragma once

// Style latent space: a diagonal Gaussian prior estimated from K style
// instances, a conditioner on its mean, and a chain of gated inverse
// autoregressive steps z' = s * z + (1 - s) * e.

#include <random>
#include <stdexcept>
#include <vector>

#include "molstyle/nn/layers.hpp"

namespace molstyle::flow {

using nn::Mat;
using nn::Var;

class TooFewInstances : public std::invalid_argument {
 public:
  explicit TooFewInstances(long k)
      : std::invalid_argument("style prior needs at least 2 instances, got " + std::to_string(k)) {}
};

inline constexpr double kVarianceFloor = 1e-4;

struct StylePrior {
  Eigen::RowVectorXd mu0;
  Eigen::RowVectorXd var0;  // per-dimension, floored at kVarianceFloor
  long k = 0;
};

// Sample mean and unbiased (K - 1) variance of the rows of `latents` (K x d).
StylePrior batch_prior(const Mat& latents);

struct FlowConfig {
  int dim = 128;
  int steps = 6;
  int hidden = 256;       // per masked network
  int context_dim = 64;   // conditioner output width
  double gate_bias = 2.0; // initial gate pre-activation, sigmoid(2) ~ 0.88
};

struct StepOutput {
  Var z;       // batch x d
  Var logdet;  // batch x 1, sum of log gates
  Var gate;    // batch x d
};

struct StyleCode {
  Var h_s;          // batch x d, the last flow state
  Var log_density;  // batch x 1
  Mat z0;           // initial draw
  std::vector<Mat> gates;  // per step, batch x d
};

// Masked autoregressive network producing (e, phi): output column j reads
// only input columns < j; the context feeds every hidden unit.
struct MaskedStep {
  Var w1, v1, b1;    // d x H, context x H, 1 x H
  Var w2, b2;        // H x 2d, 1 x 2d
  Mat mask1, mask2;  // same shapes as w1, w2

  // Returns [e | phi], batch x 2d.
  Var forward(const Var& z, const Var& context) const;
};

class StyleFlow {
 public:
  StyleFlow() = default;
  StyleFlow(nn::ParamSet& params, const std::string& name, const FlowConfig& config, nn::Rng& rng);

  const FlowConfig& config() const { return config_; }
  int steps() const { return static_cast<int>(steps_.size()); }
  const MaskedStep& step_network(int t) const { return steps_[t]; }
  MaskedStep& step_network(int t) { return steps_[t]; }
  const nn::Mlp& conditioner() const { return conditioner_; }

  // c = MLP(mu0), 1 x context_dim.
  Var condition(const StylePrior& prior) const;
  StepOutput step(int t, const Var& z, const Var& context) const;
  // Draws `batch` initial points from the prior and runs the chain.
  StyleCode sample(const StylePrior& prior, int batch, nn::Rng& rng) const;
  // Runs the chain from given initial points.
  StyleCode transform(const StylePrior& prior, const Mat& z0) const;

  // Inverts one step dimension by dimension.
  Mat invert_step(int t, const Mat& z_next, const Var& context) const;
  Mat invert(const Mat& h_s, const Var& context) const;

 private:
  FlowConfig config_;
  nn::Mlp conditioner_;
  std::vector<MaskedStep> steps_;
};

// Diagonal Gaussian log-density of each row of z.
Mat gaussian_log_density(const Mat& z, const StylePrior& prior);

}  // namespace molstyle::flow
