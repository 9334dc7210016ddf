#pragma once

#include <stdexcept>
#include <vector>

#include "molstyle/nn/layers.hpp"

namespace molstyle::nn {

class FrozenModel : public std::logic_error {
 public:
  FrozenModel() : std::logic_error("parameter update on a frozen model") {}
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 0;  // 0 disables global-norm clipping
};

class Adam {
 public:
  Adam(ParamSet& params, AdamConfig config = {});

  // Applies accumulated gradients; throws FrozenModel after freeze().
  void step();
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }
  long steps() const { return t_; }
  AdamConfig& config() { return config_; }

 private:
  ParamSet* params_;
  AdamConfig config_;
  std::vector<Mat> m_, v_;
  long t_ = 0;
  bool frozen_ = false;
};

}  // namespace molstyle::nn
