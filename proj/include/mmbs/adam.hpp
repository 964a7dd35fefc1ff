#pragma once

#include <cstddef>

#include "mmbs/model.hpp"

namespace mmbs {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   theta <- theta - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
class Adam {
 public:
  Adam(const ModelParams& like, AdamConfig cfg);

  void step(ModelParams& params, const ModelParams& grad);
  std::size_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  ModelParams m_, v_;
  std::size_t t_ = 0;
};

}  // namespace mmbs
