#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dmin/tensor.hpp"

namespace dmin {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. Moment buffers are matched to parameters by
// position, so every step must pass the same parameter list.
class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  void step(std::span<Tensor* const> params, std::span<const Tensor> grads);
  std::size_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t t_ = 0;
};

}  // namespace dmin
