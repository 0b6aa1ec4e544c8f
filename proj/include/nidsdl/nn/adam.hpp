#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nidsdl/nn/tensor.hpp"

namespace nidsdl::nn {

struct AdamState {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t t = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  // Zeroed moments shaped like `params`.
  static AdamState for_params(std::span<const Tensor> params, double lr = 0.01);
  static AdamState for_params(std::span<const Tensor* const> params, double lr = 0.01);
};

// One bias-corrected Adam update: t is incremented first, then
// theta -= lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state);
void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, AdamState& state);

}  // namespace nidsdl::nn
