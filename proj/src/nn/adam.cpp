#include "nidsdl/nn/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "nidsdl/error.hpp"

namespace nidsdl::nn {

AdamState AdamState::for_params(std::span<const Tensor> params, double lr) {
  AdamState s;
  s.lr = lr;
  for (const auto& p : params) {
    s.m.emplace_back(p.shape());
    s.v.emplace_back(p.shape());
  }
  return s;
}

AdamState AdamState::for_params(std::span<const Tensor* const> params, double lr) {
  AdamState s;
  s.lr = lr;
  for (const auto* p : params) {
    s.m.emplace_back(p->shape());
    s.v.emplace_back(p->shape());
  }
  return s;
}

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state) {
  std::vector<Tensor*> p;
  std::vector<const Tensor*> g;
  for (auto& t : params) p.push_back(&t);
  for (const auto& t : grads) g.push_back(&t);
  adam_step(std::span<Tensor* const>(p), std::span<const Tensor* const>(g), state);
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, AdamState& state) {
  if (!(state.lr > 0.0) || state.beta1 < 0.0 || state.beta1 >= 1.0 || state.beta2 < 0.0 ||
      state.beta2 >= 1.0) {
    throw std::invalid_argument("adam_step: invalid hyperparameters");
  }
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ShapeError("adam_step: parameter, gradient and moment counts differ");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    require_shape(*grads[k], params[k]->shape(), "adam_step gradient");
    require_shape(state.m[k], params[k]->shape(), "adam_step first moment");
    require_shape(state.v[k], params[k]->shape(), "adam_step second moment");
  }

  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto theta = params[k]->data();
    auto g = grads[k]->data();
    auto m = state.m[k].data();
    auto v = state.v[k].data();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      theta[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace nidsdl::nn
