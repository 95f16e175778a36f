#include "meher/diffcore/adam.hpp"

#include <cmath>

#include "meher/errors.hpp"

namespace meher::diff {

AdamState AdamState::for_parameters(std::span<const Tensor* const> params, AdamConfig config) {
  AdamState state;
  state.config = config;
  for (const Tensor* p : params) {
    state.first_moment.emplace_back(p->shape(), 0.0);
    state.second_moment.emplace_back(p->shape(), 0.0);
  }
  return state;
}

void adam_step(AdamState& state, std::span<Tensor* const> params, std::span<const Tensor> grads) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw UsageError("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(grads[i]) || !params[i]->same_shape(state.first_moment[i])) {
      throw UsageError("adam_step: shape mismatch at parameter " + std::to_string(i) + ": " +
                       params[i]->shape_string() + " vs gradient " + grads[i].shape_string());
    }
  }

  const auto& cfg = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bias1;
      const double v_hat = v[j] / bias2;
      p[j] -= cfg.step_size * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

double clip_global_norm(std::span<Tensor> grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor& g : grads)
    for (double x : g.data()) sq += x * x;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / (norm + 1e-6);
    for (Tensor& g : grads)
      for (double& x : g.data()) x *= factor;
  }
  return norm;
}

}  // namespace meher::diff
