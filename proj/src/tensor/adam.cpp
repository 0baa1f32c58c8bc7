#include "unmt/tensor/adam.hpp"

#include <cmath>

#include "unmt/error.hpp"

namespace unmt {

AdamState::AdamState(const ParameterSet& params, AdamConfig config) : config_(config) {
  for (const auto& p : params) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void adam_step(ParameterSet& params, AdamState& state, std::span<const unsigned char> update_mask) {
  if (state.m_.size() != params.size()) {
    throw StateError("adam_step: optimizer state tracks " + std::to_string(state.m_.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  if (!update_mask.empty() && update_mask.size() != params.size()) {
    throw StateError("adam_step: update mask size mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!update_mask.empty() && !update_mask[i]) continue;
    const auto& t = params[i].tensor;
    if (!t.requires_grad() || t.grad().size() != t.numel()) {
      throw StateError("adam_step: parameter '" + params[i].name + "' has no gradient");
    }
    if (state.m_[i].size() != t.numel()) {
      throw StateError("adam_step: moment buffer shape mismatch for '" + params[i].name + "'");
    }
  }

  ++state.step_;
  const auto& c = state.config_;
  const double t = static_cast<double>(state.step_);
  const double correct1 = 1.0 - std::pow(c.beta1, t);
  const double correct2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!update_mask.empty() && !update_mask[i]) continue;
    auto& tensor = params[i].tensor;
    auto value = tensor.data_mut();
    auto grad = tensor.grad();
    auto& m = state.m_[i];
    auto& v = state.v_[i];
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double g = grad[k];
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g;
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g * g;
      const double mhat = m[k] / correct1;
      const double vhat = v[k] / correct2;
      value[k] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
    }
  }
}

double gradient_norm(const ParameterSet& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (double g : p.tensor.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

void clip_gradients(ParameterSet& params, double max_norm) {
  const double norm = gradient_norm(params);
  if (max_norm <= 0.0 || norm <= max_norm) return;
  const double factor = max_norm / norm;
  for (auto& p : params) {
    for (double& g : p.tensor.grad_mut()) g *= factor;
  }
}

void zero_gradients(ParameterSet& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

}  // namespace unmt
