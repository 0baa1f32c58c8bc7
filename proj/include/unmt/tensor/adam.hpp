#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "unmt/tensor/tensor.hpp"

namespace unmt {

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

using ParameterSet = std::vector<NamedParameter>;

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment buffers for an ordered parameter set.
class AdamState {
 public:
  AdamState() = default;
  AdamState(const ParameterSet& params, AdamConfig config);

  const AdamConfig& config() const { return config_; }
  AdamConfig& config() { return config_; }
  std::uint64_t step() const { return step_; }

  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  friend void adam_step(ParameterSet&, AdamState&, std::span<const unsigned char>);
  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

/// One bias-corrected Adam update. update_mask (one entry per parameter,
/// empty = all) excludes parameters from this step entirely: neither their
/// values nor their moments change. Throws StateError if a parameter to be
/// updated has no gradient buffer.
void adam_step(ParameterSet& params, AdamState& state, std::span<const unsigned char> update_mask = {});

// Global L2 norm of all gradients.
double gradient_norm(const ParameterSet& params);
// Rescales all gradients so that their global norm is at most max_norm.
void clip_gradients(ParameterSet& params, double max_norm);
void zero_gradients(ParameterSet& params);

}  // namespace unmt
