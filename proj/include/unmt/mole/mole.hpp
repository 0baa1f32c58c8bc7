#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "unmt/tensor/adam.hpp"
#include "unmt/tensor/tensor.hpp"

namespace unmt {

// tanh(h W1 + b1) W2 + b2, mapping d_enc -> d_exp -> d_enc.
struct ExpertNetwork {
  std::string language;
  Tensor w1, b1, w2, b2;

  Tensor forward(const Tensor& h) const;
};

// One affine layer d_enc -> K producing gate logits.
struct GateNetwork {
  Tensor w, b;

  Tensor logits(const Tensor& h) const;
};

class MoleLayer {
 public:
  MoleLayer() = default;
  // One expert per language, in the given order.
  MoleLayer(std::vector<std::string> languages, std::size_t d_enc, std::size_t d_exp, std::mt19937_64& rng,
            double init_range = 0.08, double gate_loss_weight = 1.0);
  MoleLayer(std::vector<ExpertNetwork> experts, GateNetwork gate, double gate_loss_weight);

  std::size_t num_experts() const { return experts_.size(); }
  std::size_t input_dim() const { return gate_.w.rows(); }
  std::size_t hidden_dim() const { return experts_.front().w1.cols(); }
  const std::vector<ExpertNetwork>& experts() const { return experts_; }
  const GateNetwork& gate() const { return gate_; }
  double gate_loss_weight() const { return gate_loss_weight_; }
  void set_gate_loss_weight(double w) { gate_loss_weight_ = w; }
  std::vector<std::string> languages() const;
  std::optional<std::size_t> expert_index(const std::string& language) const;

  // Named "<prefix>expert.<language>.w1" ... and "<prefix>gate.w"/"gate.b".
  ParameterSet parameters(const std::string& prefix = "mole.") const;

 private:
  std::vector<ExpertNetwork> experts_;
  GateNetwork gate_;
  double gate_loss_weight_ = 1.0;
};

struct MoleOutput {
  Tensor hidden;       // N x d_enc, replaces the encoder states
  Tensor gate_logits;  // N x K
  Tensor gate_probs;   // N x K, rows sum to 1
};

/// h'_t = sum_k f_k(h_t) softmax(g(h_t))_k for every row of h.
MoleOutput mole_forward(const MoleLayer& layer, const Tensor& h);

/// Mean over positions of -log softmax(gate_logits)[t][k]. position_weights
/// (1 for real tokens, 0 for padding) restrict the mean; empty = all rows.
Tensor gate_loss(const Tensor& gate_logits, std::size_t k, std::span<const double> position_weights = {});

struct FreezeDecision {
  std::vector<unsigned char> update_mask;  // one entry per parameter of the set
  bool add_gate_loss = false;
  std::optional<std::size_t> expert;       // gate target for auxiliary batches
};

/// Low-resource batches: every MoLE parameter of `params` is masked out of
/// the update and no gate loss is added (gradients still flow through the
/// layer to the encoder). Auxiliary batches update everything and add the
/// gate loss when the language has an expert.
FreezeDecision apply_freeze_rule(const MoleLayer& layer, const ParameterSet& params,
                                 const std::string& batch_language, const std::set<std::string>& low_resource);

}  // namespace unmt
