#include "unmt/mole/mole.hpp"

#include <algorithm>

#include "unmt/error.hpp"
#include "unmt/tensor/ops.hpp"

namespace unmt {

namespace {

Tensor uniform(Shape shape, std::mt19937_64& rng, double range) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::uniform_real_distribution<double> dist(-range, range);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

}  // namespace

Tensor ExpertNetwork::forward(const Tensor& h) const {
  auto hidden = ops::tanh(ops::add_bias(ops::matmul(h, w1), b1));
  return ops::add_bias(ops::matmul(hidden, w2), b2);
}

Tensor GateNetwork::logits(const Tensor& h) const { return ops::add_bias(ops::matmul(h, w), b); }

MoleLayer::MoleLayer(std::vector<std::string> languages, std::size_t d_enc, std::size_t d_exp,
                     std::mt19937_64& rng, double init_range, double gate_loss_weight)
    : gate_loss_weight_(gate_loss_weight) {
  if (languages.empty()) throw ConfigError("MoLE needs at least one expert");
  // Experts start as copies of one draw, so every language initially sees
  // the same encoder space; they diverge through their own batches.
  const ExpertNetwork first{languages.front(), uniform({d_enc, d_exp}, rng, init_range),
                            uniform({d_exp}, rng, init_range), uniform({d_exp, d_enc}, rng, init_range),
                            uniform({d_enc}, rng, init_range)};
  for (auto& lang : languages) {
    experts_.push_back({lang, first.w1.clone(), first.b1.clone(), first.w2.clone(), first.b2.clone()});
    for (Tensor* t : {&experts_.back().w1, &experts_.back().b1, &experts_.back().w2, &experts_.back().b2})
      t->set_requires_grad(true);
  }
  gate_ = {uniform({d_enc, languages.size()}, rng, init_range), uniform({languages.size()}, rng, init_range)};
}

MoleLayer::MoleLayer(std::vector<ExpertNetwork> experts, GateNetwork gate, double gate_loss_weight)
    : experts_(std::move(experts)), gate_(std::move(gate)), gate_loss_weight_(gate_loss_weight) {
  if (experts_.empty()) throw ConfigError("MoLE needs at least one expert");
  const std::size_t d = gate_.w.rows();
  if (gate_.w.cols() != experts_.size() || gate_.b.numel() != experts_.size()) {
    throw ConfigError("MoLE gate width " + std::to_string(gate_.w.cols()) + " != " +
                      std::to_string(experts_.size()) + " experts");
  }
  for (const auto& e : experts_) {
    if (e.w1.rows() != d || e.w2.cols() != d || e.b2.numel() != d || e.w2.rows() != e.w1.cols() ||
        e.b1.numel() != e.w1.cols()) {
      throw ConfigError("MoLE expert '" + e.language + "' does not map " + std::to_string(d) + " -> " +
                        std::to_string(d));
    }
  }
}

std::vector<std::string> MoleLayer::languages() const {
  std::vector<std::string> out;
  for (const auto& e : experts_) out.push_back(e.language);
  return out;
}

std::optional<std::size_t> MoleLayer::expert_index(const std::string& language) const {
  for (std::size_t k = 0; k < experts_.size(); ++k)
    if (experts_[k].language == language) return k;
  return std::nullopt;
}

ParameterSet MoleLayer::parameters(const std::string& prefix) const {
  ParameterSet out;
  for (const auto& e : experts_) {
    const std::string p = prefix + "expert." + e.language + ".";
    out.push_back({p + "w1", e.w1});
    out.push_back({p + "b1", e.b1});
    out.push_back({p + "w2", e.w2});
    out.push_back({p + "b2", e.b2});
  }
  out.push_back({prefix + "gate.w", gate_.w});
  out.push_back({prefix + "gate.b", gate_.b});
  return out;
}

MoleOutput mole_forward(const MoleLayer& layer, const Tensor& h) {
  if (h.cols() != layer.input_dim()) {
    throw ConfigError("MoLE expects width " + std::to_string(layer.input_dim()) + ", got " +
                      std::to_string(h.cols()));
  }
  std::vector<Tensor> outs;
  outs.reserve(layer.num_experts());
  for (const auto& e : layer.experts()) outs.push_back(e.forward(h));
  MoleOutput out;
  out.gate_logits = layer.gate().logits(h);
  out.gate_probs = ops::softmax_rows(out.gate_logits);
  out.hidden = ops::mix_experts(out.gate_probs, outs);
  return out;
}

Tensor gate_loss(const Tensor& gate_logits, std::size_t k, std::span<const double> position_weights) {
  const std::size_t n = gate_logits.rows();
  if (k >= gate_logits.cols()) {
    throw ParameterError("gate_loss: expert " + std::to_string(k) + " out of range for " +
                         std::to_string(gate_logits.cols()) + " experts");
  }
  if (!position_weights.empty() && position_weights.size() != n) {
    throw DimensionError("gate_loss: " + std::to_string(position_weights.size()) + " weights for " +
                         std::to_string(n) + " positions");
  }
  std::vector<double> w(n, 1.0);
  if (!position_weights.empty()) w.assign(position_weights.begin(), position_weights.end());
  double count = 0.0;
  for (double x : w) count += x != 0.0 ? 1.0 : 0.0;
  if (count == 0.0) throw InputError("gate_loss: no unpadded positions");
  for (double& x : w) x = x != 0.0 ? 1.0 / count : 0.0;
  std::vector<std::size_t> targets(n, k);
  return ops::cross_entropy(gate_logits, targets, w);
}

FreezeDecision apply_freeze_rule(const MoleLayer& layer, const ParameterSet& params,
                                 const std::string& batch_language, const std::set<std::string>& low_resource) {
  FreezeDecision d;
  d.update_mask.assign(params.size(), 1);
  if (low_resource.contains(batch_language)) {
    const auto mole = layer.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (const auto& m : mole) {
        if (params[i].tensor.same_storage(m.tensor)) d.update_mask[i] = 0;
      }
    }
    return d;
  }
  d.expert = layer.expert_index(batch_language);
  d.add_gate_loss = d.expert.has_value();
  return d;
}

}  // namespace unmt
