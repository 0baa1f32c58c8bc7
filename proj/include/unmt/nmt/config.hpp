#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "unmt/corpus/batching.hpp"
#include "unmt/ulr/ulr.hpp"

namespace unmt {

enum class AttentionKind { additive, bilinear };

struct ModelConfig {
  std::size_t embed_dim = 64;
  std::size_t hidden_dim = 64;
  std::size_t attention_dim = 64;
  AttentionKind attention = AttentionKind::additive;
  double dropout = 0.4;
  double init_range = 0.08;
  bool use_mole = false;
  std::size_t expert_hidden_dim = 0;  // 0 = encoder output width
  double gate_loss_weight = 1.0;
  bool train_transform = true;        // false keeps A at the identity
  UlrConfig ulr;
  std::uint64_t seed = 1;
  std::string bpe_model;              // path of the BPE codes used for the data, if any

  void validate() const;
};

struct TrainingConfig {
  std::size_t batch_size = 32;
  std::size_t max_steps = 2000;
  double learning_rate = 1e-3;
  double clip_norm = 5.0;
  LanguageSchedule schedule = LanguageSchedule::uniform;
  std::set<std::string> low_resource;
  std::uint64_t seed = 1;
  std::size_t eval_interval = 0;  // 0 = no intermediate evaluation
  std::size_t max_length = kDefaultMaxLength;

  void validate() const;
};

using KeyValues = std::map<std::string, std::string>;

// Value parsers shared by every config section; errors name the key.
double parse_config_real(const std::string& key, const std::string& value);
std::uint64_t parse_config_uint(const std::string& key, const std::string& value);
bool parse_config_bool(const std::string& key, const std::string& value);
// "%.17g": round-trips exactly.
std::string format_config_real(double v);

// Flat key/value views; every field has a key. Unknown keys throw ConfigError.
KeyValues to_key_values(const ModelConfig& c, const std::string& prefix = "model.");
KeyValues to_key_values(const TrainingConfig& c, const std::string& prefix = "train.");
// Applies the keys with the given prefix; returns the keys it consumed.
std::set<std::string> apply_key_values(ModelConfig& c, const KeyValues& kv, const std::string& prefix = "model.");
std::set<std::string> apply_key_values(TrainingConfig& c, const KeyValues& kv, const std::string& prefix = "train.");

}  // namespace unmt
