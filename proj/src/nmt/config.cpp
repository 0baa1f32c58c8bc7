#include "unmt/nmt/config.hpp"

#include <charconv>
#include <functional>
#include <sstream>

#include "unmt/corpus/text.hpp"
#include "unmt/error.hpp"

namespace unmt {

std::string format_config_real(double v) {
  // Shortest form that round-trips exactly.
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_config_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

std::uint64_t parse_config_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const auto n = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
}

bool parse_config_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

namespace {

std::string flag(bool b) { return b ? "true" : "false"; }

using Setter = std::function<void(const std::string& key, const std::string& value)>;

std::set<std::string> apply(const std::map<std::string, Setter>& setters, const KeyValues& kv,
                            const std::string& prefix) {
  std::set<std::string> used;
  for (const auto& [key, value] : kv) {
    if (key.rfind(prefix, 0) != 0) continue;
    auto it = setters.find(key.substr(prefix.size()));
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(key, value);
    used.insert(key);
  }
  return used;
}

}  // namespace

void ModelConfig::validate() const {
  if (embed_dim == 0 || hidden_dim == 0 || attention_dim == 0) throw ConfigError("model dims must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model.dropout must be in [0, 1)");
  if (!(init_range > 0.0)) throw ConfigError("model.init_range must be positive");
  if (gate_loss_weight < 0.0) throw ConfigError("model.gate_loss_weight must be >= 0");
  ulr.validate();
}

void TrainingConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
  if (clip_norm < 0.0) throw ConfigError("train.clip_norm must be >= 0");
  if (max_length == 0) throw ConfigError("train.max_length must be positive");
}

KeyValues to_key_values(const ModelConfig& c, const std::string& p) {
  return {
      {p + "embed_dim", std::to_string(c.embed_dim)},
      {p + "hidden_dim", std::to_string(c.hidden_dim)},
      {p + "attention_dim", std::to_string(c.attention_dim)},
      {p + "attention", c.attention == AttentionKind::additive ? "additive" : "bilinear"},
      {p + "dropout", format_config_real(c.dropout)},
      {p + "init_range", format_config_real(c.init_range)},
      {p + "use_mole", flag(c.use_mole)},
      {p + "expert_hidden_dim", std::to_string(c.expert_hidden_dim)},
      {p + "gate_loss_weight", format_config_real(c.gate_loss_weight)},
      {p + "train_transform", flag(c.train_transform)},
      {p + "ulr.tau", format_config_real(c.ulr.tau)},
      {p + "ulr.top_frequent_k", std::to_string(c.ulr.top_frequent_k)},
      {p + "ulr.top_n_universal", c.ulr.top_n_universal ? std::to_string(*c.ulr.top_n_universal) : "none"},
      {p + "seed", std::to_string(c.seed)},
      {p + "bpe_model", c.bpe_model.empty() ? "none" : c.bpe_model},
  };
}

KeyValues to_key_values(const TrainingConfig& c, const std::string& p) {
  std::string low;
  for (const auto& l : c.low_resource) low += (low.empty() ? "" : ",") + l;
  return {
      {p + "batch_size", std::to_string(c.batch_size)},
      {p + "max_steps", std::to_string(c.max_steps)},
      {p + "learning_rate", format_config_real(c.learning_rate)},
      {p + "clip_norm", format_config_real(c.clip_norm)},
      {p + "schedule", c.schedule == LanguageSchedule::uniform ? "uniform" : "proportional"},
      {p + "low_resource", low.empty() ? "none" : low},
      {p + "seed", std::to_string(c.seed)},
      {p + "eval_interval", std::to_string(c.eval_interval)},
      {p + "max_length", std::to_string(c.max_length)},
  };
}

std::set<std::string> apply_key_values(ModelConfig& c, const KeyValues& kv, const std::string& prefix) {
  auto size = [](std::size_t& field) {
    return [&field](const std::string& k, const std::string& v) { field = parse_config_uint(k, v); };
  };
  auto number = [](double& field) {
    return [&field](const std::string& k, const std::string& v) { field = parse_config_real(k, v); };
  };
  auto boolean = [](bool& field) {
    return [&field](const std::string& k, const std::string& v) { field = parse_config_bool(k, v); };
  };
  std::map<std::string, Setter> s{
      {"embed_dim", size(c.embed_dim)},
      {"hidden_dim", size(c.hidden_dim)},
      {"attention_dim", size(c.attention_dim)},
      {"attention",
       [&](const std::string& k, const std::string& v) {
         if (v == "additive") c.attention = AttentionKind::additive;
         else if (v == "bilinear") c.attention = AttentionKind::bilinear;
         else throw ConfigError("config key '" + k + "': expected additive or bilinear");
       }},
      {"dropout", number(c.dropout)},
      {"init_range", number(c.init_range)},
      {"use_mole", boolean(c.use_mole)},
      {"expert_hidden_dim", size(c.expert_hidden_dim)},
      {"gate_loss_weight", number(c.gate_loss_weight)},
      {"train_transform", boolean(c.train_transform)},
      {"ulr.tau", number(c.ulr.tau)},
      {"ulr.top_frequent_k", size(c.ulr.top_frequent_k)},
      {"ulr.top_n_universal",
       [&](const std::string& k, const std::string& v) {
         if (v == "none") c.ulr.top_n_universal.reset();
         else c.ulr.top_n_universal = parse_config_uint(k, v);
       }},
      {"seed", [&](const std::string& k, const std::string& v) { c.seed = parse_config_uint(k, v); }},
      {"bpe_model", [&](const std::string&, const std::string& v) { c.bpe_model = v == "none" ? "" : v; }},
  };
  return apply(s, kv, prefix);
}

std::set<std::string> apply_key_values(TrainingConfig& c, const KeyValues& kv, const std::string& prefix) {
  std::map<std::string, Setter> s{
      {"batch_size", [&](const std::string& k, const std::string& v) { c.batch_size = parse_config_uint(k, v); }},
      {"max_steps", [&](const std::string& k, const std::string& v) { c.max_steps = parse_config_uint(k, v); }},
      {"learning_rate", [&](const std::string& k, const std::string& v) { c.learning_rate = parse_config_real(k, v); }},
      {"clip_norm", [&](const std::string& k, const std::string& v) { c.clip_norm = parse_config_real(k, v); }},
      {"schedule",
       [&](const std::string& k, const std::string& v) {
         if (v == "uniform") c.schedule = LanguageSchedule::uniform;
         else if (v == "proportional") c.schedule = LanguageSchedule::proportional;
         else throw ConfigError("config key '" + k + "': expected uniform or proportional");
       }},
      {"low_resource",
       [&](const std::string&, const std::string& v) {
         c.low_resource.clear();
         if (v == "none") return;
         std::string item;
         std::istringstream in(v);
         while (std::getline(in, item, ',')) {
           if (!item.empty()) c.low_resource.insert(item);
         }
       }},
      {"seed", [&](const std::string& k, const std::string& v) { c.seed = parse_config_uint(k, v); }},
      {"eval_interval", [&](const std::string& k, const std::string& v) { c.eval_interval = parse_config_uint(k, v); }},
      {"max_length", [&](const std::string& k, const std::string& v) { c.max_length = parse_config_uint(k, v); }},
  };
  return apply(s, kv, prefix);
}

}  // namespace unmt
