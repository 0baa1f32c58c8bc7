#include "unmt/pipeline/cipher.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "unmt/error.hpp"

namespace unmt {

namespace {

struct NounPhrase {
  std::size_t det = 0;
  std::optional<std::size_t> adj;
  std::size_t noun = 0;
};

struct Clause {
  NounPhrase subject;
  std::size_t verb = 0;
  std::optional<NounPhrase> object;
  std::optional<std::pair<std::size_t, NounPhrase>> pp;  // preposition, noun phrase
};

const std::vector<std::string> kDeterminers = {"the", "a", "this", "every", "some"};
const std::vector<double> kDeterminerWeights = {6, 4, 1.5, 1, 1};
const std::vector<std::string> kPrepositions = {"in", "on", "with", "near", "under", "from"};

// Word choice by class and topic: a Zipf-like base rate times a random
// log-normal affinity for every topic, so each word has its own context profile.
class Lexicon {
 public:
  Lexicon(std::size_t size, std::size_t topics, double spread, std::mt19937_64& rng) : tables_(topics) {
    std::normal_distribution<double> gauss(0.0, spread);
    std::vector<std::vector<double>> w(topics, std::vector<double>(size));
    for (std::size_t i = 0; i < size; ++i) {
      const double base = 1.0 / std::pow(static_cast<double>(i) + 2.0, 0.8);
      for (std::size_t z = 0; z < topics; ++z) w[z][i] = base * std::exp(gauss(rng));
    }
    for (std::size_t z = 0; z < topics; ++z) tables_[z] = std::discrete_distribution<std::size_t>(w[z].begin(), w[z].end());
  }
  std::size_t draw(std::size_t topic, std::mt19937_64& rng) { return tables_[topic](rng); }

 private:
  std::vector<std::discrete_distribution<std::size_t>> tables_;
};

class Grammar {
 public:
  Grammar(const CipherTaskConfig& c, std::mt19937_64& rng)
      : topics_(c.topics),
        nouns_(c.nouns, c.topics, c.topic_spread, rng),
        verbs_(c.verbs, c.topics, c.topic_spread, rng),
        adjectives_(c.adjectives, c.topics, c.topic_spread, rng),
        det_(kDeterminerWeights.begin(), kDeterminerWeights.end()) {}

  Clause sample(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> topic(0, topics_ - 1);
    std::uniform_int_distribution<std::size_t> prep(0, kPrepositions.size() - 1);
    std::bernoulli_distribution coin_obj(0.7), coin_pp(0.35), coin_adj(0.4);
    const auto z = topic(rng);
    auto np = [&] {
      NounPhrase p;
      p.det = det_(rng);
      if (coin_adj(rng)) p.adj = adjectives_.draw(z, rng);
      p.noun = nouns_.draw(z, rng);
      return p;
    };
    Clause c;
    c.subject = np();
    c.verb = verbs_.draw(z, rng);
    if (coin_obj(rng)) c.object = np();
    if (coin_pp(rng)) c.pp = std::make_pair(prep(rng), np());
    return c;
  }

 private:
  std::size_t topics_;
  Lexicon nouns_, verbs_, adjectives_;
  std::discrete_distribution<std::size_t> det_;
};

struct Vocab {
  std::vector<std::string> det, prep, noun, verb, adj;
};

// Pronounceable pseudo-words, unique across every language of the task.
class WordMaker {
 public:
  explicit WordMaker(std::mt19937_64& rng) : rng_(rng) {}
  std::string make() {
    static const std::string cons = "bdfgklmnprstvz", vow = "aeiou";
    std::uniform_int_distribution<std::size_t> c(0, cons.size() - 1), v(0, vow.size() - 1), syl(2, 3);
    for (;;) {
      std::string w;
      for (auto n = syl(rng_); n > 0; --n) {
        w += cons[c(rng_)];
        w += vow[v(rng_)];
      }
      if (used_.insert(w).second) return w;
    }
  }
  void reserve(const std::string& w) { used_.insert(w); }

 private:
  std::mt19937_64& rng_;
  std::set<std::string> used_;
};

Vocab english_vocab(const CipherTaskConfig& c, WordMaker& maker) {
  Vocab v;
  v.det = kDeterminers;
  v.prep = kPrepositions;
  for (auto& w : v.det) maker.reserve(w);
  for (auto& w : v.prep) maker.reserve(w);
  for (std::size_t i = 0; i < c.nouns; ++i) v.noun.push_back(maker.make());
  for (std::size_t i = 0; i < c.verbs; ++i) v.verb.push_back(maker.make());
  for (std::size_t i = 0; i < c.adjectives; ++i) v.adj.push_back(maker.make());
  return v;
}

Vocab cipher_vocab(const Vocab& en, WordMaker& maker, std::map<std::string, std::string>& lex) {
  auto map = [&](const std::vector<std::string>& words) {
    std::vector<std::string> out;
    for (const auto& w : words) {
      out.push_back(maker.make());
      lex[w] = out.back();
    }
    return out;
  };
  return {map(en.det), map(en.prep), map(en.noun), map(en.verb), map(en.adj)};
}

void render_np(const NounPhrase& p, const Vocab& v, WordOrder order, Sentence& out) {
  out.push_back(v.det[p.det]);
  if (p.adj && order != WordOrder::adjective_after) out.push_back(v.adj[*p.adj]);
  out.push_back(v.noun[p.noun]);
  if (p.adj && order == WordOrder::adjective_after) out.push_back(v.adj[*p.adj]);
}

Sentence render(const Clause& c, const Vocab& v, WordOrder order) {
  Sentence s;
  render_np(c.subject, v, order, s);
  if (order != WordOrder::verb_final) s.push_back(v.verb[c.verb]);
  if (c.object) render_np(*c.object, v, order, s);
  if (c.pp) {
    s.push_back(v.prep[c.pp->first]);
    render_np(c.pp->second, v, order, s);
  }
  if (order == WordOrder::verb_final) s.push_back(v.verb[c.verb]);
  return s;
}

}  // namespace

void CipherTaskConfig::validate() const {
  if (nouns == 0 || verbs == 0 || adjectives == 0 || topics == 0) throw ConfigError("cipher task: empty word class");
  if (topic_spread < 0.0) throw ConfigError("cipher task: topic_spread must be >= 0");
  if (auxiliary.size() != auxiliary_orders.size()) throw ConfigError("cipher task: one word order per auxiliary language");
  std::set<std::string> codes(auxiliary.begin(), auxiliary.end());
  codes.insert(low_resource);
  codes.insert(target);
  if (codes.size() != auxiliary.size() + 2) throw ConfigError("cipher task: language codes must be distinct");
}

std::vector<std::string> CipherTask::source_languages() const {
  auto out = config.auxiliary;
  out.push_back(config.low_resource);
  return out;
}

CipherTask make_cipher_task(const CipherTaskConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  CipherTask task;
  task.config = config;
  WordMaker maker(rng);
  Grammar grammar(config, rng);
  const Vocab en = english_vocab(config, maker);

  std::vector<std::string> langs = config.auxiliary;
  std::vector<WordOrder> orders = config.auxiliary_orders;
  langs.push_back(config.low_resource);
  orders.push_back(config.low_resource_order);
  std::map<std::string, Vocab> vocab;
  for (const auto& l : langs) vocab[l] = cipher_vocab(en, maker, task.lexicon[l]);

  auto parallel = [&](const std::string& lang, WordOrder order, std::size_t n) {
    ParallelCorpus c{lang, {}, false};
    for (std::size_t i = 0; i < n; ++i) {
      const auto clause = grammar.sample(rng);
      c.pairs.push_back({render(clause, vocab[lang], order), render(clause, en, WordOrder::svo)});
    }
    return c;
  };
  for (std::size_t i = 0; i < langs.size(); ++i) {
    const bool low = langs[i] == config.low_resource;
    task.train[langs[i]] = parallel(langs[i], orders[i], low ? config.low_resource_pairs : config.auxiliary_pairs);
    task.dev[langs[i]] = parallel(langs[i], orders[i], config.dev_pairs);
    task.test[langs[i]] = parallel(langs[i], orders[i], config.test_pairs);
  }
  // Monolingual text is sampled independently for every language.
  auto mono = [&](const Vocab& v, WordOrder order) {
    std::vector<Sentence> out;
    for (std::size_t i = 0; i < config.monolingual_sentences; ++i) out.push_back(render(grammar.sample(rng), v, order));
    return out;
  };
  task.monolingual[config.target] = mono(en, WordOrder::svo);
  for (std::size_t i = 0; i < langs.size(); ++i) task.monolingual[langs[i]] = mono(vocab[langs[i]], orders[i]);
  return task;
}

namespace {

std::string order_name(WordOrder o) {
  switch (o) {
    case WordOrder::svo: return "svo";
    case WordOrder::adjective_after: return "adjective_after";
    case WordOrder::verb_final: return "verb_final";
  }
  return "svo";
}

WordOrder parse_order(const std::string& key, const std::string& v) {
  if (v == "svo") return WordOrder::svo;
  if (v == "adjective_after") return WordOrder::adjective_after;
  if (v == "verb_final") return WordOrder::verb_final;
  throw ConfigError("config key '" + key + "': unknown word order '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

KeyValues to_key_values(const CipherTaskConfig& c, const std::string& p) {
  std::string aux, orders;
  for (std::size_t i = 0; i < c.auxiliary.size(); ++i) {
    aux += (i ? "," : "") + c.auxiliary[i];
    orders += (i ? "," : "") + order_name(c.auxiliary_orders[i]);
  }
  return {
      {p + "nouns", std::to_string(c.nouns)},
      {p + "verbs", std::to_string(c.verbs)},
      {p + "adjectives", std::to_string(c.adjectives)},
      {p + "topics", std::to_string(c.topics)},
      {p + "topic_spread", format_config_real(c.topic_spread)},
      {p + "auxiliary", aux},
      {p + "auxiliary_orders", orders},
      {p + "low_resource", c.low_resource},
      {p + "low_resource_order", order_name(c.low_resource_order)},
      {p + "target", c.target},
      {p + "auxiliary_pairs", std::to_string(c.auxiliary_pairs)},
      {p + "low_resource_pairs", std::to_string(c.low_resource_pairs)},
      {p + "dev_pairs", std::to_string(c.dev_pairs)},
      {p + "test_pairs", std::to_string(c.test_pairs)},
      {p + "monolingual_sentences", std::to_string(c.monolingual_sentences)},
  };
}

std::set<std::string> apply_key_values(CipherTaskConfig& c, const KeyValues& kv, const std::string& prefix) {
  std::set<std::string> used;
  for (const auto& [key, v] : kv) {
    if (key.rfind(prefix, 0) != 0) continue;
    const std::string k = key.substr(prefix.size());
    if (k == "nouns") c.nouns = parse_config_uint(key, v);
    else if (k == "verbs") c.verbs = parse_config_uint(key, v);
    else if (k == "adjectives") c.adjectives = parse_config_uint(key, v);
    else if (k == "topics") c.topics = parse_config_uint(key, v);
    else if (k == "topic_spread") c.topic_spread = parse_config_real(key, v);
    else if (k == "auxiliary") c.auxiliary = split_list(v);
    else if (k == "auxiliary_orders") {
      c.auxiliary_orders.clear();
      for (const auto& o : split_list(v)) c.auxiliary_orders.push_back(parse_order(key, o));
    } else if (k == "low_resource") c.low_resource = v;
    else if (k == "low_resource_order") c.low_resource_order = parse_order(key, v);
    else if (k == "target") c.target = v;
    else if (k == "auxiliary_pairs") c.auxiliary_pairs = parse_config_uint(key, v);
    else if (k == "low_resource_pairs") c.low_resource_pairs = parse_config_uint(key, v);
    else if (k == "dev_pairs") c.dev_pairs = parse_config_uint(key, v);
    else if (k == "test_pairs") c.test_pairs = parse_config_uint(key, v);
    else if (k == "monolingual_sentences") c.monolingual_sentences = parse_config_uint(key, v);
    else throw ConfigError("unknown config key '" + key + "'");
    used.insert(key);
  }
  return used;
}

}  // namespace unmt
