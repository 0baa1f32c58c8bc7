#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "unmt/corpus/parallel.hpp"
#include "unmt/nmt/config.hpp"

namespace unmt {

enum class WordOrder {
  svo,                // subject verb object, adjective before noun
  adjective_after,    // adjective after its noun
  verb_final,         // subject object ... verb
};

/// Synthetic "cipher family": an English-like target language produced by a
/// small topical grammar, and source languages that rewrite each English
/// word through a private random lexicon and optionally reorder phrases.
struct CipherTaskConfig {
  std::size_t nouns = 120;
  std::size_t verbs = 50;
  std::size_t adjectives = 40;
  std::size_t topics = 30;
  double topic_spread = 1.5;  // std-dev of the log affinity of a word to a topic
  std::vector<std::string> auxiliary = {"xa", "xb", "xc"};
  std::vector<WordOrder> auxiliary_orders = {WordOrder::svo, WordOrder::adjective_after, WordOrder::verb_final};
  std::string low_resource = "lo";
  WordOrder low_resource_order = WordOrder::adjective_after;
  std::string target = "en";
  std::size_t auxiliary_pairs = 2000;
  std::size_t low_resource_pairs = 100;  // size of the low-resource training pool
  std::size_t dev_pairs = 200;
  std::size_t test_pairs = 500;
  std::size_t monolingual_sentences = 20000;

  void validate() const;
};

struct CipherTask {
  CipherTaskConfig config;
  std::map<std::string, ParallelCorpus> train;  // per source language
  std::map<std::string, ParallelCorpus> dev;
  std::map<std::string, ParallelCorpus> test;
  std::map<std::string, std::vector<Sentence>> monolingual;  // every language incl. the target
  std::map<std::string, std::map<std::string, std::string>> lexicon;  // language -> (english -> word)

  std::vector<std::string> source_languages() const;
};

CipherTask make_cipher_task(const CipherTaskConfig& config, std::uint64_t seed);

KeyValues to_key_values(const CipherTaskConfig& c, const std::string& prefix = "task.");
std::set<std::string> apply_key_values(CipherTaskConfig& c, const KeyValues& kv, const std::string& prefix = "task.");

}  // namespace unmt
