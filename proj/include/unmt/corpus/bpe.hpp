#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "unmt/corpus/text.hpp"

namespace unmt {

// Appended to the last symbol of every word while segmenting.
inline constexpr std::string_view kEndOfWord = "</w>";
// Suffix on every subword that is not the last piece of its word.
inline constexpr std::string_view kContinuation = "@@";

/// Ordered merge rules learned by byte-pair encoding.
struct BpeModel {
  std::vector<std::pair<std::string, std::string>> merges;
  int num_ops = 0;
};

/// Greedy most-frequent-pair merging over the word counts of `corpus`.
/// Ties on count go to the lexicographically smallest (left, right) pair.
/// Stops after num_ops merges or once no pair occurs min_frequency times.
BpeModel learn_bpe(std::span<const Sentence> corpus, int num_ops, long min_frequency = 2);

/// Applies a BpeModel; caches segmentations per word.
class BpeApplier {
 public:
  explicit BpeApplier(BpeModel model);

  // Symbols of one word with the end-of-word marker on the last one,
  // e.g. {"lo", "w</w>"}.
  std::vector<std::string> segment_word(const std::string& word);
  // Subword tokens, with kContinuation on non-final pieces.
  Sentence apply(const Sentence& words);

  const BpeModel& model() const { return model_; }

 private:
  BpeModel model_;
  std::unordered_map<std::string, int> ranks_;
  std::unordered_map<std::string, std::vector<std::string>> cache_;
};

inline Sentence apply_bpe(const BpeModel& model, const Sentence& words) {
  return BpeApplier(model).apply(words);
}

// Joins continuation-marked subwords back into words.
Sentence detokenize_bpe(const Sentence& subwords);

void save_bpe(const BpeModel& model, const std::filesystem::path& path);
BpeModel load_bpe(const std::filesystem::path& path);

}  // namespace unmt
