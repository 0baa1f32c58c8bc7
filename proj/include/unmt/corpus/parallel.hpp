#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "unmt/corpus/text.hpp"

namespace unmt {

inline constexpr std::size_t kDefaultMaxLength = 50;

struct SentencePair {
  Sentence source;
  Sentence target;
};

struct ParallelCorpus {
  std::string language;
  std::vector<SentencePair> pairs;
  bool synthetic = false;

  std::size_t size() const { return pairs.size(); }
};

// Two line-aligned files, one sentence per line.
ParallelCorpus load_parallel(const std::string& language, const std::filesystem::path& source,
                             const std::filesystem::path& target);
// One "source<TAB>target" pair per line.
ParallelCorpus load_parallel_tsv(const std::string& language, const std::filesystem::path& path);
void save_parallel_tsv(const ParallelCorpus& corpus, const std::filesystem::path& path);

// Drops pairs with an empty side or with either side longer than max_length.
ParallelCorpus filter_pairs(ParallelCorpus corpus, std::size_t max_length = kDefaultMaxLength);

/// Id-encoded corpus consumed by the batcher. Target sequences do not
/// include BOS/EOS; the model adds them.
struct EncodedCorpus {
  std::string language;
  std::vector<std::vector<std::size_t>> source;
  std::vector<std::vector<std::size_t>> target;

  std::size_t size() const { return source.size(); }
};

}  // namespace unmt
