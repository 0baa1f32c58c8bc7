#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "unmt/corpus/parallel.hpp"

namespace unmt {

/// Padded single-language mini-batch. Matrices are row-major
/// batch_size x length and padded with kPad. Each target row ends with EOS.
struct Batch {
  std::string language;
  std::size_t language_index = 0;
  bool is_low_resource = false;
  std::size_t batch_size = 0;
  std::size_t source_length = 0;
  std::size_t target_length = 0;
  std::vector<std::size_t> source;
  std::vector<std::size_t> source_lengths;
  std::vector<std::size_t> target;
  std::vector<std::size_t> target_lengths;  // includes EOS
  std::vector<std::size_t> pair_indices;

  std::size_t source_at(std::size_t b, std::size_t t) const { return source[b * source_length + t]; }
  std::size_t target_at(std::size_t b, std::size_t t) const { return target[b * target_length + t]; }
};

Batch make_batch(const EncodedCorpus& corpus, std::span<const std::size_t> indices,
                 std::size_t language_index = 0, bool is_low_resource = false);

enum class LanguageSchedule {
  uniform,       // every language equally often
  proportional,  // by corpus size
};

/// Endless stream of single-language batches. The language of each batch
/// is drawn from the schedule; within a language the pairs are reshuffled
/// at the start of every language-local epoch, and an epoch ends with a
/// possibly short batch so every pair is used exactly once per epoch.
class BatchStream {
 public:
  BatchStream(std::vector<EncodedCorpus> corpora, std::size_t batch_size,
              LanguageSchedule schedule, std::uint64_t seed,
              std::set<std::string> low_resource = {},
              std::size_t max_length = kDefaultMaxLength);

  Batch next();
  // Batches drawn from one language only.
  Batch next_for(std::size_t language_index);

  std::size_t epoch(std::size_t language_index) const { return epochs_.at(language_index); }
  const std::vector<EncodedCorpus>& corpora() const { return corpora_; }

 private:
  void reshuffle(std::size_t lang);

  std::vector<EncodedCorpus> corpora_;
  std::size_t batch_size_;
  std::set<std::string> low_resource_;
  std::mt19937_64 rng_;
  std::discrete_distribution<std::size_t> pick_;
  std::vector<std::vector<std::size_t>> order_;
  std::vector<std::size_t> cursor_;
  std::vector<std::size_t> epochs_;
};

}  // namespace unmt
