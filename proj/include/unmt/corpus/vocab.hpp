#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "unmt/corpus/text.hpp"

namespace unmt {

inline constexpr std::size_t kPad = 0;
inline constexpr std::size_t kBos = 1;
inline constexpr std::size_t kEos = 2;
inline constexpr std::size_t kUnk = 3;
inline constexpr std::size_t kNumReserved = 4;

inline constexpr std::string_view kLanguageDelimiter = "|";

/// Token <-> contiguous id map. Ids 0..3 are PAD, BOS, EOS, UNK.
class Vocabulary {
 public:
  Vocabulary();

  // Returns the id of token, adding it if new.
  std::size_t add(const std::string& token, std::string language = {});
  std::optional<std::size_t> find(const std::string& token) const;
  // Unknown tokens map to kUnk.
  std::size_t id(const std::string& token) const;
  const std::string& token(std::size_t id) const;
  const std::string& language(std::size_t id) const { return languages_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<std::size_t> encode(const Sentence& s) const;
  // Stops at EOS, skips PAD and BOS.
  Sentence decode(std::span<const std::size_t> ids) const;

  bool operator==(const Vocabulary&) const = default;

 private:
  std::vector<std::string> tokens_;
  std::vector<std::string> languages_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Frequency-ordered vocabulary (descending count, ties lexicographic), so
/// that the token with id kNumReserved + r has frequency rank r + 1.
Vocabulary build_vocab(std::span<const Sentence> corpus, std::size_t min_count = 1,
                       const std::string& language = {});

// Frequency of every token, for rank lookups.
std::unordered_map<std::string, long> count_tokens(std::span<const Sentence> corpus);

std::string mark_token(const std::string& token, const std::string& language,
                       std::string_view delimiter = kLanguageDelimiter);
Sentence mark_sentence(const Sentence& s, const std::string& language,
                       std::string_view delimiter = kLanguageDelimiter);

struct LanguageCorpus {
  std::string language;
  std::vector<Sentence> sentences;
};

/// Union vocabulary for the multilingual baseline: every token is stored
/// as token<delimiter>language so no surface form is shared between
/// languages. Throws InputError if a token already contains the delimiter.
Vocabulary build_multilingual_vocab(std::span<const LanguageCorpus> corpora,
                                    std::string_view delimiter = kLanguageDelimiter);

}  // namespace unmt
