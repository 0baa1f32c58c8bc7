#include "unmt/corpus/vocab.hpp"

#include <algorithm>

#include "unmt/error.hpp"

namespace unmt {

Vocabulary::Vocabulary() {
  for (const char* t : {"<pad>", "<s>", "</s>", "<unk>"}) add(t);
}

std::size_t Vocabulary::add(const std::string& token, std::string language) {
  if (auto it = index_.find(token); it != index_.end()) return it->second;
  const auto id = tokens_.size();
  tokens_.push_back(token);
  languages_.push_back(std::move(language));
  index_.emplace(token, id);
  return id;
}

std::optional<std::size_t> Vocabulary::find(const std::string& token) const {
  if (auto it = index_.find(token); it != index_.end()) return it->second;
  return std::nullopt;
}

std::size_t Vocabulary::id(const std::string& token) const { return find(token).value_or(kUnk); }

const std::string& Vocabulary::token(std::size_t id) const {
  if (id >= tokens_.size()) throw LookupError("vocabulary id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

std::vector<std::size_t> Vocabulary::encode(const Sentence& s) const {
  std::vector<std::size_t> out;
  out.reserve(s.size());
  for (const auto& t : s) out.push_back(id(t));
  return out;
}

Sentence Vocabulary::decode(std::span<const std::size_t> ids) const {
  Sentence out;
  for (auto i : ids) {
    if (i == kEos) break;
    if (i == kPad || i == kBos) continue;
    out.push_back(token(i));
  }
  return out;
}

std::unordered_map<std::string, long> count_tokens(std::span<const Sentence> corpus) {
  std::unordered_map<std::string, long> counts;
  for (const auto& s : corpus) {
    for (const auto& t : s) ++counts[t];
  }
  return counts;
}

Vocabulary build_vocab(std::span<const Sentence> corpus, std::size_t min_count, const std::string& language) {
  auto counts = count_tokens(corpus);
  std::vector<std::pair<std::string, long>> items(counts.begin(), counts.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocabulary v;
  for (const auto& [tok, c] : items) {
    if (static_cast<std::size_t>(c) >= min_count) v.add(tok, language);
  }
  return v;
}

std::string mark_token(const std::string& token, const std::string& language, std::string_view delimiter) {
  return token + std::string(delimiter) + language;
}

Sentence mark_sentence(const Sentence& s, const std::string& language, std::string_view delimiter) {
  Sentence out;
  out.reserve(s.size());
  for (const auto& t : s) out.push_back(mark_token(t, language, delimiter));
  return out;
}

Vocabulary build_multilingual_vocab(std::span<const LanguageCorpus> corpora, std::string_view delimiter) {
  Vocabulary v;
  for (const auto& c : corpora) {
    for (const auto& s : c.sentences) {
      for (const auto& t : s) {
        if (t.find(delimiter) != std::string::npos) {
          throw InputError("token '" + t + "' in language '" + c.language + "' contains the delimiter '" +
                           std::string(delimiter) + "'");
        }
      }
    }
    auto per_language = build_vocab(c.sentences, 1, c.language);
    for (std::size_t i = kNumReserved; i < per_language.size(); ++i) {
      v.add(mark_token(per_language.token(i), c.language, delimiter), c.language);
    }
  }
  return v;
}

}  // namespace unmt
