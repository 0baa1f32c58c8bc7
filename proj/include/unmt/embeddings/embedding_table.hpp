#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "unmt/corpus/text.hpp"
#include "unmt/tensor/tensor.hpp"

namespace unmt {

/// Token-aligned dense vectors for one language.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  // Throws FormatError on duplicate tokens or a size mismatch.
  EmbeddingTable(std::string language, std::vector<std::string> tokens, std::size_t dim,
                 std::vector<double> values);
  // Restores a table saved after normalization without touching its values.
  // Throws FormatError if a nonzero row is not unit length within 1e-10.
  static EmbeddingTable restore_normalized(std::string language, std::vector<std::string> tokens,
                                           std::size_t dim, std::vector<double> values);

  const std::string& language() const { return language_; }
  void set_language(std::string language) { language_ = std::move(language); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }
  std::size_t dim() const { return dim_; }
  std::span<const double> values() const { return values_; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
  std::span<double> row_mut(std::size_t i) { return {values_.data() + i * dim_, dim_}; }
  std::optional<std::size_t> index(const std::string& token) const;
  bool contains(const std::string& token) const { return index(token).has_value(); }

  bool normalized() const { return normalized_; }
  // Rows that were all zero at normalization time.
  const std::vector<std::size_t>& zero_rows() const { return zero_rows_; }

  Tensor as_tensor() const;

 private:
  friend EmbeddingTable normalize_rows(EmbeddingTable table);

  std::string language_;
  std::vector<std::string> tokens_;
  std::size_t dim_ = 0;
  std::vector<double> values_;
  std::unordered_map<std::string, std::size_t> index_;
  bool normalized_ = false;
  std::vector<std::size_t> zero_rows_;
};

/// Reads the text vector format: "<count> <dim>" then "<token> v1 .. v_dim"
/// per line. Errors carry the offending line number.
EmbeddingTable load_vectors(const std::filesystem::path& path,
                            std::optional<std::size_t> expected_dim = std::nullopt,
                            const std::string& language = {});
// Values are written with 6 decimal digits.
void save_vectors(const EmbeddingTable& table, const std::filesystem::path& path);

/// Divides every nonzero row by its L2 norm. Zero rows stay zero and are
/// listed in zero_rows().
EmbeddingTable normalize_rows(EmbeddingTable table);

struct Neighbor {
  std::string token;
  double cosine = 0.0;
};

/// Top-k rows by cosine with `query`, descending, ties in token order.
/// The table must be normalized; k larger than the table is truncated.
std::vector<Neighbor> nearest_neighbors(const EmbeddingTable& table, std::span<const double> query,
                                        std::size_t k);

struct SkipGramConfig {
  std::size_t dim = 300;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  std::size_t min_count = 1;
  double learning_rate = 0.025;
  std::uint64_t seed = 1;
};

/// Skip-gram with negative sampling (unigram^0.75 noise, linearly decaying
/// learning rate, randomly shrunk windows). Serial and deterministic for a
/// given seed. Tokens are ordered by descending frequency.
EmbeddingTable train_skipgram(std::span<const Sentence> corpus, const SkipGramConfig& config,
                              const std::string& language = {});

}  // namespace unmt
