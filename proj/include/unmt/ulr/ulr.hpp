#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "unmt/corpus/vocab.hpp"
#include "unmt/embeddings/embedding_table.hpp"
#include "unmt/tensor/tensor.hpp"

namespace unmt {

struct UlrConfig {
  double tau = 0.05;
  std::size_t top_frequent_k = 500;
  std::optional<std::size_t> top_n_universal;  // empty = softmax over all M

  void validate() const;
};

/// The M universal tokens: frozen keys E^K (M x d), trainable NMT
/// embeddings E^U (M x d_model) and the shared transform A (d x d, starts
/// as the identity).
class UniversalTokenSet {
 public:
  UniversalTokenSet() = default;
  // keys must be normalized. E^U is drawn uniformly from [-init_range, init_range].
  UniversalTokenSet(EmbeddingTable keys, std::size_t model_dim, std::mt19937_64& rng, double init_range = 0.08);
  // Restores trained state.
  UniversalTokenSet(EmbeddingTable keys, Tensor universal, Tensor transform);

  std::size_t size() const { return keys_.size(); }
  std::size_t key_dim() const { return keys_.dim(); }
  std::size_t model_dim() const { return universal_.cols(); }
  const std::vector<std::string>& tokens() const { return keys_.tokens(); }
  const EmbeddingTable& keys() const { return keys_; }
  // E^K as a constant tensor (never requires grad).
  const Tensor& key_matrix() const { return key_matrix_; }
  const Tensor& universal() const { return universal_; }
  const Tensor& transform() const { return transform_; }

 private:
  EmbeddingTable keys_;
  Tensor key_matrix_;
  Tensor universal_;
  Tensor transform_;
};

/// Frozen projected query vectors of one language plus frequency ranks
/// taken from that language's monolingual corpus.
class QuerySpace {
 public:
  QuerySpace() = default;
  // Ranks are 1-based positions in descending-count order (ties lexicographic).
  QuerySpace(std::string language, EmbeddingTable projected, const std::unordered_map<std::string, long>& counts);
  QuerySpace(std::string language, EmbeddingTable projected, std::unordered_map<std::string, std::size_t> ranks);

  const std::string& language() const { return language_; }
  const EmbeddingTable& table() const { return table_; }
  std::optional<std::span<const double>> query(const std::string& token) const;
  std::optional<std::size_t> rank(const std::string& token) const;
  const std::unordered_map<std::string, std::size_t>& ranks() const { return ranks_; }

 private:
  std::string language_;
  EmbeddingTable table_;
  std::unordered_map<std::string, std::size_t> ranks_;
};

/// D(u_i, x) = E^K(u_i) A E^Q(x)^T for all i, as a 1 x M tensor. Tokens
/// without a query vector get all-zero scores (uniform q). Differentiable
/// in A only.
Tensor similarity(const UniversalTokenSet& uts, const QuerySpace& qs, const std::string& token);

/// q(.|x) = softmax(scores / tau), optionally restricted to the top-n scores
/// of each row. Accepts any number of rows.
Tensor token_distribution(const Tensor& scores, const UlrConfig& config);

// sum_i q_i E^U(u_i); q is 1 x M (or N x M for N tokens at once).
Tensor universal_embedding(const UniversalTokenSet& uts, const Tensor& q);

/// Per-language trainable table E^I over the language's vocabulary with
/// alpha(x) = 1 iff rank(x) <= k (reserved ids always 1) and beta = 1.
class InterpolationRule {
 public:
  InterpolationRule() = default;
  InterpolationRule(Vocabulary vocab, const QuerySpace& qs, std::size_t top_frequent_k, std::size_t model_dim,
                    std::mt19937_64& rng, double init_range = 0.08);
  InterpolationRule(Vocabulary vocab, const QuerySpace& qs, std::size_t top_frequent_k, Tensor table);

  const Vocabulary& vocab() const { return vocab_; }
  const Tensor& table() const { return table_; }
  double alpha(std::size_t id) const { return alpha_.at(id); }
  std::span<const double> alphas() const { return alpha_; }

 private:
  void compute_alpha(const QuerySpace& qs, std::size_t k);
  Vocabulary vocab_;
  Tensor table_;
  std::vector<double> alpha_;
};

/// alpha(x) E^I(x) + universal_embedding(q(.|x)); unknown tokens use the UNK
/// row of E^I plus the mixture of their (possibly uniform) distribution.
Tensor interpolated_embedding(const InterpolationRule& rule, const UniversalTokenSet& uts, const QuerySpace& qs,
                              const std::string& token, const UlrConfig& config);

/// Batched form used by the encoder: one row per id. E^K A is formed once
/// and q is computed once per distinct id.
Tensor ulr_embed(const InterpolationRule& rule, const UniversalTokenSet& uts, const QuerySpace& qs,
                 std::span<const std::size_t> ids, const UlrConfig& config);

// Parameters of the shared universal space, for optimizers and checkpoints.
inline constexpr const char* kUniversalEmbeddingName = "ulr.universal";
inline constexpr const char* kTransformName = "ulr.transform";

}  // namespace unmt
