#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "unmt/corpus/parallel.hpp"
#include "unmt/embeddings/embedding_table.hpp"
#include "unmt/tensor/tensor.hpp"

namespace unmt {

struct SeedPair {
  std::string source;
  std::string target;  // universal token
  long count = 0;
};

struct SeedDictionary {
  std::string language;
  std::vector<SeedPair> entries;
};

using TokenPair = std::pair<std::string, std::string>;

/// Counts the (source, target) stream, keeps the most frequent target per
/// source (ties lexicographic), drops pairs below min_count, ranks by count
/// (ties by source token) and keeps the first max_seeds. Throws InputError
/// if nothing survives.
SeedDictionary extract_seeds(std::span<const TokenPair> aligned, long min_count,
                             std::size_t max_seeds = 500, const std::string& language = {});

/// Stand-in for an external word aligner: each source token is linked to
/// the target token of the same sentence pair with the highest Dice
/// coefficient over sentence co-occurrence, if that coefficient reaches
/// min_dice.
std::vector<TokenPair> cooccurrence_alignments(std::span<const SentencePair> pairs, double min_dice = 0.1);

// TSV "source<TAB>universal<TAB>count".
void save_seeds(const SeedDictionary& seeds, const std::filesystem::path& path);
SeedDictionary load_seeds(const std::filesystem::path& path, const std::string& language = {});

// Keeps only entries whose tokens exist in both tables.
SeedDictionary filter_seeds(const SeedDictionary& seeds, const EmbeddingTable& queries,
                            const EmbeddingTable& keys);

struct OrthogonalMap {
  std::string language;
  Tensor matrix;  // d x d; a query row x maps to x * matrix
  std::vector<std::string> warnings;

  std::size_t dim() const { return matrix.rows(); }
};

inline constexpr std::size_t kMinSeeds = 2;
inline constexpr std::size_t kFewSeedsWarning = 50;

/// Orthogonal Procrustes: O = U V^T from svd(X^T Y), where X and Y stack
/// the seed query and key rows. Throws LookupError naming a missing token
/// and InputError with fewer than kMinSeeds seeds.
OrthogonalMap solve_procrustes(const EmbeddingTable& queries, const EmbeddingTable& keys,
                               const SeedDictionary& seeds);

// Sum over seeds of (x * O) . y.
double procrustes_objective(const EmbeddingTable& queries, const EmbeddingTable& keys,
                            const SeedDictionary& seeds, const Tensor& map);

EmbeddingTable project(const EmbeddingTable& table, const OrthogonalMap& map);

// Text matrix: "<dim>" then dim rows of dim reals (hexfloat, exact).
void save_map(const OrthogonalMap& map, const std::filesystem::path& path);
OrthogonalMap load_map(const std::filesystem::path& path, const std::string& language = {});

// max |O^T O - I|
double orthogonality_residual(const Tensor& o);

}  // namespace unmt
