#include "unmt/ulr/ulr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "unmt/error.hpp"
#include "unmt/tensor/ops.hpp"

namespace unmt {

namespace {

Tensor uniform_tensor(Shape shape, std::mt19937_64& rng, double range) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::uniform_real_distribution<double> dist(-range, range);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

}  // namespace

void UlrConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("ulr: tau must be positive");
  if (top_n_universal && *top_n_universal == 0) throw ConfigError("ulr: top_n_universal must be >= 1");
}

UniversalTokenSet::UniversalTokenSet(EmbeddingTable keys, std::size_t model_dim, std::mt19937_64& rng,
                                     double init_range)
    : UniversalTokenSet(keys, uniform_tensor({keys.size(), model_dim}, rng, init_range),
                        Tensor::identity(keys.dim())) {}

UniversalTokenSet::UniversalTokenSet(EmbeddingTable keys, Tensor universal, Tensor transform)
    : keys_(std::move(keys)), universal_(std::move(universal)), transform_(std::move(transform)) {
  if (keys_.size() == 0) throw ConfigError("universal token set is empty");
  if (!keys_.normalized()) throw ConfigError("universal key table must be normalized");
  if (universal_.rows() != keys_.size()) {
    throw ConfigError("E^U has " + std::to_string(universal_.rows()) + " rows for " +
                      std::to_string(keys_.size()) + " universal tokens");
  }
  if (transform_.rows() != keys_.dim() || transform_.cols() != keys_.dim()) {
    throw ConfigError("transform is " + shape_string(transform_.shape()) + " but key dim is " +
                      std::to_string(keys_.dim()));
  }
  key_matrix_ = keys_.as_tensor();
  universal_.set_requires_grad(true);
  transform_.set_requires_grad(true);
}

QuerySpace::QuerySpace(std::string language, EmbeddingTable projected,
                       const std::unordered_map<std::string, long>& counts)
    : language_(std::move(language)), table_(std::move(projected)) {
  std::vector<std::pair<std::string, long>> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  for (std::size_t i = 0; i < sorted.size(); ++i) ranks_.emplace(sorted[i].first, i + 1);
}

QuerySpace::QuerySpace(std::string language, EmbeddingTable projected,
                       std::unordered_map<std::string, std::size_t> ranks)
    : language_(std::move(language)), table_(std::move(projected)), ranks_(std::move(ranks)) {}

std::optional<std::span<const double>> QuerySpace::query(const std::string& token) const {
  if (auto i = table_.index(token)) return table_.row(*i);
  return std::nullopt;
}

std::optional<std::size_t> QuerySpace::rank(const std::string& token) const {
  if (auto it = ranks_.find(token); it != ranks_.end()) return it->second;
  return std::nullopt;
}

namespace {

void check_dims(const UniversalTokenSet& uts, const QuerySpace& qs) {
  if (qs.table().dim() != uts.key_dim()) {
    throw ConfigError("query space '" + qs.language() + "' has dim " + std::to_string(qs.table().dim()) +
                      " but universal keys have dim " + std::to_string(uts.key_dim()));
  }
}

// Rows of projected query vectors; zero rows for tokens without one.
Tensor query_rows(const QuerySpace& qs, const std::vector<const std::string*>& tokens, std::size_t dim) {
  std::vector<double> v(tokens.size() * dim, 0.0);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (auto q = qs.query(*tokens[i])) std::copy(q->begin(), q->end(), v.begin() + i * dim);
  }
  return Tensor({tokens.size(), dim}, std::move(v));
}

Tensor scores_for(const UniversalTokenSet& uts, const Tensor& queries) {
  // (E^K A) once, then every query against every key.
  const Tensor ka = ops::matmul(uts.key_matrix(), uts.transform());
  return ops::matmul_bt(queries, ka);
}

}  // namespace

Tensor similarity(const UniversalTokenSet& uts, const QuerySpace& qs, const std::string& token) {
  check_dims(uts, qs);
  return scores_for(uts, query_rows(qs, {&token}, uts.key_dim()));
}

Tensor token_distribution(const Tensor& scores, const UlrConfig& config) {
  config.validate();
  const std::size_t m = scores.cols();
  if (!config.top_n_universal || *config.top_n_universal >= m) return ops::softmax_rows(scores, config.tau);
  const std::size_t n = *config.top_n_universal;
  std::vector<unsigned char> keep(scores.numel(), 0);
  std::vector<std::size_t> order(m);
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    const double* row = scores.data().data() + r * m;
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                      [&](std::size_t a, std::size_t b) { return row[a] != row[b] ? row[a] > row[b] : a < b; });
    for (std::size_t i = 0; i < n; ++i) keep[r * m + order[i]] = 1;
  }
  return ops::masked_softmax_rows(scores, keep, config.tau);
}

Tensor universal_embedding(const UniversalTokenSet& uts, const Tensor& q) {
  if (q.cols() != uts.size()) {
    throw DimensionError("universal_embedding: q has " + std::to_string(q.cols()) + " entries for " +
                         std::to_string(uts.size()) + " universal tokens");
  }
  return ops::matmul(q, uts.universal());
}

InterpolationRule::InterpolationRule(Vocabulary vocab, const QuerySpace& qs, std::size_t top_frequent_k,
                                     std::size_t model_dim, std::mt19937_64& rng, double init_range)
    : vocab_(std::move(vocab)), table_(uniform_tensor({vocab_.size(), model_dim}, rng, init_range)) {
  compute_alpha(qs, top_frequent_k);
}

InterpolationRule::InterpolationRule(Vocabulary vocab, const QuerySpace& qs, std::size_t top_frequent_k,
                                     Tensor table)
    : vocab_(std::move(vocab)), table_(std::move(table)) {
  if (table_.rows() != vocab_.size()) throw ConfigError("E^I rows do not match the vocabulary size");
  table_.set_requires_grad(true);
  compute_alpha(qs, top_frequent_k);
}

void InterpolationRule::compute_alpha(const QuerySpace& qs, std::size_t k) {
  alpha_.assign(vocab_.size(), 0.0);
  for (std::size_t id = 0; id < vocab_.size(); ++id) {
    if (id < kNumReserved) {
      alpha_[id] = 1.0;
      continue;
    }
    auto r = qs.rank(vocab_.token(id));
    alpha_[id] = r && *r <= k ? 1.0 : 0.0;
  }
}

Tensor interpolated_embedding(const InterpolationRule& rule, const UniversalTokenSet& uts, const QuerySpace& qs,
                              const std::string& token, const UlrConfig& config) {
  const std::size_t id = rule.vocab().id(token);
  const std::size_t ids[] = {id};
  if (id != kUnk) return ulr_embed(rule, uts, qs, ids, config);
  // Unknown to the vocabulary: E^I(UNK) plus the mixture for the raw token.
  auto q = token_distribution(similarity(uts, qs, token), config);
  return ops::add(ops::gather_rows(rule.table(), ids), universal_embedding(uts, q));
}

Tensor ulr_embed(const InterpolationRule& rule, const UniversalTokenSet& uts, const QuerySpace& qs,
                 std::span<const std::size_t> ids, const UlrConfig& config) {
  check_dims(uts, qs);
  if (rule.table().cols() != uts.model_dim()) {
    throw ConfigError("E^I width " + std::to_string(rule.table().cols()) + " != E^U width " +
                      std::to_string(uts.model_dim()));
  }
  std::vector<std::size_t> distinct(ids.begin(), ids.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<const std::string*> tokens;
  std::vector<double> alpha;
  for (auto id : distinct) {
    if (id >= rule.vocab().size()) {
      throw LookupError("ulr_embed: id " + std::to_string(id) + " outside vocabulary of size " +
                        std::to_string(rule.vocab().size()));
    }
    tokens.push_back(&rule.vocab().token(id));
    alpha.push_back(rule.alpha(id));
  }
  const Tensor q = token_distribution(scores_for(uts, query_rows(qs, tokens, uts.key_dim())), config);
  const Tensor mixture = universal_embedding(uts, q);
  const Tensor direct = ops::scale_rows(ops::gather_rows(rule.table(), distinct), alpha);
  const Tensor per_type = ops::add(direct, mixture);
  std::vector<std::size_t> where(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    where[i] = static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), ids[i]) - distinct.begin());
  }
  return ops::gather_rows(per_type, where);
}

}  // namespace unmt
