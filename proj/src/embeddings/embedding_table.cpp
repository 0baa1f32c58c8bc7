#include "unmt/embeddings/embedding_table.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "unmt/error.hpp"

namespace unmt {

EmbeddingTable::EmbeddingTable(std::string language, std::vector<std::string> tokens, std::size_t dim,
                               std::vector<double> values)
    : language_(std::move(language)), tokens_(std::move(tokens)), dim_(dim), values_(std::move(values)) {
  if (values_.size() != tokens_.size() * dim_) {
    throw FormatError("embedding table: " + std::to_string(tokens_.size()) + " tokens x dim " +
                      std::to_string(dim_) + " != " + std::to_string(values_.size()) + " values");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second) {
      throw FormatError("embedding table: duplicate token '" + tokens_[i] + "'");
    }
  }
}

EmbeddingTable EmbeddingTable::restore_normalized(std::string language, std::vector<std::string> tokens,
                                                  std::size_t dim, std::vector<double> values) {
  EmbeddingTable t(std::move(language), std::move(tokens), dim, std::move(values));
  for (std::size_t i = 0; i < t.size(); ++i) {
    double sq = 0.0;
    for (double v : t.row(i)) sq += v * v;
    if (sq == 0.0) {
      t.zero_rows_.push_back(i);
    } else if (std::abs(std::sqrt(sq) - 1.0) > 1e-10) {
      throw FormatError("row '" + t.tokens_[i] + "' of a normalized table has norm " + std::to_string(std::sqrt(sq)));
    }
  }
  t.normalized_ = true;
  return t;
}

std::optional<std::size_t> EmbeddingTable::index(const std::string& token) const {
  if (auto it = index_.find(token); it != index_.end()) return it->second;
  return std::nullopt;
}

Tensor EmbeddingTable::as_tensor() const { return Tensor({size(), dim_}, values_); }

EmbeddingTable load_vectors(const std::filesystem::path& path, std::optional<std::size_t> expected_dim,
                            const std::string& language) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  auto where = [&](std::size_t line) { return path.string() + ":" + std::to_string(line) + ": "; };
  std::string line;
  if (!std::getline(in, line)) throw FormatError(where(1) + "missing '<count> <dim>' header");
  auto header = split_whitespace(line);
  std::size_t count = 0, dim = 0;
  try {
    if (header.size() != 2) throw std::invalid_argument("header");
    count = std::stoul(header[0]);
    dim = std::stoul(header[1]);
  } catch (const std::exception&) {
    throw FormatError(where(1) + "malformed header '" + line + "'");
  }
  if (dim == 0) throw FormatError(where(1) + "dimension must be positive");
  if (expected_dim && *expected_dim != dim) {
    throw FormatError(where(1) + "dimension " + std::to_string(dim) + " but expected " +
                      std::to_string(*expected_dim));
  }
  std::vector<std::string> tokens;
  std::vector<double> values;
  tokens.reserve(count);
  values.reserve(count * dim);
  std::size_t line_no = 1;
  while (tokens.size() < count) {
    if (!std::getline(in, line)) {
      throw FormatError(where(line_no + 1) + "end of file after " + std::to_string(tokens.size()) +
                        " of " + std::to_string(count) + " vectors");
    }
    ++line_no;
    auto parts = split_whitespace(line);
    if (parts.size() != dim + 1) {
      throw FormatError(where(line_no) + "expected token and " + std::to_string(dim) + " values, got " +
                        std::to_string(parts.empty() ? 0 : parts.size() - 1));
    }
    for (std::size_t k = 1; k < parts.size(); ++k) {
      char* end = nullptr;
      const double v = std::strtod(parts[k].c_str(), &end);
      if (end == parts[k].c_str() || *end != '\0') {
        throw FormatError(where(line_no) + "bad number '" + parts[k] + "'");
      }
      values.push_back(v);
    }
    tokens.push_back(parts[0]);
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!split_whitespace(line).empty()) {
      throw FormatError(where(line_no) + "more vectors than the declared " + std::to_string(count));
    }
  }
  try {
    return EmbeddingTable(language, std::move(tokens), dim, std::move(values));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_vectors(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << table.size() << ' ' << table.dim() << '\n';
  char buf[64];
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.tokens()[i];
    for (double v : table.row(i)) {
      std::snprintf(buf, sizeof buf, " %.6f", v);
      out << buf;
    }
    out << '\n';
  }
}

EmbeddingTable normalize_rows(EmbeddingTable table) {
  table.zero_rows_.clear();
  for (std::size_t i = 0; i < table.size(); ++i) {
    auto r = table.row_mut(i);
    double sq = 0.0;
    for (double v : r) sq += v * v;
    if (sq == 0.0) {
      table.zero_rows_.push_back(i);
      continue;
    }
    const double norm = std::sqrt(sq);
    for (double& v : r) v /= norm;
  }
  table.normalized_ = true;
  return table;
}

std::vector<Neighbor> nearest_neighbors(const EmbeddingTable& table, std::span<const double> query,
                                        std::size_t k) {
  if (!table.normalized()) throw StateError("nearest_neighbors: table is not normalized");
  if (query.size() != table.dim()) throw DimensionError("nearest_neighbors: query dimension mismatch");
  double qn = 0.0;
  for (double v : query) qn += v * v;
  qn = std::sqrt(qn);
  std::vector<double> cos(table.size(), 0.0);
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (qn == 0.0) break;
    double d = 0.0;
    auto r = table.row(i);
    for (std::size_t j = 0; j < query.size(); ++j) d += r[j] * query[j];
    cos[i] = d / qn;
  }
  std::vector<std::size_t> order(table.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return cos[a] > cos[b]; });
  order.resize(std::min(k, order.size()));
  std::vector<Neighbor> out;
  for (auto i : order) out.push_back({table.tokens()[i], cos[i]});
  return out;
}

}  // namespace unmt
