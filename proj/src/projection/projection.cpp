#include "unmt/projection/projection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

#include "unmt/error.hpp"
#include "unmt/tensor/linalg.hpp"

namespace unmt {

SeedDictionary extract_seeds(std::span<const TokenPair> aligned, long min_count, std::size_t max_seeds,
                             const std::string& language) {
  if (aligned.empty()) throw InputError("extract_seeds: empty alignment stream");
  std::map<std::string, std::map<std::string, long>> counts;
  for (const auto& [s, t] : aligned) ++counts[s][t];
  std::vector<SeedPair> best;
  for (const auto& [s, targets] : counts) {
    // std::map iterates targets lexicographically, so the first maximum wins ties.
    const std::string* arg = nullptr;
    long top = 0;
    for (const auto& [t, c] : targets) {
      if (c > top) {
        top = c;
        arg = &t;
      }
    }
    if (top >= min_count) best.push_back({s, *arg, top});
  }
  if (best.empty()) {
    throw InputError("extract_seeds: no pair reaches min_count " + std::to_string(min_count));
  }
  std::stable_sort(best.begin(), best.end(), [](const SeedPair& a, const SeedPair& b) { return a.count > b.count; });
  if (best.size() > max_seeds) best.resize(max_seeds);
  return {language, std::move(best)};
}

std::vector<TokenPair> cooccurrence_alignments(std::span<const SentencePair> pairs, double min_dice) {
  std::unordered_map<std::string, long> src_df, tgt_df;
  std::map<TokenPair, long> joint;
  for (const auto& p : pairs) {
    std::set<std::string> s(p.source.begin(), p.source.end());
    std::set<std::string> t(p.target.begin(), p.target.end());
    for (const auto& a : s) ++src_df[a];
    for (const auto& b : t) ++tgt_df[b];
    for (const auto& a : s)
      for (const auto& b : t) ++joint[{a, b}];
  }
  auto dice = [&](const std::string& a, const std::string& b) {
    auto it = joint.find({a, b});
    if (it == joint.end()) return 0.0;
    return 2.0 * static_cast<double>(it->second) / static_cast<double>(src_df[a] + tgt_df[b]);
  };
  std::vector<TokenPair> out;
  for (const auto& p : pairs) {
    std::set<std::string> t(p.target.begin(), p.target.end());
    for (const auto& a : p.source) {
      double best = -1.0;
      const std::string* arg = nullptr;
      for (const auto& b : t) {
        const double d = dice(a, b);
        if (d > best) {
          best = d;
          arg = &b;
        }
      }
      if (arg && best >= min_dice) out.emplace_back(a, *arg);
    }
  }
  return out;
}

void save_seeds(const SeedDictionary& seeds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  for (const auto& e : seeds.entries) out << e.source << '\t' << e.target << '\t' << e.count << '\n';
}

SeedDictionary load_seeds(const std::filesystem::path& path, const std::string& language) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  SeedDictionary d{language, {}};
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto a = line.find('\t');
    const auto b = a == std::string::npos ? a : line.find('\t', a + 1);
    if (b == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(n) + ": expected source<TAB>universal<TAB>count");
    }
    try {
      d.entries.push_back({line.substr(0, a), line.substr(a + 1, b - a - 1), std::stol(line.substr(b + 1))});
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(n) + ": bad count");
    }
  }
  return d;
}

SeedDictionary filter_seeds(const SeedDictionary& seeds, const EmbeddingTable& queries,
                            const EmbeddingTable& keys) {
  SeedDictionary out{seeds.language, {}};
  for (const auto& e : seeds.entries) {
    if (queries.contains(e.source) && keys.contains(e.target)) out.entries.push_back(e);
  }
  return out;
}

namespace {

std::pair<Tensor, Tensor> stack_seeds(const EmbeddingTable& queries, const EmbeddingTable& keys,
                                      const SeedDictionary& seeds) {
  if (queries.dim() != keys.dim()) {
    throw DimensionError("procrustes: query dim " + std::to_string(queries.dim()) + " != key dim " +
                         std::to_string(keys.dim()));
  }
  const std::size_t d = queries.dim(), n = seeds.entries.size();
  std::vector<double> x(n * d), y(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = seeds.entries[i];
    auto qi = queries.index(e.source);
    if (!qi) throw LookupError("procrustes: seed source token '" + e.source + "' has no query vector");
    auto ki = keys.index(e.target);
    if (!ki) throw LookupError("procrustes: seed universal token '" + e.target + "' has no key vector");
    std::copy_n(queries.row(*qi).begin(), d, x.begin() + i * d);
    std::copy_n(keys.row(*ki).begin(), d, y.begin() + i * d);
  }
  return {Tensor({n, d}, std::move(x)), Tensor({n, d}, std::move(y))};
}

}  // namespace

OrthogonalMap solve_procrustes(const EmbeddingTable& queries, const EmbeddingTable& keys,
                               const SeedDictionary& seeds) {
  if (seeds.entries.size() < kMinSeeds) {
    throw InputError("procrustes: need at least " + std::to_string(kMinSeeds) + " seeds, got " +
                     std::to_string(seeds.entries.size()));
  }
  auto [x, y] = stack_seeds(queries, keys, seeds);
  const std::size_t d = queries.dim(), n = x.rows();
  OrthogonalMap map;
  map.language = seeds.language;
  if (!queries.normalized() || !keys.normalized()) map.warnings.push_back("tables are not normalized");
  if (n < kFewSeedsWarning) map.warnings.push_back("only " + std::to_string(n) + " seeds");

  std::vector<double> xty(d * d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < d; ++i) {
      const double xi = x.at(r, i);
      for (std::size_t j = 0; j < d; ++j) xty[i * d + j] += xi * y.at(r, j);
    }
  auto dec = svd(Tensor({d, d}, std::move(xty)));
  if (dec.s.front() == 0.0 || dec.s.back() < 1e-10 * dec.s.front()) {
    map.warnings.push_back("X^T Y is rank deficient; the map is not unique");
  }
  std::vector<double> o(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k < d; ++k) {
      const double u = dec.u.at(i, k);
      for (std::size_t j = 0; j < d; ++j) o[i * d + j] += u * dec.vt.at(k, j);
    }
  map.matrix = Tensor({d, d}, std::move(o));
  return map;
}

double procrustes_objective(const EmbeddingTable& queries, const EmbeddingTable& keys,
                            const SeedDictionary& seeds, const Tensor& map) {
  auto [x, y] = stack_seeds(queries, keys, seeds);
  const std::size_t d = queries.dim();
  double total = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t j = 0; j < d; ++j) {
      double xo = 0.0;
      for (std::size_t i = 0; i < d; ++i) xo += x.at(r, i) * map.at(i, j);
      total += xo * y.at(r, j);
    }
  return total;
}

EmbeddingTable project(const EmbeddingTable& table, const OrthogonalMap& map) {
  const std::size_t d = table.dim();
  if (map.matrix.rows() != d || map.matrix.cols() != d) {
    throw DimensionError("project: table dim " + std::to_string(d) + " but map is " +
                         shape_string(map.matrix.shape()));
  }
  std::vector<double> out(table.size() * d, 0.0);
  for (std::size_t r = 0; r < table.size(); ++r) {
    auto row = table.row(r);
    for (std::size_t i = 0; i < d; ++i) {
      const double v = row[i];
      for (std::size_t j = 0; j < d; ++j) out[r * d + j] += v * map.matrix.at(i, j);
    }
  }
  EmbeddingTable projected(table.language(), table.tokens(), d, std::move(out));
  // An orthogonal map preserves norms, so a normalized table stays normalized.
  return table.normalized() ? normalize_rows(std::move(projected)) : projected;
}

void save_map(const OrthogonalMap& map, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  const std::size_t d = map.dim();
  out << d << '\n';
  char buf[64];
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof buf, "%a", map.matrix.at(i, j));
      out << (j ? " " : "") << buf;
    }
    out << '\n';
  }
}

OrthogonalMap load_map(const std::filesystem::path& path, const std::string& language) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ":1: missing dimension");
  std::size_t d = 0;
  try {
    d = std::stoul(line);
  } catch (const std::exception&) {
    throw FormatError(path.string() + ":1: bad dimension '" + line + "'");
  }
  std::vector<double> v;
  for (std::size_t i = 0; i < d; ++i) {
    if (!std::getline(in, line)) throw FormatError(path.string() + ": expected " + std::to_string(d) + " rows");
    auto parts = split_whitespace(line);
    if (parts.size() != d) throw FormatError(path.string() + ":" + std::to_string(i + 2) + ": wrong row width");
    for (const auto& p : parts) v.push_back(std::strtod(p.c_str(), nullptr));
  }
  return {language, Tensor({d, d}, std::move(v)), {}};
}

double orthogonality_residual(const Tensor& o) {
  const std::size_t d = o.rows();
  double worst = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < o.rows(); ++k) s += o.at(k, i) * o.at(k, j);
      worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
    }
  return worst;
}

}  // namespace unmt
