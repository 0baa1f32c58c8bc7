#include "unmt/corpus/bpe.hpp"

#include <fstream>
#include <map>
#include <set>
#include <unordered_set>

#include "unmt/error.hpp"

namespace unmt {

namespace {

using Pair = std::pair<std::string, std::string>;

std::vector<std::string> initial_symbols(const std::string& word) {
  auto chars = utf8_chars(word);
  chars.back() += kEndOfWord;
  return chars;
}

// Merges every left-to-right occurrence of (l, r) in place.
bool merge_pair(std::vector<std::string>& symbols, const std::string& l, const std::string& r) {
  bool changed = false;
  std::vector<std::string> out;
  out.reserve(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i + 1 < symbols.size() && symbols[i] == l && symbols[i + 1] == r) {
      out.push_back(l + r);
      ++i;
      changed = true;
    } else {
      out.push_back(std::move(symbols[i]));
    }
  }
  symbols = std::move(out);
  return changed;
}

std::string pair_key(const std::string& l, const std::string& r) { return l + '\x1f' + r; }

class PairStats {
 public:
  void adjust(const Pair& p, long delta) {
    auto& c = counts_[p];
    if (c > 0) order_.erase({-c, p});
    c += delta;
    if (c > 0) order_.insert({-c, p});
  }
  bool empty() const { return order_.empty(); }
  const std::pair<long, Pair>& best() const { return *order_.begin(); }

 private:
  std::map<Pair, long> counts_;
  std::set<std::pair<long, Pair>> order_;
};

}  // namespace

BpeModel learn_bpe(std::span<const Sentence> corpus, int num_ops, long min_frequency) {
  if (corpus.empty()) throw InputError("learn_bpe: empty corpus");
  if (num_ops < 0) throw ParameterError("learn_bpe: num_ops must be >= 0");
  std::map<std::string, long> word_counts;
  for (const auto& s : corpus) {
    for (const auto& w : s) ++word_counts[w];
  }
  if (word_counts.empty()) throw InputError("learn_bpe: corpus has no words");

  std::vector<std::vector<std::string>> words;
  std::vector<long> freq;
  for (const auto& [w, c] : word_counts) {
    words.push_back(initial_symbols(w));
    freq.push_back(c);
  }

  PairStats stats;
  std::map<Pair, std::unordered_set<std::size_t>> where;
  auto account = [&](std::size_t idx, long sign) {
    const auto& sym = words[idx];
    for (std::size_t i = 0; i + 1 < sym.size(); ++i) {
      Pair p{sym[i], sym[i + 1]};
      stats.adjust(p, sign * freq[idx]);
      if (sign > 0) where[p].insert(idx);
    }
  };
  for (std::size_t i = 0; i < words.size(); ++i) account(i, +1);

  BpeModel model;
  model.num_ops = num_ops;
  while (static_cast<int>(model.merges.size()) < num_ops && !stats.empty()) {
    const auto [neg_count, best] = stats.best();
    if (-neg_count < min_frequency) break;
    model.merges.push_back(best);
    // Copy: account() inserts into `where` while we iterate.
    std::vector<std::size_t> affected(where[best].begin(), where[best].end());
    std::sort(affected.begin(), affected.end());
    for (auto idx : affected) {
      account(idx, -1);
      merge_pair(words[idx], best.first, best.second);
      account(idx, +1);
    }
    where.erase(best);
  }
  return model;
}

BpeApplier::BpeApplier(BpeModel model) : model_(std::move(model)) {
  for (std::size_t i = 0; i < model_.merges.size(); ++i) {
    ranks_.emplace(pair_key(model_.merges[i].first, model_.merges[i].second), static_cast<int>(i));
  }
}

std::vector<std::string> BpeApplier::segment_word(const std::string& word) {
  if (auto it = cache_.find(word); it != cache_.end()) return it->second;
  auto symbols = initial_symbols(word);
  // Lowest-rank pair first; equivalent to replaying the merges in order
  // because a merge only creates pairs whose rank is higher than its own.
  while (symbols.size() > 1) {
    int best_rank = -1;
    std::size_t best_pos = 0;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = ranks_.find(pair_key(symbols[i], symbols[i + 1]));
      if (it != ranks_.end() && (best_rank < 0 || it->second < best_rank)) {
        best_rank = it->second;
        best_pos = i;
      }
    }
    if (best_rank < 0) break;
    const auto l = symbols[best_pos], r = symbols[best_pos + 1];
    merge_pair(symbols, l, r);
  }
  cache_.emplace(word, symbols);
  return symbols;
}

Sentence BpeApplier::apply(const Sentence& words) {
  Sentence out;
  for (const auto& w : words) {
    auto symbols = segment_word(w);
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      auto s = symbols[i];
      if (i + 1 == symbols.size()) {
        s.resize(s.size() - kEndOfWord.size());
      } else {
        s += kContinuation;
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

Sentence detokenize_bpe(const Sentence& subwords) {
  Sentence out;
  std::string current;
  bool open = false;
  for (const auto& s : subwords) {
    const bool cont = s.size() >= kContinuation.size() &&
                      s.compare(s.size() - kContinuation.size(), kContinuation.size(), kContinuation) == 0;
    current += cont ? s.substr(0, s.size() - kContinuation.size()) : s;
    open = cont;
    if (!cont) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (open) out.push_back(std::move(current));
  return out;
}

void save_bpe(const BpeModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "#version: 0.2\n";
  for (const auto& [l, r] : model.merges) out << l << ' ' << r << '\n';
}

BpeModel load_bpe(const std::filesystem::path& path) {
  BpeModel model;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (line.rfind("#version", 0) == 0 || line.empty()) continue;
    auto parts = split_whitespace(line);
    if (parts.size() != 2) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 'left right'");
    }
    model.merges.emplace_back(parts[0], parts[1]);
  }
  model.num_ops = static_cast<int>(model.merges.size());
  return model;
}

}  // namespace unmt
