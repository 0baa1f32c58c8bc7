#include "unmt/pipeline/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "unmt/error.hpp"
#include "unmt/nmt/train.hpp"
#include "unmt/pipeline/bleu.hpp"

namespace unmt {

ParallelCorpus backtranslate(const TranslationModel& reverse, const std::vector<Sentence>& monolingual,
                             const std::string& mono_language, const std::string& synthetic_language,
                             std::size_t limit, const DecodeOptions& options) {
  if (reverse.steps_trained() == 0)
    throw StateError("back-translation needs a trained reverse model; this one has taken no training steps");
  if (!reverse.has_language(mono_language))
    throw StateError("reverse model does not translate from '" + mono_language + "'");
  ParallelCorpus out{synthetic_language, {}, true};
  const std::size_t n = std::min(limit, monolingual.size());
  for (std::size_t i = 0; i < n; ++i)
    out.pairs.push_back({reverse.translate(monolingual[i], mono_language, options).tokens, monolingual[i]});
  return out;
}

std::string GateActivations::csv() const {
  std::ostringstream out;
  char buf[32];
  out << "token";
  for (const auto& e : experts) out << ',' << e;
  out << '\n';
  auto row = [&](const std::string& label, const std::vector<double>& values) {
    out << label;
    for (double v : values) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) row(tokens[i], probs[i]);
  row("mean", means);
  return out.str();
}

double GateActivations::argmax_rate(std::size_t expert) const {
  if (probs.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& p : probs)
    if (static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin()) == expert) ++hits;
  return static_cast<double>(hits) / static_cast<double>(probs.size());
}

GateActivations export_gate_activations(const TranslationModel& model, const std::vector<Sentence>& sentences,
                                        const std::string& language) {
  const MoleLayer* mole = model.mole();
  if (!mole) throw ConfigError("gate export needs a model with language experts");
  GateActivations g;
  g.experts = mole->languages();
  g.means.assign(g.experts.size(), 0.0);
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    if (sentences[s].empty()) continue;
    const auto ids = model.encode_source(language, sentences[s]);
    const Tensor p = model.gate_probabilities(ids, language);
    for (std::size_t t = 0; t < ids.size(); ++t) {
      std::vector<double> row(p.cols());
      for (std::size_t k = 0; k < row.size(); ++k) {
        row[k] = p.at(t, k);
        g.means[k] += row[k];
      }
      g.tokens.push_back(sentences[s][t]);
      g.sentence.push_back(s);
      g.probs.push_back(std::move(row));
    }
  }
  if (!g.probs.empty())
    for (auto& m : g.means) m /= static_cast<double>(g.probs.size());
  return g;
}

std::string OovBucket::label() const {
  char buf[48];
  if (hi == 0.0) return "0";
  std::snprintf(buf, sizeof buf, "(%g,%g]", lo, hi);
  return buf;
}

std::vector<OovBucket> oov_buckets(const ParallelCorpus& test, const std::set<std::string>& training_vocab,
                                   const std::vector<double>& edges) {
  if (edges.size() < 2 || edges.front() != 0.0 || edges.back() < 1.0 || !std::is_sorted(edges.begin(), edges.end()))
    throw ParameterError("OOV bucket edges must rise from 0 to at least 1");
  std::vector<OovBucket> buckets;
  buckets.push_back({0.0, 0.0, {}});
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) buckets.push_back({edges[i], edges[i + 1], {}});
  for (std::size_t i = 0; i < test.pairs.size(); ++i) {
    const auto& src = test.pairs[i].source;
    std::size_t unseen = 0;
    for (const auto& t : src) unseen += training_vocab.count(t) == 0;
    const double rate = src.empty() ? 0.0 : static_cast<double>(unseen) / static_cast<double>(src.size());
    if (unseen == 0) {
      buckets[0].members.push_back(i);
      continue;
    }
    for (std::size_t b = 1; b < buckets.size(); ++b) {
      if (rate <= buckets[b].hi) {
        buckets[b].members.push_back(i);
        break;
      }
    }
  }
  return buckets;
}

double OovReport::degradation(std::size_t min_sentences) const {
  if (rows.empty() || rows.front().bucket != "0") throw StateError("no fully covered sentences to compare against");
  for (auto it = rows.rbegin(); it + 1 != rows.rend(); ++it)
    if (it->sentences >= min_sentences) return rows.front().bleu - it->bleu;
  throw StateError("no OOV bucket holds " + std::to_string(min_sentences) + " sentences");
}

OovReport unknown_token_report(const TranslationModel& model, const ParallelCorpus& test,
                               const std::set<std::string>& training_vocab, const DecodeOptions& options,
                               const std::vector<double>& edges) {
  OovReport report;
  for (const auto& b : oov_buckets(test, training_vocab, edges)) {
    if (b.members.empty()) {
      report.skipped.push_back(b.label());
      continue;
    }
    ParallelCorpus subset{test.language, {}, test.synthetic};
    for (auto i : b.members) subset.pairs.push_back(test.pairs[i]);
    report.rows.push_back({b.label(), b.members.size(), corpus_bleu(model, subset, options)});
  }
  return report;
}

std::set<std::string> source_vocabulary(const std::vector<ParallelCorpus>& corpora, const std::string& language) {
  std::set<std::string> out;
  for (const auto& c : corpora) {
    if (c.language != language || c.synthetic) continue;
    for (const auto& p : c.pairs) out.insert(p.source.begin(), p.source.end());
  }
  return out;
}

}  // namespace unmt
