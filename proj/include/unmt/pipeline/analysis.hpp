#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "unmt/corpus/parallel.hpp"
#include "unmt/nmt/model.hpp"

namespace unmt {

/// Translates up to `limit` monolingual sentences of `mono_language` with
/// the reverse model and pairs each output (as source) with its input (as
/// target). The result is tagged synthetic and carries
/// `synthetic_language`. Refuses (StateError) a model that has never been
/// trained or does not know `mono_language`.
ParallelCorpus backtranslate(const TranslationModel& reverse, const std::vector<Sentence>& monolingual,
                             const std::string& mono_language, const std::string& synthetic_language,
                             std::size_t limit, const DecodeOptions& options = {});

/// Per-token gate probabilities of a MoLE model.
struct GateActivations {
  std::vector<std::string> experts;
  std::vector<std::string> tokens;
  std::vector<std::size_t> sentence;          // sentence index of every row
  std::vector<std::vector<double>> probs;     // one row of K values per token
  std::vector<double> means;                  // per expert, over all rows

  // "token,<expert>..." header, one row per token, then a "mean" row.
  std::string csv() const;
  // Fraction of rows whose largest probability is on `expert`.
  double argmax_rate(std::size_t expert) const;
};

GateActivations export_gate_activations(const TranslationModel& model, const std::vector<Sentence>& sentences,
                                        const std::string& language);

/// Sentences grouped by the fraction of source tokens absent from the
/// parallel training data. Bucket 0 holds fully covered sentences; the
/// others are half-open ranges (lo, hi] over the given edges.
struct OovBucket {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> members;  // indices into the test corpus
  std::string label() const;
};

std::vector<OovBucket> oov_buckets(const ParallelCorpus& test, const std::set<std::string>& training_vocab,
                                   const std::vector<double>& edges = {0.0, 0.25, 0.5, 1.0});

struct OovRow {
  std::string bucket;
  std::size_t sentences = 0;
  double bleu = 0.0;
};

struct OovReport {
  std::vector<OovRow> rows;            // non-empty buckets, in increasing OOV order
  std::vector<std::string> skipped;    // labels of empty buckets
  // BLEU of the fully covered bucket minus BLEU of the highest bucket
  // holding at least min_sentences; smaller buckets are too noisy to score.
  double degradation(std::size_t min_sentences = 10) const;
};

OovReport unknown_token_report(const TranslationModel& model, const ParallelCorpus& test,
                               const std::set<std::string>& training_vocab, const DecodeOptions& options = {},
                               const std::vector<double>& edges = {0.0, 0.25, 0.5, 1.0});

std::set<std::string> source_vocabulary(const std::vector<ParallelCorpus>& corpora, const std::string& language);

}  // namespace unmt
