#pragma once

#include <array>
#include <cstddef>
#include <span>

#include "unmt/corpus/text.hpp"

namespace unmt {

struct BleuReport {
  double bleu = 0.0;                   // 0..100
  std::array<double, 4> precisions{};  // clipped n-gram precisions, 0..1
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  double brevity_penalty = 0.0;
  std::size_t hypothesis_length = 0;
  std::size_t reference_length = 0;
};

/// Corpus BLEU-4, single reference, unsmoothed. Throws InputError when the
/// line counts differ.
BleuReport bleu(std::span<const Sentence> hypotheses, std::span<const Sentence> references);

// Sentence BLEU-4 with add-one smoothing on every precision.
double sentence_bleu(const Sentence& hypothesis, const Sentence& reference);

}  // namespace unmt
