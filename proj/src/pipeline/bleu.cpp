#include "unmt/pipeline/bleu.hpp"

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "unmt/error.hpp"

namespace unmt {

namespace {

using Gram = std::vector<std::string>;

std::map<Gram, std::size_t> ngrams(const Sentence& s, std::size_t n) {
  std::map<Gram, std::size_t> out;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++out[Gram(s.begin() + i, s.begin() + i + n)];
  return out;
}

void accumulate(const Sentence& h, const Sentence& r, BleuReport& rep) {
  rep.hypothesis_length += h.size();
  rep.reference_length += r.size();
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto hg = ngrams(h, n);
    const auto rg = ngrams(r, n);
    for (const auto& [g, c] : hg) {
      auto it = rg.find(g);
      if (it != rg.end()) rep.matches[n - 1] += std::min(c, it->second);
    }
    rep.totals[n - 1] += h.size() >= n ? h.size() - n + 1 : 0;
  }
}

double brevity(std::size_t c, std::size_t r) {
  if (c == 0) return 0.0;
  return c > r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
}

}  // namespace

BleuReport bleu(std::span<const Sentence> hypotheses, std::span<const Sentence> references) {
  if (hypotheses.size() != references.size()) {
    throw InputError("bleu: " + std::to_string(hypotheses.size()) + " hypotheses for " +
                     std::to_string(references.size()) + " references");
  }
  BleuReport rep;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) accumulate(hypotheses[i], references[i], rep);
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 0; n < 4; ++n) {
    rep.precisions[n] = rep.totals[n] ? static_cast<double>(rep.matches[n]) / static_cast<double>(rep.totals[n]) : 0.0;
    if (rep.precisions[n] == 0.0) zero = true;
    else log_sum += std::log(rep.precisions[n]);
  }
  rep.brevity_penalty = brevity(rep.hypothesis_length, rep.reference_length);
  rep.bleu = zero ? 0.0 : 100.0 * rep.brevity_penalty * std::exp(log_sum / 4.0);
  return rep;
}

double sentence_bleu(const Sentence& hypothesis, const Sentence& reference) {
  BleuReport rep;
  accumulate(hypothesis, reference, rep);
  double log_sum = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    log_sum += std::log((static_cast<double>(rep.matches[n]) + 1.0) / (static_cast<double>(rep.totals[n]) + 1.0));
  }
  return 100.0 * brevity(rep.hypothesis_length, rep.reference_length) * std::exp(log_sum / 4.0);
}

}  // namespace unmt
