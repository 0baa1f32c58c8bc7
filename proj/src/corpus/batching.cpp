#include "unmt/corpus/batching.hpp"

#include <algorithm>
#include <numeric>

#include "unmt/corpus/vocab.hpp"
#include "unmt/error.hpp"

namespace unmt {

Batch make_batch(const EncodedCorpus& corpus, std::span<const std::size_t> indices,
                 std::size_t language_index, bool is_low_resource) {
  if (indices.empty()) throw InputError("make_batch: no pairs selected");
  Batch b;
  b.language = corpus.language;
  b.language_index = language_index;
  b.is_low_resource = is_low_resource;
  b.batch_size = indices.size();
  for (auto i : indices) {
    b.source_length = std::max(b.source_length, corpus.source.at(i).size());
    b.target_length = std::max(b.target_length, corpus.target.at(i).size() + 1);
  }
  b.source.assign(b.batch_size * b.source_length, kPad);
  b.target.assign(b.batch_size * b.target_length, kPad);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto& src = corpus.source[indices[r]];
    const auto& tgt = corpus.target[indices[r]];
    if (src.empty() || tgt.empty()) throw InputError("make_batch: empty sentence in " + corpus.language);
    std::copy(src.begin(), src.end(), b.source.begin() + static_cast<long>(r * b.source_length));
    std::copy(tgt.begin(), tgt.end(), b.target.begin() + static_cast<long>(r * b.target_length));
    b.target[r * b.target_length + tgt.size()] = kEos;
    b.source_lengths.push_back(src.size());
    b.target_lengths.push_back(tgt.size() + 1);
    b.pair_indices.push_back(indices[r]);
  }
  return b;
}

BatchStream::BatchStream(std::vector<EncodedCorpus> corpora, std::size_t batch_size,
                         LanguageSchedule schedule, std::uint64_t seed,
                         std::set<std::string> low_resource, std::size_t max_length)
    : corpora_(std::move(corpora)),
      batch_size_(batch_size),
      low_resource_(std::move(low_resource)),
      rng_(seed) {
  if (corpora_.empty()) throw InputError("make_batches: no corpora");
  if (batch_size_ == 0) throw ParameterError("make_batches: batch size must be >= 1");
  std::vector<double> weights;
  bool any = false;
  for (const auto& c : corpora_) {
    if (c.source.size() != c.target.size()) throw InputError("corpus " + c.language + " is misaligned");
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (c.source[i].size() > max_length || c.target[i].size() > max_length) {
        throw InputError("corpus " + c.language + " pair " + std::to_string(i) + " exceeds max length " +
                         std::to_string(max_length));
      }
    }
    const double w = c.size() == 0 ? 0.0 : (schedule == LanguageSchedule::uniform ? 1.0 : double(c.size()));
    any = any || w > 0.0;
    weights.push_back(w);
  }
  if (!any) throw InputError("make_batches: every corpus is empty");
  pick_ = std::discrete_distribution<std::size_t>(weights.begin(), weights.end());
  order_.resize(corpora_.size());
  cursor_.assign(corpora_.size(), 0);
  epochs_.assign(corpora_.size(), 0);
  for (std::size_t l = 0; l < corpora_.size(); ++l) reshuffle(l);
}

void BatchStream::reshuffle(std::size_t lang) {
  auto& o = order_[lang];
  o.resize(corpora_[lang].size());
  std::iota(o.begin(), o.end(), 0);
  std::shuffle(o.begin(), o.end(), rng_);
  cursor_[lang] = 0;
}

Batch BatchStream::next() { return next_for(pick_(rng_)); }

Batch BatchStream::next_for(std::size_t lang) {
  if (lang >= corpora_.size() || corpora_[lang].size() == 0) {
    throw InputError("next_for: language index has no data");
  }
  if (cursor_[lang] >= order_[lang].size()) {
    reshuffle(lang);
    ++epochs_[lang];
  }
  const auto begin = cursor_[lang];
  const auto end = std::min(begin + batch_size_, order_[lang].size());
  cursor_[lang] = end;
  std::span<const std::size_t> idx(order_[lang].data() + begin, end - begin);
  const auto& c = corpora_[lang];
  return make_batch(c, idx, lang, low_resource_.count(c.language) > 0);
}

}  // namespace unmt
