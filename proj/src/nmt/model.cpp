#include "unmt/nmt/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <tuple>

#include "unmt/error.hpp"
#include "unmt/tensor/ops.hpp"

namespace unmt {

namespace {

Tensor uniform(Shape shape, std::mt19937_64& rng, double range) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::uniform_real_distribution<double> dist(-range, range);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

LstmWeights make_lstm(std::size_t in, std::size_t h, std::mt19937_64& rng, double range) {
  return {uniform({in, 4 * h}, rng, range), uniform({h, 4 * h}, rng, range), uniform({4 * h}, rng, range)};
}

std::pair<Tensor, Tensor> lstm_step(const LstmWeights& w, const Tensor& input_proj, const Tensor& h,
                                    const Tensor& c) {
  auto gates = ops::add_bias(ops::add(input_proj, ops::matmul(h, w.u)), w.b);
  auto c_new = ops::lstm_cell(gates, c);
  return {ops::lstm_output(gates, c_new), c_new};
}

Tensor maybe_dropout(const Tensor& x, double rate, std::mt19937_64* rng) {
  return rng ? ops::dropout(x, rate, *rng) : x;
}

}  // namespace

TranslationModel TranslationModel::make_lookup(const ModelConfig& config, Vocabulary marked_source_vocab,
                                               Vocabulary target_vocab, std::vector<std::string> source_languages,
                                               std::vector<std::string> expert_languages) {
  config.validate();
  if (source_languages.empty()) throw ConfigError("model needs at least one source language");
  TranslationModel m;
  m.config_ = config;
  m.mode_ = SourceMode::lookup;
  m.languages_ = std::move(source_languages);
  m.target_vocab_ = std::move(target_vocab);
  m.lookup_vocab_ = std::move(marked_source_vocab);
  std::mt19937_64 rng(config.seed);
  m.lookup_table_ = uniform({m.lookup_vocab_.size(), config.embed_dim}, rng, config.init_range);
  m.init_common(rng, expert_languages);
  return m;
}

TranslationModel TranslationModel::make_ulr(const ModelConfig& config, EmbeddingTable universal_keys,
                                            std::vector<UlrLanguage> languages, Vocabulary target_vocab,
                                            std::vector<std::string> expert_languages) {
  config.validate();
  if (languages.empty()) throw ConfigError("model needs at least one source language");
  TranslationModel m;
  m.config_ = config;
  m.mode_ = SourceMode::ulr;
  m.target_vocab_ = std::move(target_vocab);
  std::mt19937_64 rng(config.seed);
  m.uts_ = UniversalTokenSet(std::move(universal_keys), config.embed_dim, rng, config.init_range);
  for (auto& l : languages) {
    if (m.ulr_.contains(l.language)) throw ConfigError("duplicate source language '" + l.language + "'");
    m.languages_.push_back(l.language);
    InterpolationRule rule(std::move(l.vocab), l.queries, config.ulr.top_frequent_k, config.embed_dim, rng,
                           config.init_range);
    m.ulr_.emplace(l.language, UlrSide{std::move(l.queries), std::move(rule)});
  }
  m.init_common(rng, expert_languages);
  return m;
}

void TranslationModel::init_common(std::mt19937_64& rng, const std::vector<std::string>& expert_languages) {
  const auto e = config_.embed_dim, h = config_.hidden_dim, a = config_.attention_dim;
  const double r = config_.init_range;
  enc_fwd_ = make_lstm(e, h, rng, r);
  enc_bwd_ = make_lstm(e, h, rng, r);
  init_w1_ = uniform({h, h}, rng, r);
  init_b1_ = uniform({h}, rng, r);
  init_w2_ = uniform({h, h}, rng, r);
  init_b2_ = uniform({h}, rng, r);
  if (config_.attention == AttentionKind::additive) {
    att_keys_ = uniform({2 * h, a}, rng, r);
    att_query_ = uniform({h, a}, rng, r);
    att_v_ = uniform({a}, rng, r);
  } else {
    att_keys_ = uniform({2 * h, h}, rng, r);
  }
  dec1_ = make_lstm(e + h, h, rng, r);
  dec2_ = make_lstm(h + 2 * h, h, rng, r);
  tgt_embed_ = uniform({target_vocab_.size(), e}, rng, r);
  combine_w_ = uniform({h + 2 * h, h}, rng, r);
  out_w_ = uniform({h, target_vocab_.size()}, rng, r);
  out_b_ = uniform({target_vocab_.size()}, rng, r);
  if (config_.use_mole) {
    if (expert_languages.empty()) throw ConfigError("use_mole needs at least one expert language");
    const std::size_t d = 2 * h;
    mole_.emplace(expert_languages, d, config_.expert_hidden_dim ? config_.expert_hidden_dim : d, rng, r,
                  config_.gate_loss_weight);
  }
}

bool TranslationModel::has_language(const std::string& language) const {
  return std::find(languages_.begin(), languages_.end(), language) != languages_.end();
}

const Vocabulary& TranslationModel::source_vocab(const std::string& language) const {
  if (mode_ == SourceMode::lookup) return lookup_vocab_;
  return rule(language)->vocab();
}

const QuerySpace* TranslationModel::query_space(const std::string& language) const {
  auto it = ulr_.find(language);
  return it == ulr_.end() ? nullptr : &it->second.queries;
}

const InterpolationRule* TranslationModel::rule(const std::string& language) const {
  auto it = ulr_.find(language);
  if (it == ulr_.end()) throw LookupError("model has no source language '" + language + "'");
  return &it->second.rule;
}

std::vector<std::size_t> TranslationModel::encode_source(const std::string& language, const Sentence& s) const {
  if (!has_language(language)) throw LookupError("model has no source language '" + language + "'");
  if (mode_ == SourceMode::lookup) return lookup_vocab_.encode(mark_sentence(s, language));
  return rule(language)->vocab().encode(s);
}

std::vector<std::size_t> TranslationModel::encode_target(const Sentence& s) const { return target_vocab_.encode(s); }

EncodedCorpus TranslationModel::encode_corpus(const ParallelCorpus& corpus) const {
  EncodedCorpus out{corpus.language, {}, {}};
  for (const auto& p : corpus.pairs) {
    out.source.push_back(encode_source(corpus.language, p.source));
    out.target.push_back(encode_target(p.target));
  }
  return out;
}

ParameterSet TranslationModel::parameters() const {
  ParameterSet p;
  if (mode_ == SourceMode::lookup) {
    p.push_back({"source.lookup", lookup_table_});
  } else {
    p.push_back({kUniversalEmbeddingName, uts_.universal()});
    p.push_back({kTransformName, uts_.transform()});
    for (const auto& [lang, side] : ulr_) p.push_back({"ulr.interp." + lang, side.rule.table()});
  }
  auto lstm = [&](const std::string& name, const LstmWeights& w) {
    p.push_back({name + ".w", w.w});
    p.push_back({name + ".u", w.u});
    p.push_back({name + ".b", w.b});
  };
  lstm("encoder.forward", enc_fwd_);
  lstm("encoder.backward", enc_bwd_);
  p.push_back({"decoder.init1.w", init_w1_});
  p.push_back({"decoder.init1.b", init_b1_});
  p.push_back({"decoder.init2.w", init_w2_});
  p.push_back({"decoder.init2.b", init_b2_});
  p.push_back({"attention.keys", att_keys_});
  if (config_.attention == AttentionKind::additive) {
    p.push_back({"attention.query", att_query_});
    p.push_back({"attention.v", att_v_});
  }
  lstm("decoder.layer1", dec1_);
  lstm("decoder.layer2", dec2_);
  p.push_back({"target.embed", tgt_embed_});
  p.push_back({"decoder.combine", combine_w_});
  p.push_back({"output.w", out_w_});
  p.push_back({"output.b", out_b_});
  if (mole_) {
    for (auto& q : mole_->parameters()) p.push_back(q);
  }
  return p;
}

std::vector<unsigned char> TranslationModel::trainable_mask(const ParameterSet& params) const {
  std::vector<unsigned char> mask(params.size(), 1);
  if (mode_ == SourceMode::ulr && !config_.train_transform) {
    for (std::size_t i = 0; i < params.size(); ++i)
      if (params[i].tensor.same_storage(uts_.transform())) mask[i] = 0;
  }
  return mask;
}

Tensor TranslationModel::embed_source(const std::string& language, std::span<const std::size_t> ids) const {
  if (mode_ == SourceMode::lookup) {
    if (!has_language(language)) throw LookupError("model has no source language '" + language + "'");
    return ops::gather_rows(lookup_table_, ids);
  }
  auto it = ulr_.find(language);
  if (it == ulr_.end()) throw LookupError("model has no source language '" + language + "'");
  return ulr_embed(it->second.rule, uts_, it->second.queries, ids, config_.ulr);
}

EncoderOutput TranslationModel::encode_batch(const Batch& batch, std::mt19937_64* dropout_rng) const {
  const std::size_t B = batch.batch_size, T = batch.source_length, H = config_.hidden_dim;
  if (B == 0 || T == 0) throw InputError("encode: empty batch");
  std::vector<std::size_t> ids(T * B);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t b = 0; b < B; ++b) ids[t * B + b] = batch.source_at(b, t);

  Tensor emb = maybe_dropout(embed_source(batch.language, ids), config_.dropout, dropout_rng);
  const Tensor xf = ops::matmul(emb, enc_fwd_.w);
  const Tensor xb = ops::matmul(emb, enc_bwd_.w);

  std::vector<std::vector<unsigned char>> live(T, std::vector<unsigned char>(B));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t b = 0; b < B; ++b) live[t][b] = t < batch.source_lengths[b];

  std::vector<Tensor> fwd(T), bwd(T);
  Tensor h = Tensor::zeros({B, H}), c = Tensor::zeros({B, H});
  for (std::size_t t = 0; t < T; ++t) {
    auto [hn, cn] = lstm_step(enc_fwd_, ops::slice_rows(xf, t * B, B), h, c);
    h = ops::select_rows(hn, h, live[t]);
    c = ops::select_rows(cn, c, live[t]);
    fwd[t] = h;
  }
  // Padded positions keep the zero state, so each row starts at its last real token.
  h = Tensor::zeros({B, H});
  c = Tensor::zeros({B, H});
  for (std::size_t t = T; t-- > 0;) {
    auto [hn, cn] = lstm_step(enc_bwd_, ops::slice_rows(xb, t * B, B), h, c);
    h = ops::select_rows(hn, h, live[t]);
    c = ops::select_rows(cn, c, live[t]);
    bwd[t] = h;
  }

  std::vector<Tensor> steps(T);
  for (std::size_t t = 0; t < T; ++t) {
    const Tensor both[] = {fwd[t], bwd[t]};
    steps[t] = ops::concat_cols(both);
  }
  EncoderOutput out;
  out.batch = B;
  out.steps = T;
  out.memory = ops::concat_rows(steps);
  out.final_backward = bwd[0];
  out.keep.resize(B * T);
  out.position_weights.resize(T * B);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t) {
      out.keep[b * T + t] = live[t][b];
      out.position_weights[t * B + b] = live[t][b];
    }
  if (mole_) {
    auto m = mole_forward(*mole_, out.memory);
    out.memory = m.hidden;
    out.gate_logits = m.gate_logits;
    out.gate_probs = m.gate_probs;
  }
  out.keys = ops::matmul(out.memory, att_keys_);
  return out;
}

TranslationModel::DecoderState TranslationModel::initial_state(const EncoderOutput& enc) const {
  const std::size_t B = enc.batch, H = config_.hidden_dim;
  DecoderState s;
  s.h1 = ops::tanh(ops::add_bias(ops::matmul(enc.final_backward, init_w1_), init_b1_));
  s.h2 = ops::tanh(ops::add_bias(ops::matmul(enc.final_backward, init_w2_), init_b2_));
  s.c1 = Tensor::zeros({B, H});
  s.c2 = Tensor::zeros({B, H});
  s.feed = Tensor::zeros({B, H});
  return s;
}

Tensor TranslationModel::decoder_step(const EncoderOutput& enc, std::span<const std::size_t> prev,
                                      DecoderState& s, std::mt19937_64* rng, Tensor* attention) const {
  const double p = config_.dropout;
  Tensor y = maybe_dropout(ops::gather_rows(tgt_embed_, prev), p, rng);
  const Tensor in1[] = {y, s.feed};
  std::tie(s.h1, s.c1) = lstm_step(dec1_, ops::matmul(ops::concat_cols(in1), dec1_.w), s.h1, s.c1);

  Tensor scores = config_.attention == AttentionKind::additive
                      ? ops::additive_scores(enc.keys, ops::matmul(s.h1, att_query_), att_v_)
                      : ops::dot_scores(enc.keys, s.h1);
  Tensor weights = ops::masked_softmax_rows(scores, enc.keep);
  Tensor context = ops::attend(weights, enc.memory);
  if (attention) *attention = weights;

  const Tensor in2[] = {maybe_dropout(s.h1, p, rng), context};
  std::tie(s.h2, s.c2) = lstm_step(dec2_, ops::matmul(ops::concat_cols(in2), dec2_.w), s.h2, s.c2);
  const Tensor comb[] = {s.h2, context};
  s.feed = ops::tanh(ops::matmul(ops::concat_cols(comb), combine_w_));
  return ops::add_bias(ops::matmul(maybe_dropout(s.feed, p, rng), out_w_), out_b_);
}

LossTerms TranslationModel::loss(const Batch& batch, std::mt19937_64* rng,
                                 std::optional<std::size_t> gate_expert) const {
  const auto enc = encode_batch(batch, rng);
  const std::size_t B = batch.batch_size, T = batch.target_length;
  auto state = initial_state(enc);
  std::vector<Tensor> logits(T);
  std::vector<std::size_t> prev(B, kBos);
  std::vector<std::size_t> targets(T * B);
  std::vector<double> weights(T * B, 0.0);
  std::size_t count = 0;
  for (std::size_t t = 0; t < T; ++t) {
    logits[t] = decoder_step(enc, prev, state, rng, nullptr);
    for (std::size_t b = 0; b < B; ++b) {
      targets[t * B + b] = batch.target_at(b, t);
      if (t < batch.target_lengths[b]) {
        weights[t * B + b] = 1.0;
        ++count;
      }
      prev[b] = batch.target_at(b, t);
    }
  }
  if (count == 0) throw InputError("loss: batch has no target tokens");
  for (auto& w : weights) w /= static_cast<double>(count);
  LossTerms out;
  Tensor nll = ops::cross_entropy(ops::concat_rows(logits), targets, weights);
  out.nll = nll.item();
  out.total = nll;
  out.target_tokens = count;
  if (mole_ && enc.gate_probs.defined()) {
    const std::size_t k = mole_->num_experts();
    std::size_t hit = 0, real = 0;
    for (std::size_t r = 0; r < enc.position_weights.size(); ++r) {
      if (enc.position_weights[r] == 0.0) continue;
      ++real;
      if (gate_expert && argmax(enc.gate_probs.data().subspan(r * k, k)) == *gate_expert) ++hit;
    }
    out.gate_accuracy = real ? static_cast<double>(hit) / static_cast<double>(real) : 0.0;
    if (gate_expert) {
      Tensor g = gate_loss(enc.gate_logits, *gate_expert, enc.position_weights);
      out.gate = g.item();
      out.total = ops::add(nll, ops::scale(g, mole_->gate_loss_weight()));
    }
  }
  return out;
}

std::size_t TranslationModel::argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i)
    if (row[i] > row[best]) best = i;
  return best;
}

EncoderOutput TranslationModel::encode_single(std::span<const std::size_t> ids, const std::string& language) const {
  if (ids.empty()) throw InputError("cannot encode an empty source sentence");
  Batch b;
  b.language = language;
  b.batch_size = 1;
  b.source_length = ids.size();
  b.source.assign(ids.begin(), ids.end());
  b.source_lengths = {ids.size()};
  return encode_batch(b, nullptr);
}

Tensor TranslationModel::encode(std::span<const std::size_t> ids, const std::string& language) const {
  return encode_single(ids, language).memory;
}

Tensor TranslationModel::gate_probabilities(std::span<const std::size_t> ids, const std::string& language) const {
  if (!mole_) throw ConfigError("model has no language-expert layer");
  NoGradScope no_grad;
  return encode_single(ids, language).gate_probs;
}

EncoderOutput TranslationModel::replicate(const EncoderOutput& enc, std::size_t k) {
  if (k == 1) return enc;
  EncoderOutput r;
  r.batch = k;
  r.steps = enc.steps;
  std::vector<std::size_t> rows(enc.steps * k);
  for (std::size_t t = 0; t < enc.steps; ++t)
    for (std::size_t j = 0; j < k; ++j) rows[t * k + j] = t;
  r.memory = ops::gather_rows(enc.memory, rows);
  r.keys = ops::gather_rows(enc.keys, rows);
  std::vector<std::size_t> zero(k, 0);
  r.final_backward = ops::gather_rows(enc.final_backward, zero);
  for (std::size_t j = 0; j < k; ++j) r.keep.insert(r.keep.end(), enc.keep.begin(), enc.keep.end());
  return r;
}

Translation TranslationModel::translate(const Sentence& source, const std::string& language,
                                        const DecodeOptions& options) const {
  if (source.empty()) throw InputError("translate: empty source sentence");
  return translate_ids(encode_source(language, source), language, options);
}

Translation TranslationModel::translate_ids(std::span<const std::size_t> ids, const std::string& language,
                                            const DecodeOptions& options) const {
  if (ids.empty()) throw InputError("translate: empty source sentence");
  if (options.beam == 0) throw ParameterError("translate: beam width must be >= 1");
  NoGradScope no_grad;
  const auto enc1 = encode_single(ids, language);
  const std::size_t V = target_vocab_.size(), k = options.beam;

  struct Hyp {
    std::vector<std::size_t> ids;
    std::vector<std::vector<double>> attention;
    double log_prob = 0.0;
    std::size_t parent = 0;
  };
  auto log_softmax = [](std::span<const double> row) {
    const double m = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - m);
    const double lz = m + std::log(z);
    std::vector<double> out(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) out[i] = row[i] - lz;
    return out;
  };

  std::vector<Hyp> alive(1);
  std::vector<Hyp> finished;
  auto enc = enc1;
  DecoderState state = initial_state(enc);
  for (std::size_t step = 0; step < options.max_length && !alive.empty(); ++step) {
    const std::size_t n = alive.size();
    if (enc.batch != n) enc = replicate(enc1, n);
    std::vector<std::size_t> prev(n);
    for (std::size_t i = 0; i < n; ++i) prev[i] = alive[i].ids.empty() ? kBos : alive[i].ids.back();
    Tensor attn;
    Tensor logits = decoder_step(enc, prev, state, nullptr, &attn);

    // Candidates ordered by score, ties by (hypothesis, token) so width 1 is plain argmax.
    struct Cand {
      double score;
      std::size_t hyp, token;
    };
    std::vector<Cand> cands;
    for (std::size_t i = 0; i < n; ++i) {
      auto lp = log_softmax(logits.data().subspan(i * V, V));
      std::vector<std::size_t> order(V);
      for (std::size_t v = 0; v < V; ++v) order[v] = v;
      const std::size_t top = std::min(k, V);
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                        [&](std::size_t a, std::size_t b) { return lp[a] != lp[b] ? lp[a] > lp[b] : a < b; });
      for (std::size_t j = 0; j < top; ++j) cands.push_back({alive[i].log_prob + lp[order[j]], i, order[j]});
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.score > b.score; });

    std::vector<Hyp> next;
    for (const auto& c : cands) {
      if (next.size() >= k) break;
      Hyp h = alive[c.hyp];
      h.log_prob = c.score;
      h.parent = c.hyp;
      const auto row = attn.data().subspan(c.hyp * enc.steps, enc.steps);
      h.attention.emplace_back(row.begin(), row.end());
      if (c.token == kEos) {
        finished.push_back(std::move(h));
      } else {
        h.ids.push_back(c.token);
        next.push_back(std::move(h));
      }
    }
    // Stop once the best-scoring continuation is an end of sentence.
    if (cands.front().token == kEos || next.empty()) break;
    // Reorder decoder state rows to follow the surviving hypotheses.
    std::vector<std::size_t> parents;
    for (const auto& h : next) parents.push_back(h.parent);
    state.h1 = ops::gather_rows(state.h1, parents);
    state.c1 = ops::gather_rows(state.c1, parents);
    state.h2 = ops::gather_rows(state.h2, parents);
    state.c2 = ops::gather_rows(state.c2, parents);
    state.feed = ops::gather_rows(state.feed, parents);
    alive = std::move(next);
  }
  auto& pool = finished.empty() ? alive : finished;
  auto normalized = [](const Hyp& h) {
    // Length-normalized with exponent 1; EOS counts as a token when present.
    const double len = static_cast<double>(std::max<std::size_t>(1, h.attention.size()));
    return h.log_prob / len;
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < pool.size(); ++i)
    if (normalized(pool[i]) > normalized(pool[best])) best = i;
  Translation out;
  out.ids = pool[best].ids;
  out.attention = pool[best].attention;
  out.log_prob = pool[best].log_prob;
  for (auto id : out.ids) out.tokens.push_back(target_vocab_.token(id));
  return out;
}

TranslationModel TranslationModel::clone() const {
  std::stringstream buf;
  save(buf);
  return load(buf);
}

}  // namespace unmt
