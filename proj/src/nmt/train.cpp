#include "unmt/nmt/train.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "unmt/error.hpp"
#include "unmt/pipeline/bleu.hpp"
#include "unmt/tensor/ops.hpp"

namespace unmt {

namespace {

std::uint64_t batch_hash(const Batch& b) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ull;
  };
  for (auto v : b.source) mix(v);
  for (auto v : b.target) mix(v);
  return h;
}

EncodedCorpus encode_filtered(const TranslationModel& model, const ParallelCorpus& corpus, std::size_t max_length) {
  return model.encode_corpus(filter_pairs(corpus, max_length));
}

}  // namespace

Trainer::Trainer(TranslationModel& model, const TrainingConfig& config)
    : model_(model),
      config_(config),
      params_(model.parameters()),
      base_mask_(model.trainable_mask(params_)),
      adam_(params_, AdamConfig{config.learning_rate}),
      dropout_rng_(config.seed ^ 0x9e3779b97f4a7c15ull) {
  config_.validate();
}

StepResult Trainer::step(const Batch& batch) {
  ++steps_;
  std::vector<unsigned char> mask = base_mask_;
  std::optional<std::size_t> expert;
  if (const MoleLayer* mole = model_.mole()) {
    auto decision = apply_freeze_rule(*mole, params_, batch.language, config_.low_resource);
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] &= decision.update_mask[i];
    if (decision.add_gate_loss) expert = decision.expert;
  }
  zero_gradients(params_);
  StepResult out;
  out.language = batch.language;
  Tape tape;
  {
    TapeScope scope(tape);
    auto terms = model_.loss(batch, model_.config().dropout > 0.0 ? &dropout_rng_ : nullptr, expert);
    out.loss = terms.total.item();
    out.nll = terms.nll;
    out.gate = terms.gate;
    out.gate_accuracy = terms.gate_accuracy;
    out.gate_loss_added = expert.has_value();
    out.target_tokens = terms.target_tokens;
    if (!std::isfinite(out.loss)) {
      std::ostringstream msg;
      msg << "non-finite loss " << out.loss << " at step " << steps_ << ", language " << batch.language
          << ", batch hash " << std::hex << batch_hash(batch);
      throw EvaluationError(msg.str());
    }
    tape.backward(terms.total);
  }
  if (config_.clip_norm > 0.0) clip_gradients(params_, config_.clip_norm);
  adam_step(params_, adam_, mask);
  model_.record_step(batch.language);
  return out;
}

std::string TrainingRecord::to_json() const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["language"] = language;
  j["nll"] = nll;
  j["bleu_dev"] = bleu_dev ? nlohmann::ordered_json(*bleu_dev) : nlohmann::ordered_json(nullptr);
  j["gate_acc"] = gate_acc ? nlohmann::ordered_json(*gate_acc) : nlohmann::ordered_json(nullptr);
  return j.dump();
}

std::vector<TrainingRecord> train(TranslationModel& model, const std::vector<ParallelCorpus>& corpora,
                                  const TrainingConfig& config, const DevEvaluator& dev, std::ostream* log) {
  config.validate();
  std::vector<EncodedCorpus> encoded;
  for (const auto& c : corpora) {
    auto e = encode_filtered(model, c, config.max_length);
    if (e.size() > 0) encoded.push_back(std::move(e));
  }
  if (encoded.empty()) throw InputError("train: no training pairs");
  BatchStream stream(std::move(encoded), config.batch_size, config.schedule, config.seed, config.low_resource,
                     config.max_length);
  Trainer trainer(model, config);

  struct Acc {
    double nll = 0.0, gate = 0.0;
    std::size_t n = 0, gate_n = 0;
  };
  std::map<std::string, Acc> acc;
  std::vector<TrainingRecord> records;
  auto flush = [&](std::uint64_t step) {
    std::optional<double> bleu_dev;
    if (dev) bleu_dev = dev(model);
    for (const auto& [lang, a] : acc) {
      TrainingRecord r{step, lang, a.nll / static_cast<double>(a.n), bleu_dev, std::nullopt};
      if (a.gate_n) r.gate_acc = a.gate / static_cast<double>(a.gate_n);
      if (log) *log << r.to_json() << '\n';
      records.push_back(std::move(r));
    }
    acc.clear();
  };
  for (std::size_t s = 1; s <= config.max_steps; ++s) {
    auto result = trainer.step(stream.next());
    auto& a = acc[result.language];
    a.nll += result.nll;
    ++a.n;
    if (result.gate_loss_added) {
      a.gate += result.gate_accuracy;
      ++a.gate_n;
    }
    if ((config.eval_interval && s % config.eval_interval == 0) || s == config.max_steps) flush(s);
  }
  return records;
}

double corpus_nll(const TranslationModel& model, const ParallelCorpus& corpus, std::size_t batch_size) {
  NoGradScope no_grad;
  const auto enc = encode_filtered(model, corpus, kDefaultMaxLength);
  if (enc.size() == 0) throw InputError("corpus_nll: empty corpus");
  double total = 0.0;
  std::size_t tokens = 0;
  for (std::size_t begin = 0; begin < enc.size(); begin += batch_size) {
    std::vector<std::size_t> idx;
    for (std::size_t i = begin; i < std::min(enc.size(), begin + batch_size); ++i) idx.push_back(i);
    auto terms = model.loss(make_batch(enc, idx));
    total += terms.nll * static_cast<double>(terms.target_tokens);
    tokens += terms.target_tokens;
  }
  return total / static_cast<double>(tokens);
}

std::vector<Sentence> translate_corpus(const TranslationModel& model, const std::vector<Sentence>& sources,
                                       const std::string& language, const DecodeOptions& options) {
  std::vector<Sentence> out;
  out.reserve(sources.size());
  for (const auto& s : sources) out.push_back(s.empty() ? Sentence{} : model.translate(s, language, options).tokens);
  return out;
}

double corpus_bleu(const TranslationModel& model, const ParallelCorpus& corpus, const DecodeOptions& options) {
  std::vector<Sentence> src, ref;
  for (const auto& p : corpus.pairs) {
    src.push_back(p.source);
    ref.push_back(p.target);
  }
  const auto hyp = translate_corpus(model, src, corpus.language, options);
  return bleu(hyp, ref).bleu;
}

FineTuneReport fine_tune(TranslationModel& model, const ParallelCorpus& corpus, std::size_t epochs,
                         const TrainingConfig& config, const ParallelCorpus& dev) {
  FineTuneReport report;
  if (model.trained_languages().contains(corpus.language)) {
    report.warnings.push_back("language '" + corpus.language + "' was already part of pretraining");
  }
  TrainingConfig cfg = config;
  cfg.low_resource.insert(corpus.language);
  cfg.validate();
  report.epochs.push_back({0, corpus_nll(model, dev), corpus_bleu(model, dev)});
  if (epochs == 0) return report;

  auto enc = encode_filtered(model, corpus, cfg.max_length);
  if (enc.size() == 0) throw InputError("fine_tune: empty corpus");
  const std::size_t per_epoch = (enc.size() + cfg.batch_size - 1) / cfg.batch_size;
  BatchStream stream({std::move(enc)}, cfg.batch_size, cfg.schedule, cfg.seed, cfg.low_resource, cfg.max_length);
  Trainer trainer(model, cfg);
  for (std::size_t e = 1; e <= epochs; ++e) {
    for (std::size_t s = 0; s < per_epoch; ++s) trainer.step(stream.next());
    report.epochs.push_back({e, corpus_nll(model, dev), corpus_bleu(model, dev)});
  }
  return report;
}

}  // namespace unmt
