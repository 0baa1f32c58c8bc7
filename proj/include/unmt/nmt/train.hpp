#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "unmt/corpus/parallel.hpp"
#include "unmt/nmt/model.hpp"

namespace unmt {

struct StepResult {
  std::string language;
  double loss = 0.0;
  double nll = 0.0;
  double gate = 0.0;
  double gate_accuracy = 0.0;
  bool gate_loss_added = false;
  std::size_t target_tokens = 0;
};

/// Single-updater Adam trainer. Honors the MoLE freeze rule for
/// low-resource batches and keeps A fixed when train_transform is off.
class Trainer {
 public:
  Trainer(TranslationModel& model, const TrainingConfig& config);

  // Throws EvaluationError (with step, language and a batch hash) on a
  // non-finite loss; the model is left untouched in that case.
  StepResult step(const Batch& batch);

  const ParameterSet& parameters() const { return params_; }
  AdamState& optimizer() { return adam_; }
  std::uint64_t steps() const { return steps_; }

 private:
  TranslationModel& model_;
  TrainingConfig config_;
  ParameterSet params_;
  std::vector<unsigned char> base_mask_;
  AdamState adam_;
  std::mt19937_64 dropout_rng_;
  std::uint64_t steps_ = 0;
};

struct TrainingRecord {
  std::uint64_t step = 0;
  std::string language;
  double nll = 0.0;
  std::optional<double> bleu_dev;
  std::optional<double> gate_acc;

  std::string to_json() const;
};

// Returns dev BLEU for the current model, or nothing.
using DevEvaluator = std::function<std::optional<double>(const TranslationModel&)>;

/// Multilingual training on the mixed corpora for config.max_steps batches.
/// Every eval_interval steps (and after the last step) one record per
/// language seen in the interval is produced and, if `log` is given,
/// written to it as a JSON line.
std::vector<TrainingRecord> train(TranslationModel& model, const std::vector<ParallelCorpus>& corpora,
                                  const TrainingConfig& config, const DevEvaluator& dev = {},
                                  std::ostream* log = nullptr);

// Mean per-token NLL over a corpus, no dropout.
double corpus_nll(const TranslationModel& model, const ParallelCorpus& corpus, std::size_t batch_size = 32);

std::vector<Sentence> translate_corpus(const TranslationModel& model, const std::vector<Sentence>& sources,
                                       const std::string& language, const DecodeOptions& options = {});

// Corpus BLEU of the model's translations of corpus sources against its targets.
double corpus_bleu(const TranslationModel& model, const ParallelCorpus& corpus, const DecodeOptions& options = {});

struct EpochMetrics {
  std::size_t epoch = 0;  // 0 = before any fine-tuning (zero-shot)
  double dev_nll = 0.0;
  double dev_bleu = 0.0;
};

struct FineTuneReport {
  std::vector<EpochMetrics> epochs;
  std::vector<std::string> warnings;
};

/// Continues training on one language only, a full pass over `corpus` per
/// epoch, evaluating on `dev` before the first epoch and after each one.
FineTuneReport fine_tune(TranslationModel& model, const ParallelCorpus& corpus, std::size_t epochs,
                         const TrainingConfig& config, const ParallelCorpus& dev);

}  // namespace unmt
