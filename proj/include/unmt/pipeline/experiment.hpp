#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "unmt/corpus/parallel.hpp"
#include "unmt/embeddings/embedding_table.hpp"
#include "unmt/nmt/config.hpp"
#include "unmt/nmt/model.hpp"
#include "unmt/nmt/train.hpp"
#include "unmt/pipeline/cipher.hpp"
#include "unmt/projection/projection.hpp"
#include "unmt/ulr/ulr.hpp"

namespace unmt {

enum class SystemKind {
  vanilla,            // low-resource pairs only
  multilingual,       // all languages, language-marked lookup embeddings
  closest_universal,  // low-resource pairs only, every token replaced by its nearest universal token
  ulr_fixed_transform,
  ulr,
  ulr_mole,
};

struct SystemSpec {
  SystemKind kind = SystemKind::multilingual;
  bool backtranslation = false;

  // "vanilla", "multi", "closest_uni", "ulr_fixed_a", "ulr", "ulr_mole", plus "+bt".
  std::string name() const;
  static SystemSpec parse(const std::string& name);
};

// The grid of the ablation table, in display order.
std::vector<SystemSpec> ablation_grid();

struct BacktranslationConfig {
  std::size_t sentences = 1000;  // monolingual target sentences translated per round
  std::size_t rounds = 1;
  std::size_t reverse_steps = 1000;
};

struct ExperimentConfig {
  std::string name = "cipher";
  // Empty: generate the cipher task. Otherwise <dir>/<lang>.{train,dev,test}.tsv
  // for every source language and <dir>/<lang>.mono.txt for every language.
  std::filesystem::path data_dir;
  CipherTaskConfig task;
  SkipGramConfig embeddings;
  ModelConfig model;
  TrainingConfig training;
  double min_dice = 0.1;
  long seed_min_count = 1;
  std::size_t max_seeds = 500;
  std::size_t universal_tokens = 4000;
  std::size_t low_resource_pairs = 100;
  BacktranslationConfig backtranslation;
  std::size_t finetune_epochs = 3;
  DecodeOptions decode;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::filesystem::path output_dir = "runs";

  ExperimentConfig();
  void validate() const;
};

KeyValues to_key_values(const ExperimentConfig& c);
// Every key must belong to a known section and field.
ExperimentConfig experiment_config(const KeyValues& kv);

/// Corpora, frozen embedding spaces and projections shared by every system
/// of one seed.
struct PreparedTask {
  std::uint64_t seed = 0;
  std::string target;
  std::string low_resource;
  std::vector<std::string> auxiliary;
  std::map<std::string, ParallelCorpus> train;  // low-resource entry is the full pool
  std::map<std::string, ParallelCorpus> dev;
  std::map<std::string, ParallelCorpus> test;
  std::map<std::string, std::vector<Sentence>> monolingual;
  std::map<std::string, std::map<std::string, std::string>> lexicon;  // known for generated tasks
  EmbeddingTable keys;                             // universal tokens, normalized
  std::map<std::string, QuerySpace> queries;       // projected, per source language
  std::map<std::string, OrthogonalMap> maps;
  std::map<std::string, std::size_t> seed_counts;
  std::vector<std::string> warnings;

  std::vector<std::string> source_languages() const;
  // Fraction of lexicon entries whose projected query has the true
  // translation as nearest universal token. Nothing for file-backed data.
  std::optional<double> induction_accuracy(const std::string& language) const;
  // Source sides rewritten to the nearest universal token of each word.
  ParallelCorpus closest_universal(const ParallelCorpus& corpus) const;
};

PreparedTask prepare_task(const ExperimentConfig& config, std::uint64_t seed);

struct RunResult {
  std::string system;
  std::uint64_t seed = 0;
  std::size_t low_resource_pairs = 0;
  bool ok = true;
  bool defined = true;  // false when the system has no training data at this size
  std::string error;
  double dev_bleu = 0.0;
  double test_bleu = 0.0;
  double seconds = 0.0;
};

struct SystemRun {
  RunResult result;
  SystemSpec spec;
  std::optional<TranslationModel> model;
  std::vector<ParallelCorpus> training;  // what the model was trained on
  // Maps evaluation sources into the model's input space.
  ParallelCorpus input(const PreparedTask& task, const ParallelCorpus& corpus) const;
};

/// Untrained model of the given system for the given vocabulary corpora.
TranslationModel build_model(const SystemSpec& spec, const PreparedTask& task, const ExperimentConfig& config,
                             const std::vector<ParallelCorpus>& vocab_corpora, std::uint64_t seed);

// Auxiliary training corpora plus the first n low-resource pairs (if n > 0).
std::vector<ParallelCorpus> training_corpora(const SystemSpec& spec, const PreparedTask& task, std::size_t n);

/// Trains and evaluates one system on dev and test of the low-resource
/// language. Errors propagate; run_ablation turns them into markers.
/// With a log, training writes JSON lines every train.eval_interval steps
/// with dev BLEU on the low-resource language.
SystemRun run_system(const SystemSpec& spec, const PreparedTask& task, const ExperimentConfig& config,
                     std::size_t low_resource_pairs, std::ostream* log = nullptr);

/// CSV-ready table. Artifacts start with "# key = value" lines holding the
/// resolved config and seeds, followed by the header row.
struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::string csv(const KeyValues& config) const;
  std::string json(const KeyValues& config) const;
};

struct AblationReport {
  std::vector<RunResult> runs;
  ResultTable table;  // one row per system, ranked by mean dev BLEU
};

using ProgressFn = std::function<void(const RunResult&)>;

AblationReport run_ablation(const ExperimentConfig& config, const std::vector<SystemSpec>& systems = ablation_grid(),
                            const ProgressFn& progress = {});

struct SweepReport {
  std::vector<RunResult> runs;
  ResultTable table;  // size, system, seed, dev_bleu, test_bleu
};

// Throws InputError if a size exceeds the low-resource pool.
SweepReport corpus_size_sweep(const ExperimentConfig& config, const std::vector<std::size_t>& sizes,
                              const std::vector<SystemSpec>& systems, const ProgressFn& progress = {});

struct FineTuneComparison {
  std::uint64_t seed = 0;
  FineTuneReport ulr;
  FineTuneReport baseline;
};

// Trains on auxiliary pairs only. The first config.low_resource_pairs
// low-resource pairs are part of the vocabulary but never seen in training.
TranslationModel pretrain_zero_shot(const SystemSpec& spec, const PreparedTask& task, const ExperimentConfig& config);

// Continues a zero-shot model for config.finetune_epochs on the first
// config.low_resource_pairs pairs; epoch 0 is the zero-shot score.
FineTuneReport fine_tune_low_resource(TranslationModel& model, const PreparedTask& task,
                                      const ExperimentConfig& config);

/// Pretrains a ULR system and the multilingual baseline without any
/// low-resource pairs, then fine-tunes both.
FineTuneComparison zero_shot_fine_tune(const ExperimentConfig& config, const PreparedTask& task,
                                       const SystemSpec& ulr_system = {SystemKind::ulr, false});

// Writes text to output_dir/file, creating the directory.
std::filesystem::path write_artifact(const std::filesystem::path& dir, const std::string& file, const std::string& text);

}  // namespace unmt
