#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "unmt/corpus/batching.hpp"
#include "unmt/corpus/parallel.hpp"
#include "unmt/corpus/vocab.hpp"
#include "unmt/mole/mole.hpp"
#include "unmt/nmt/config.hpp"
#include "unmt/tensor/adam.hpp"
#include "unmt/ulr/ulr.hpp"

namespace unmt {

enum class SourceMode {
  lookup,  // one table over language-marked tokens
  ulr,     // universal mixture plus per-language interpolation tables
};

// Everything the ULR path needs for one source language.
struct UlrLanguage {
  std::string language;
  Vocabulary vocab;   // raw tokens of the language (monolingual and parallel)
  QuerySpace queries; // projected, frozen
};

struct LstmWeights {
  Tensor w;  // in x 4H
  Tensor u;  // H x 4H
  Tensor b;  // 4H
};

struct EncoderOutput {
  std::size_t batch = 0;
  std::size_t steps = 0;
  Tensor memory;                       // (T*B) x 2H, row t*B+b
  Tensor keys;                         // memory projected for the attention scorer
  Tensor final_backward;               // B x H
  std::vector<unsigned char> keep;     // B x T attention mask
  std::vector<double> position_weights;  // T*B, 1 on real tokens
  Tensor gate_logits;                  // defined when MoLE is on
  Tensor gate_probs;
};

struct LossTerms {
  Tensor total;
  double nll = 0.0;        // mean per target token
  double gate = 0.0;       // gate loss before weighting, 0 if not added
  double gate_accuracy = 0.0;
  std::size_t target_tokens = 0;
};

struct DecodeOptions {
  std::size_t beam = 1;  // 1 = greedy
  std::size_t max_length = 100;
};

struct Translation {
  Sentence tokens;
  std::vector<std::size_t> ids;               // without EOS
  std::vector<std::vector<double>> attention; // one row per emitted token (incl. EOS)
  double log_prob = 0.0;
};

/// Attentional encoder-decoder: bidirectional LSTM encoder, optional
/// language-expert mixture over its states, additive or bilinear attention,
/// two-layer LSTM decoder with input feeding.
class TranslationModel {
 public:
  TranslationModel() = default;

  static TranslationModel make_lookup(const ModelConfig& config, Vocabulary marked_source_vocab,
                                      Vocabulary target_vocab, std::vector<std::string> source_languages,
                                      std::vector<std::string> expert_languages = {});
  static TranslationModel make_ulr(const ModelConfig& config, EmbeddingTable universal_keys,
                                   std::vector<UlrLanguage> languages, Vocabulary target_vocab,
                                   std::vector<std::string> expert_languages = {});

  const ModelConfig& config() const { return config_; }
  ModelConfig& mutable_config() { return config_; }
  SourceMode mode() const { return mode_; }
  const std::vector<std::string>& source_languages() const { return languages_; }
  bool has_language(const std::string& language) const;
  const Vocabulary& target_vocab() const { return target_vocab_; }
  // Lookup mode: the shared marked vocabulary. ULR mode: the language's own.
  const Vocabulary& source_vocab(const std::string& language) const;
  std::size_t encoder_dim() const { return 2 * config_.hidden_dim; }

  const MoleLayer* mole() const { return mole_ ? &*mole_ : nullptr; }
  const UniversalTokenSet* universal() const { return mode_ == SourceMode::ulr ? &uts_ : nullptr; }
  const QuerySpace* query_space(const std::string& language) const;
  const InterpolationRule* rule(const std::string& language) const;

  std::vector<std::size_t> encode_source(const std::string& language, const Sentence& s) const;
  std::vector<std::size_t> encode_target(const Sentence& s) const;
  EncodedCorpus encode_corpus(const ParallelCorpus& corpus) const;

  // Every trainable tensor, in a fixed order.
  ParameterSet parameters() const;
  // 0 for parameters that must never move (A when train_transform is off).
  std::vector<unsigned char> trainable_mask(const ParameterSet& params) const;

  std::uint64_t steps_trained() const { return steps_trained_; }
  // Languages that have contributed at least one training batch.
  const std::set<std::string>& trained_languages() const { return trained_languages_; }
  void record_step(const std::string& language) {
    ++steps_trained_;
    trained_languages_.insert(language);
  }

  // dropout_rng == nullptr disables dropout.
  EncoderOutput encode_batch(const Batch& batch, std::mt19937_64* dropout_rng = nullptr) const;
  // T x 2H states for one sentence of ids.
  Tensor encode(std::span<const std::size_t> ids, const std::string& language) const;
  // T x K expert probabilities for one sentence. ConfigError without MoLE.
  Tensor gate_probabilities(std::span<const std::size_t> ids, const std::string& language) const;

  /// Mean per-token NLL of the batch targets, plus gate_loss_weight times
  /// the gate loss toward `gate_expert` when given.
  LossTerms loss(const Batch& batch, std::mt19937_64* dropout_rng = nullptr,
                 std::optional<std::size_t> gate_expert = std::nullopt) const;

  Translation translate(const Sentence& source, const std::string& language, const DecodeOptions& options = {}) const;
  Translation translate_ids(std::span<const std::size_t> ids, const std::string& language,
                            const DecodeOptions& options = {}) const;

  void save(std::ostream& out) const;
  static TranslationModel load(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static TranslationModel load(const std::filesystem::path& path);
  // Independent deep copy.
  TranslationModel clone() const;

 private:
  struct DecoderState {
    Tensor h1, c1, h2, c2, feed;
  };
  struct UlrSide {
    QuerySpace queries;
    InterpolationRule rule;
  };

  void init_common(std::mt19937_64& rng, const std::vector<std::string>& expert_languages);
  Tensor embed_source(const std::string& language, std::span<const std::size_t> ids_time_major) const;
  DecoderState initial_state(const EncoderOutput& enc) const;
  Tensor decoder_step(const EncoderOutput& enc, std::span<const std::size_t> prev, DecoderState& state,
                      std::mt19937_64* dropout_rng, Tensor* attention) const;
  EncoderOutput encode_single(std::span<const std::size_t> ids, const std::string& language) const;
  // Repeats a single-sentence encoding k times along the batch axis.
  static EncoderOutput replicate(const EncoderOutput& enc, std::size_t k);
  static std::size_t argmax(std::span<const double> row);

  friend class CheckpointIo;

  ModelConfig config_;
  SourceMode mode_ = SourceMode::lookup;
  std::vector<std::string> languages_;
  Vocabulary target_vocab_;

  Vocabulary lookup_vocab_;
  Tensor lookup_table_;

  UniversalTokenSet uts_;
  std::map<std::string, UlrSide> ulr_;

  LstmWeights enc_fwd_, enc_bwd_;
  Tensor init_w1_, init_b1_, init_w2_, init_b2_;
  Tensor att_keys_, att_query_, att_v_;
  LstmWeights dec1_, dec2_;
  Tensor tgt_embed_, combine_w_, out_w_, out_b_;
  std::optional<MoleLayer> mole_;
  std::uint64_t steps_trained_ = 0;
  std::set<std::string> trained_languages_;
};

}  // namespace unmt
