#include <algorithm>
#include <cmath>
#include <random>

#include "unmt/corpus/vocab.hpp"
#include "unmt/embeddings/embedding_table.hpp"
#include "unmt/error.hpp"

namespace unmt {

namespace {

inline double logistic(double x) {
  if (x > 30.0) return 1.0;
  if (x < -30.0) return 0.0;
  return 1.0 / (1.0 + std::exp(-x));
}

}  // namespace

EmbeddingTable train_skipgram(std::span<const Sentence> corpus, const SkipGramConfig& config,
                              const std::string& language) {
  if (corpus.empty()) throw InputError("train_skipgram: empty corpus");
  if (config.dim < 2) throw ParameterError("train_skipgram: dim must be >= 2");
  if (config.window == 0) throw ParameterError("train_skipgram: window must be >= 1");

  const auto vocab = build_vocab(corpus, config.min_count);
  const auto counts = count_tokens(corpus);
  const std::size_t n = vocab.size() - kNumReserved;
  if (n == 0) throw InputError("train_skipgram: no token reaches min_count");
  const std::size_t dim = config.dim;

  std::vector<std::vector<std::size_t>> encoded;
  std::size_t total_tokens = 0;
  for (const auto& s : corpus) {
    std::vector<std::size_t> ids;
    for (const auto& t : s) {
      if (auto id = vocab.find(t)) ids.push_back(*id - kNumReserved);
    }
    total_tokens += ids.size();
    encoded.push_back(std::move(ids));
  }

  std::vector<double> noise_weights(n);
  for (std::size_t i = 0; i < n; ++i) {
    noise_weights[i] = std::pow(static_cast<double>(counts.at(vocab.token(i + kNumReserved))), 0.75);
  }
  std::discrete_distribution<std::size_t> noise(noise_weights.begin(), noise_weights.end());

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> init(-0.5 / static_cast<double>(dim), 0.5 / static_cast<double>(dim));
  std::vector<double> in(n * dim), out(n * dim, 0.0);
  for (auto& v : in) v = init(rng);
  std::uniform_int_distribution<std::size_t> shrink(0, config.window - 1);

  const double total_work = static_cast<double>(std::max<std::size_t>(1, total_tokens * config.epochs));
  double processed = 0.0;
  std::vector<double> grad_in(dim);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& sent : encoded) {
      for (std::size_t pos = 0; pos < sent.size(); ++pos) {
        const double lr = config.learning_rate * std::max(1e-4, 1.0 - processed / total_work);
        processed += 1.0;
        const std::size_t span = config.window - shrink(rng);
        const std::size_t lo = pos >= span ? pos - span : 0;
        const std::size_t hi = std::min(sent.size() - 1, pos + span);
        for (std::size_t c = lo; c <= hi; ++c) {
          if (c == pos) continue;
          // The context word's input vector predicts the centre word.
          double* v = &in[sent[c] * dim];
          std::fill(grad_in.begin(), grad_in.end(), 0.0);
          for (std::size_t d = 0; d <= config.negatives; ++d) {
            std::size_t target;
            double label;
            if (d == 0) {
              target = sent[pos];
              label = 1.0;
            } else {
              target = noise(rng);
              if (target == sent[pos]) continue;
              label = 0.0;
            }
            double* u = &out[target * dim];
            double dot = 0.0;
            for (std::size_t k = 0; k < dim; ++k) dot += v[k] * u[k];
            const double g = (label - logistic(dot)) * lr;
            for (std::size_t k = 0; k < dim; ++k) grad_in[k] += g * u[k];
            for (std::size_t k = 0; k < dim; ++k) u[k] += g * v[k];
          }
          for (std::size_t k = 0; k < dim; ++k) v[k] += grad_in[k];
        }
      }
    }
  }

  std::vector<std::string> tokens(vocab.tokens().begin() + kNumReserved, vocab.tokens().end());
  return EmbeddingTable(language, std::move(tokens), dim, std::move(in));
}

}  // namespace unmt
