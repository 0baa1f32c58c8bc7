#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "unmt/error.hpp"
#include "unmt/nmt/checkpoint.hpp"
#include "unmt/nmt/train.hpp"
#include "unmt/tensor/grad_check.hpp"

using namespace unmt;

namespace {

// Word-for-word toy language: source token f<i> translates to e<i>.
ParallelCorpus toy_corpus(const std::string& lang, std::size_t n, std::size_t words, std::uint64_t seed,
                          std::size_t min_len = 2, std::size_t max_len = 5) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> w(0, words - 1), len(min_len, max_len);
  ParallelCorpus c{lang, {}, false};
  for (std::size_t i = 0; i < n; ++i) {
    SentencePair p;
    for (std::size_t k = len(rng); k > 0; --k) {
      const auto x = w(rng);
      p.source.push_back(lang + std::to_string(x));
      p.target.push_back("e" + std::to_string(x));
    }
    c.pairs.push_back(p);
  }
  return c;
}

Vocabulary target_vocab_of(const std::vector<ParallelCorpus>& cs) {
  std::vector<Sentence> t;
  for (auto& c : cs)
    for (auto& p : c.pairs) t.push_back(p.target);
  return build_vocab(t);
}

TranslationModel lookup_model(const std::vector<ParallelCorpus>& cs, ModelConfig cfg, bool mole = false) {
  std::vector<LanguageCorpus> lc;
  std::vector<std::string> langs;
  for (auto& c : cs) {
    LanguageCorpus l{c.language, {}};
    for (auto& p : c.pairs) l.sentences.push_back(p.source);
    lc.push_back(l);
    langs.push_back(c.language);
  }
  cfg.use_mole = mole;
  return TranslationModel::make_lookup(cfg, build_multilingual_vocab(lc), target_vocab_of(cs), langs,
                                       mole ? langs : std::vector<std::string>{});
}

EmbeddingTable unit_table(const std::vector<std::string>& tokens, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<double> v(tokens.size() * d);
  for (auto& x : v) x = g(rng);
  return normalize_rows(EmbeddingTable("", tokens, d, v));
}

// ULR model whose query for <lang><i> is the key of e<i>; `extra` source
// tokens exist only in the query space.
TranslationModel ulr_model(const std::vector<ParallelCorpus>& cs, ModelConfig cfg, bool mole,
                           std::size_t words, std::size_t key_dim = 6, std::size_t extra = 0) {
  std::mt19937_64 rng(99);
  auto tv = target_vocab_of(cs);
  std::vector<std::string> universal;
  for (std::size_t i = 0; i < words + extra; ++i) universal.push_back("e" + std::to_string(i));
  auto keys = unit_table(universal, key_dim, rng);
  std::vector<UlrLanguage> sides;
  std::vector<std::string> langs;
  for (auto& c : cs) {
    std::vector<std::string> qt;
    std::vector<double> qv;
    std::unordered_map<std::string, long> counts;
    Vocabulary v;
    for (std::size_t i = 0; i < words + extra; ++i) {
      qt.push_back(c.language + std::to_string(i));
      auto row = keys.row(i);
      qv.insert(qv.end(), row.begin(), row.end());
      counts[qt.back()] = static_cast<long>(1000 - i);
      v.add(qt.back());
    }
    sides.push_back({c.language, v, QuerySpace(c.language, normalize_rows(EmbeddingTable(c.language, qt, key_dim, qv)), counts)});
    langs.push_back(c.language);
  }
  cfg.use_mole = mole;
  return TranslationModel::make_ulr(cfg, keys, sides, tv, mole ? langs : std::vector<std::string>{});
}

ModelConfig small_config() {
  ModelConfig c;
  c.embed_dim = 16;
  c.hidden_dim = 16;
  c.attention_dim = 16;
  c.dropout = 0.0;
  // Tiny dims need a wider init than the +-0.08 default to get going quickly.
  c.init_range = 0.3;
  c.ulr.top_frequent_k = 3;
  c.ulr.tau = 0.1;
  return c;
}

Batch batch_of(const TranslationModel& m, const ParallelCorpus& c, std::size_t n) {
  auto enc = m.encode_corpus(c);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
  return make_batch(enc, idx);
}

std::string serialize(const TranslationModel& m) {
  std::ostringstream out;
  m.save(out);
  return out.str();
}

}  // namespace

TEST_CASE("encoder shapes and determinism") {
  auto c = toy_corpus("aa", 10, 8, 1);
  auto m = lookup_model({c}, small_config());
  auto ids = m.encode_source("aa", c.pairs[0].source);
  auto h = m.encode(ids, "aa");
  CHECK(h.rows() == ids.size());
  CHECK(h.cols() == 32);
  auto again = m.encode(ids, "aa");
  CHECK(std::equal(h.data().begin(), h.data().end(), again.data().begin()));

  std::vector<std::size_t> one{ids[0]};
  auto single = m.encode(one, "aa");
  CHECK(single.rows() == 1);
  double fwd = 0, bwd = 0;
  for (std::size_t j = 0; j < 16; ++j) {
    CHECK(std::isfinite(single.at(0, j)));
    fwd += std::abs(single.at(0, j));
    bwd += std::abs(single.at(0, 16 + j));
  }
  CHECK(fwd > 0.0);
  CHECK(bwd > 0.0);
  CHECK_THROWS_AS(m.encode(std::vector<std::size_t>{}, "aa"), InputError);
  CHECK_THROWS_AS(m.encode(ids, "zz"), LookupError);
}

TEST_CASE("initial loss is close to ln V") {
  auto c = toy_corpus("aa", 40, 30, 2);
  auto m = lookup_model({c}, small_config());
  auto terms = m.loss(batch_of(m, c, 16));
  const double lnv = std::log(static_cast<double>(m.target_vocab().size()));
  CHECK(std::abs(terms.nll - lnv) < 0.1 * lnv);
}

TEST_CASE("padding does not change the loss") {
  auto c = toy_corpus("aa", 6, 8, 3);
  for (bool ulr : {false, true}) {
    auto m = ulr ? ulr_model({c}, small_config(), true, 8) : lookup_model({c}, small_config(), true);
    auto b = batch_of(m, c, 6);
    Batch wide = b;
    wide.source_length += 3;
    wide.target_length += 4;
    wide.source.assign(wide.batch_size * wide.source_length, kPad);
    wide.target.assign(wide.batch_size * wide.target_length, kPad);
    for (std::size_t r = 0; r < b.batch_size; ++r) {
      for (std::size_t t = 0; t < b.source_length; ++t) wide.source[r * wide.source_length + t] = b.source_at(r, t);
      for (std::size_t t = 0; t < b.target_length; ++t) wide.target[r * wide.target_length + t] = b.target_at(r, t);
    }
    auto a = m.loss(b, nullptr, 0);
    auto w = m.loss(wide, nullptr, 0);
    CHECK(std::abs(a.total.item() - w.total.item()) < 1e-12);
    CHECK(std::abs(a.gate - w.gate) < 1e-12);
  }
}

TEST_CASE("full-model gradient check") {
  ModelConfig cfg;
  cfg.embed_dim = 4;
  cfg.hidden_dim = 3;
  cfg.attention_dim = 3;
  cfg.dropout = 0.0;
  cfg.init_range = 0.5;
  cfg.ulr.tau = 0.5;
  cfg.ulr.top_frequent_k = 2;
  auto c = toy_corpus("aa", 3, 4, 5, 1, 4);
  auto d = toy_corpus("bb", 3, 4, 6, 1, 4);
  GradCheckOptions opt;
  SUBCASE("lookup, additive attention") {
    auto m = lookup_model({c}, cfg);
    auto b = batch_of(m, c, 3);
    auto params = m.parameters();
    auto r = grad_check([&] { return m.loss(b).total; }, params, opt);
    CHECK(r.max_rel_error < 1e-4);
  }
  SUBCASE("lookup, bilinear attention") {
    cfg.attention = AttentionKind::bilinear;
    auto m = lookup_model({c}, cfg);
    auto b = batch_of(m, c, 3);
    auto params = m.parameters();
    CHECK(grad_check([&] { return m.loss(b).total; }, params, opt).max_rel_error < 1e-4);
  }
  SUBCASE("ULR with MoLE and gate loss") {
    auto m = ulr_model({c, d}, cfg, true, 4, 3);
    for (auto& p : m.parameters()) {
      // A away from the identity so its gradient is generic.
      if (p.name == kTransformName) {
        Tensor a = p.tensor;
        std::mt19937_64 rng(1);
        for (auto& x : a.data_mut()) x += std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
      }
    }
    auto b = batch_of(m, d, 3);
    auto params = m.parameters();
    auto r = grad_check([&] { return m.loss(b, nullptr, 1).total; }, params, opt);
    CHECK(r.max_rel_error < 1e-4);
    bool saw_a = false, saw_gate = false;
    for (auto& e : r.entries) {
      saw_a |= e.name == kTransformName;
      saw_gate |= e.name == "mole.gate.w";
    }
    CHECK(saw_a);
    CHECK(saw_gate);
  }
}

TEST_CASE("memorizes a small batch and translates it back") {
  auto c = toy_corpus("aa", 4, 6, 7, 3, 5);
  auto cfg = small_config();
  auto m = lookup_model({c}, cfg);
  TrainingConfig tc;
  tc.learning_rate = 0.01;
  Trainer trainer(m, tc);
  auto b = batch_of(m, c, 4);
  std::vector<double> losses;
  for (int s = 0; s < 200; ++s) losses.push_back(trainer.step(b).nll);
  CHECK(losses.back() < 0.1);
  // Non-increasing over 50-step windows.
  for (std::size_t w = 50; w + 50 <= losses.size(); w += 50) {
    double prev = 0, cur = 0;
    for (std::size_t i = 0; i < 50; ++i) {
      prev += losses[w - 50 + i];
      cur += losses[w + i];
    }
    CHECK(cur <= prev);
  }
  CHECK(m.steps_trained() == 200);

  for (const auto& p : c.pairs) {
    auto greedy = m.translate(p.source, "aa");
    CHECK(greedy.tokens == p.target);
    auto beam = m.translate(p.source, "aa", {.beam = 4, .max_length = 20});
    CHECK(beam.tokens == p.target);
    REQUIRE(greedy.attention.size() == p.target.size() + 1);
    for (const auto& row : greedy.attention) {
      double s = 0;
      for (double x : row) s += x;
      CHECK(std::abs(s - 1.0) < 1e-9);
    }
  }
  CHECK_THROWS_AS(m.translate(Sentence{}, "aa"), InputError);
}

TEST_CASE("beam width 1 is greedy") {
  auto c = toy_corpus("aa", 30, 10, 8);
  auto m = lookup_model({c}, small_config());
  TrainingConfig tc;
  tc.max_steps = 30;
  tc.batch_size = 8;
  train(m, {c}, tc);
  for (std::size_t i = 0; i < 10; ++i) {
    auto g = m.translate(c.pairs[i].source, "aa", {.beam = 1, .max_length = 12});
    auto b = m.translate(c.pairs[i].source, "aa", {.beam = 1, .max_length = 12});
    CHECK(g.ids == b.ids);
    CHECK(g.log_prob == b.log_prob);
  }
}

TEST_CASE("checkpoint round trip") {
  auto c = toy_corpus("aa", 20, 8, 9);
  auto d = toy_corpus("bb", 20, 8, 10);
  auto dir = std::filesystem::temp_directory_path();
  for (bool ulr : {false, true}) {
    auto m = ulr ? ulr_model({c, d}, small_config(), true, 8) : lookup_model({c, d}, small_config());
    TrainingConfig tc;
    tc.max_steps = 10;
    tc.batch_size = 4;
    train(m, {c, d}, tc);
    auto path = dir / (ulr ? "unmt_ckpt_ulr.txt" : "unmt_ckpt_lookup.txt");
    save_checkpoint(m, path);
    auto loaded = load_checkpoint(path);
    CHECK(serialize(loaded) == serialize(m));
    CHECK(loaded.steps_trained() == 10);
    CHECK(loaded.trained_languages() == m.trained_languages());
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(loaded.translate(d.pairs[i].source, "bb").ids == m.translate(d.pairs[i].source, "bb").ids);
    }

    std::string text = serialize(m);
    std::istringstream truncated(text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(TranslationModel::load(truncated), FormatError);
    std::istringstream no_end(text.substr(0, text.rfind("end")));
    CHECK_THROWS_AS(TranslationModel::load(no_end), FormatError);

    std::string future = text;
    future.replace(future.find(" 1\n"), 3, " 7\n");
    std::istringstream in(future);
    try {
      TranslationModel::load(in);
      FAIL("expected VersionError");
    } catch (const VersionError& e) {
      const std::string msg = e.what();
      CHECK(msg.find('7') != std::string::npos);
      CHECK(msg.find(std::to_string(kCheckpointVersion)) != std::string::npos);
    }
  }
}

TEST_CASE("ULR reaches tokens that never occur in parallel data") {
  auto c = toy_corpus("aa", 20, 6, 11);
  auto m = ulr_model({c}, small_config(), false, 6, 6, 4);
  TrainingConfig tc;
  tc.max_steps = 20;
  tc.batch_size = 5;
  train(m, {c}, tc);
  // aa8 and aa9 exist only in the monolingual query space.
  Sentence s{"aa1", "aa8", "aa9"};
  auto ids = m.encode_source("aa", s);
  CHECK(ids[1] != kUnk);
  auto h = m.encode(ids, "aa");
  for (double v : h.data()) CHECK(std::isfinite(v));
  auto t = m.translate(s, "aa", {.beam = 1, .max_length = 5});
  for (const auto& row : t.attention) {
    CHECK(row[1] > 0.0);
    CHECK(row[2] > 0.0);
  }
}

TEST_CASE("single-language training equals stepping the same batches") {
  auto c = toy_corpus("aa", 24, 8, 12);
  auto cfg = small_config();
  auto m1 = lookup_model({c}, cfg);
  auto m2 = m1.clone();
  TrainingConfig tc;
  tc.max_steps = 12;
  tc.batch_size = 5;
  tc.eval_interval = 1;
  auto records = train(m1, {c}, tc);
  REQUIRE(records.size() == 12);

  BatchStream stream({m2.encode_corpus(filter_pairs(c))}, tc.batch_size, tc.schedule, tc.seed, {}, tc.max_length);
  Trainer trainer(m2, tc);
  for (std::size_t s = 0; s < 12; ++s) CHECK(trainer.step(stream.next()).nll == records[s].nll);
  CHECK(serialize(m1) == serialize(m2));
}

TEST_CASE("training runs are bit-reproducible") {
  auto c = toy_corpus("aa", 30, 8, 13);
  auto d = toy_corpus("bb", 30, 8, 14);
  auto cfg = small_config();
  cfg.dropout = 0.3;
  TrainingConfig tc;
  tc.max_steps = 15;
  tc.batch_size = 6;
  auto a = ulr_model({c, d}, cfg, true, 8);
  auto b = ulr_model({c, d}, cfg, true, 8);
  train(a, {c, d}, tc);
  train(b, {c, d}, tc);
  CHECK(serialize(a) == serialize(b));
}

TEST_CASE("training log lines are JSON objects") {
  auto c = toy_corpus("aa", 20, 8, 15);
  auto m = lookup_model({c}, small_config(), true);
  TrainingConfig tc;
  tc.max_steps = 4;
  tc.batch_size = 5;
  tc.eval_interval = 2;
  std::ostringstream log;
  auto records = train(m, {c}, tc, [](const TranslationModel&) { return std::optional<double>(12.5); }, &log);
  REQUIRE(records.size() == 2);
  CHECK(records[0].step == 2);
  CHECK(records[1].bleu_dev == 12.5);
  CHECK(records[0].gate_acc.has_value());
  CHECK(log.str().find("{\"step\":2,\"language\":\"aa\",\"nll\":") == 0);
}

TEST_CASE("non-finite loss is reported with diagnostics") {
  auto c = toy_corpus("aa", 8, 8, 16);
  auto m = lookup_model({c}, small_config());
  for (auto& p : m.parameters())
    if (p.name == "output.b") {
      Tensor t = p.tensor;
      t.data_mut()[0] = std::nan("");
    }
  TrainingConfig tc;
  Trainer trainer(m, tc);
  try {
    trainer.step(batch_of(m, c, 4));
    FAIL("expected EvaluationError");
  } catch (const EvaluationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("step 1") != std::string::npos);
    CHECK(msg.find("language aa") != std::string::npos);
    CHECK(msg.find("batch hash") != std::string::npos);
  }
}

TEST_CASE("fine-tuning") {
  auto aux = toy_corpus("aa", 200, 8, 17);
  auto low = toy_corpus("bb", 40, 8, 18);
  auto dev = toy_corpus("bb", 20, 8, 19);
  auto m = ulr_model({aux, low}, small_config(), true, 8);
  TrainingConfig tc;
  tc.max_steps = 100;
  tc.batch_size = 16;
  tc.learning_rate = 0.005;
  train(m, {aux}, tc);
  const auto before = serialize(m);

  auto zero = fine_tune(m, low, 0, tc, dev);
  REQUIRE(zero.epochs.size() == 1);
  CHECK(zero.epochs[0].epoch == 0);
  CHECK(serialize(m) == before);

  const auto mole_before = m.mole()->parameters();
  std::vector<double> gate_before(mole_before.back().tensor.data().begin(), mole_before.back().tensor.data().end());
  auto report = fine_tune(m, low, 3, tc, dev);
  REQUIRE(report.epochs.size() == 4);
  CHECK(report.warnings.empty());
  CHECK(report.epochs[3].dev_nll < report.epochs[0].dev_nll);
  // MoLE stays frozen for the new language.
  CHECK(std::equal(gate_before.begin(), gate_before.end(), m.mole()->parameters().back().tensor.data().begin()));

  auto again = fine_tune(m, low, 1, tc, dev);
  CHECK_FALSE(again.warnings.empty());
}
