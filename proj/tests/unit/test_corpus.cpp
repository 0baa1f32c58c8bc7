#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <set>

#include "../oracles.hpp"
#include "unmt/corpus/batching.hpp"
#include "unmt/corpus/bpe.hpp"
#include "unmt/corpus/parallel.hpp"
#include "unmt/corpus/text.hpp"
#include "unmt/corpus/vocab.hpp"
#include "unmt/error.hpp"

using namespace unmt;

TEST_CASE("learn_bpe") {
  SUBCASE("zero merges splits into characters with the end-of-word marker") {
    std::vector<Sentence> corpus{{"casa", "ab"}};
    auto model = learn_bpe(corpus, 0);
    CHECK(model.merges.empty());
    BpeApplier app(model);
    CHECK(app.segment_word("casa") == std::vector<std::string>{"c", "a", "s", "a</w>"});
    CHECK(app.apply({"casa"}) == Sentence{"c@@", "a@@", "s@@", "a"});
  }
  SUBCASE("first merge matches brute-force pair counting") {
    std::vector<Sentence> corpus{{"aaab"}, {"aaab"}, {"ab"}};
    // pairs: (a,a): 2 per aaab x 2 = 4; (a,b</w>): 2 + 1 = 3
    auto oracle = oracles::learn_bpe(corpus, 1, 1);
    REQUIRE(oracle.merges.size() == 1);
    CHECK(oracle.merges[0] == std::pair<std::string, std::string>{"a", "a"});
    auto model = learn_bpe(corpus, 1);
    REQUIRE(model.merges.size() == 1);
    CHECK(model.merges[0] == oracle.merges[0]);
  }
  SUBCASE("deterministic") {
    std::mt19937_64 rng(1);
    auto corpus = oracles::random_word_corpus(rng, 500);
    CHECK(learn_bpe(corpus, 50).merges == learn_bpe(corpus, 50).merges);
  }
  SUBCASE("respects num_ops") {
    std::mt19937_64 rng(2);
    auto corpus = oracles::random_word_corpus(rng, 300);
    CHECK(learn_bpe(corpus, 7).merges.size() <= 7);
  }
  SUBCASE("empty corpus") {
    std::vector<Sentence> none;
    CHECK_THROWS_AS(learn_bpe(none, 10), InputError);
  }
}

TEST_CASE("learn and apply agree with a brute-force reimplementation") {
  for (std::uint64_t seed = 10; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    auto corpus = oracles::random_word_corpus(rng, 1000);
    const int ops = 5 + static_cast<int>(seed) * 7;
    auto oracle = oracles::learn_bpe(corpus, ops, 2);
    auto model = learn_bpe(corpus, ops, 2);
    REQUIRE(model.merges == oracle.merges);
    BpeApplier app(model);
    for (const auto& [word, seg] : oracle.final_segmentation) {
      CHECK(app.segment_word(word) == seg);
    }
  }
}

TEST_CASE("apply_bpe") {
  std::mt19937_64 rng(3);
  auto corpus = oracles::random_word_corpus(rng, 800);
  auto model = learn_bpe(corpus, 40);
  BpeApplier app(model);
  SUBCASE("round trip through detokenization") {
    for (const auto& s : corpus) CHECK(detokenize_bpe(app.apply(s)) == s);
    Sentence unseen{"zzqx", "abcde", "ü", "naïve"};
    CHECK(detokenize_bpe(app.apply(unseen)) == unseen);
  }
  SUBCASE("unseen characters are fully split") {
    CHECK(app.segment_word("xyz") == std::vector<std::string>{"x", "y", "z</w>"});
    CHECK(app.segment_word("naïve").size() == 5);
  }
  SUBCASE("model file round trip") {
    auto path = std::filesystem::temp_directory_path() / "unmt_bpe_test.codes";
    save_bpe(model, path);
    CHECK(load_bpe(path).merges == model.merges);
    std::filesystem::remove(path);
  }
}

TEST_CASE("vocabulary") {
  Vocabulary v;
  CHECK(v.size() == kNumReserved);
  CHECK(v.token(kPad) == "<pad>");
  CHECK(v.id("missing") == kUnk);
  auto id = v.add("casa", "es");
  CHECK(v.add("casa") == id);
  CHECK(v.decode(std::vector<std::size_t>{kBos, id, kEos, id}) == Sentence{"casa"});

  SUBCASE("frequency ordering") {
    std::vector<Sentence> c{{"b", "a", "b"}, {"c", "a", "b"}};
    auto fv = build_vocab(c);
    CHECK(fv.token(kNumReserved) == "b");
    CHECK(fv.token(kNumReserved + 1) == "a");
    CHECK(fv.token(kNumReserved + 2) == "c");
  }
}

TEST_CASE("build_multilingual_vocab") {
  std::vector<LanguageCorpus> corpora{{"es", {{"casa", "a"}, {"a"}}}, {"ro", {{"a", "casa", "mare"}}}};
  auto v = build_multilingual_vocab(corpora);
  CHECK(v.find("casa|es").has_value());
  CHECK(v.find("a|es").has_value());
  CHECK(v.find("a|ro").has_value());
  CHECK(*v.find("a|es") != *v.find("a|ro"));
  CHECK_FALSE(v.find("casa").has_value());
  CHECK(v.size() == 2 + 3 + kNumReserved);
  CHECK(v.language(*v.find("mare|ro")) == "ro");

  std::vector<LanguageCorpus> bad{{"es", {{"ca|sa"}}}};
  CHECK_THROWS_AS(build_multilingual_vocab(bad), InputError);
}

TEST_CASE("parallel corpora") {
  auto dir = std::filesystem::temp_directory_path();
  write_lines(dir / "unmt_src.txt", {"a b", "c", ""});
  write_lines(dir / "unmt_tgt.txt", {"x", "y z", "w"});
  auto c = load_parallel("xx", dir / "unmt_src.txt", dir / "unmt_tgt.txt");
  CHECK(c.size() == 3);
  auto f = filter_pairs(c, 50);
  CHECK(f.size() == 2);
  CHECK(filter_pairs(c, 1).size() == 0);  // "a b" and "y z" exceed 1
  save_parallel_tsv(f, dir / "unmt_pairs.tsv");
  auto t = load_parallel_tsv("xx", dir / "unmt_pairs.tsv");
  CHECK(t.pairs[1].target == Sentence{"y", "z"});
  write_lines(dir / "unmt_tgt.txt", {"x"});
  CHECK_THROWS_AS(load_parallel("xx", dir / "unmt_src.txt", dir / "unmt_tgt.txt"), InputError);
  write_lines(dir / "unmt_bad.tsv", {"no tab here"});
  CHECK_THROWS_AS(load_parallel_tsv("xx", dir / "unmt_bad.tsv"), FormatError);
}

namespace {

EncodedCorpus toy_encoded(const std::string& lang, std::size_t n, std::size_t offset = 10) {
  EncodedCorpus c{lang, {}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    c.source.push_back(std::vector<std::size_t>(1 + i % 5, offset + i));
    c.target.push_back(std::vector<std::size_t>(1 + i % 3, offset + i));
  }
  return c;
}

}  // namespace

TEST_CASE("make_batches") {
  SUBCASE("one language: every pair exactly once per epoch") {
    BatchStream stream({toy_encoded("aa", 23)}, 5, LanguageSchedule::uniform, 42);
    for (int epoch = 0; epoch < 3; ++epoch) {
      std::multiset<std::size_t> seen;
      std::size_t total = 0;
      while (total < 23) {
        auto b = stream.next();
        for (auto i : b.pair_indices) seen.insert(i);
        total += b.batch_size;
      }
      CHECK(total == 23);
      CHECK(seen.size() == 23);
      CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == 23);
    }
  }
  SUBCASE("uniform schedule over two languages within 3 sigma") {
    BatchStream stream({toy_encoded("hi", 2000), toy_encoded("lo", 100)}, 8, LanguageSchedule::uniform, 7,
                       {"lo"});
    std::size_t low = 0;
    for (int i = 0; i < 10000; ++i) {
      auto b = stream.next();
      CHECK(b.is_low_resource == (b.language == "lo"));
      low += b.language == "lo";
    }
    // Binomial(10000, 0.5): sigma = 50
    CHECK(std::abs(static_cast<double>(low) - 5000.0) <= 150.0);
  }
  SUBCASE("deterministic for a fixed seed") {
    BatchStream a({toy_encoded("x", 50), toy_encoded("y", 30)}, 4, LanguageSchedule::uniform, 3);
    BatchStream b({toy_encoded("x", 50), toy_encoded("y", 30)}, 4, LanguageSchedule::uniform, 3);
    for (int i = 0; i < 200; ++i) {
      auto ba = a.next(), bb = b.next();
      CHECK(ba.language == bb.language);
      CHECK(ba.source == bb.source);
      CHECK(ba.target == bb.target);
    }
  }
  SUBCASE("padding layout") {
    auto c = toy_encoded("x", 4);
    std::vector<std::size_t> idx{0, 3};
    auto b = make_batch(c, idx);
    CHECK(b.source_length == 4);
    CHECK(b.source_lengths == std::vector<std::size_t>{1, 4});
    CHECK(b.source_at(0, 1) == kPad);
    CHECK(b.target_lengths == std::vector<std::size_t>{2, 2});
    CHECK(b.target_at(0, 1) == kEos);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(BatchStream({}, 4, LanguageSchedule::uniform, 1), InputError);
    CHECK_THROWS_AS(BatchStream({toy_encoded("x", 3)}, 0, LanguageSchedule::uniform, 1), ParameterError);
    CHECK_THROWS_AS(BatchStream({toy_encoded("x", 10)}, 2, LanguageSchedule::uniform, 1, {}, 3), InputError);
  }
}
