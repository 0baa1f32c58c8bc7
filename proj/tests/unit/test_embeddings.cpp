#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "unmt/embeddings/embedding_table.hpp"
#include "unmt/error.hpp"

using namespace unmt;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& content) {
  auto p = std::filesystem::temp_directory_path() / ("unmt_emb_" + name);
  std::ofstream(p) << content;
  return p;
}

EmbeddingTable random_table(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<std::string> tokens;
  std::vector<double> v(n * d);
  for (std::size_t i = 0; i < n; ++i) tokens.push_back("w" + std::to_string(i));
  for (auto& x : v) x = g(rng);
  return EmbeddingTable("xx", tokens, d, v);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double d = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return d / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("load_vectors reads the text format") {
  auto p = write_temp("ok.vec", "2 3\na 1 0 0\nb 0 1 0\n");
  auto t = load_vectors(p);
  CHECK(t.size() == 2);
  CHECK(t.dim() == 3);
  CHECK(t.tokens() == std::vector<std::string>{"a", "b"});
  CHECK(t.row(1)[1] == 1.0);
  CHECK(t.index("b") == 1u);
  CHECK_FALSE(t.contains("c"));
}

TEST_CASE("load_vectors errors") {
  SUBCASE("fewer rows than declared") {
    auto p = write_temp("short.vec", "3 3\na 1 0 0\nb 0 1 0\n");
    try {
      load_vectors(p);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find(":4:") != std::string::npos);
      CHECK(std::string(e.what()).find("end of file") != std::string::npos);
    }
  }
  SUBCASE("dimension mismatch with expectation") {
    std::string content = "1 300\nx";
    for (int i = 0; i < 300; ++i) content += " 0.5";
    auto p = write_temp("dim.vec", content + "\n");
    CHECK_THROWS_AS(load_vectors(p, 512), FormatError);
    CHECK(load_vectors(p, 300).dim() == 300);
  }
  SUBCASE("duplicate token") {
    auto p = write_temp("dup.vec", "2 2\na 1 0\na 0 1\n");
    CHECK_THROWS_AS(load_vectors(p), FormatError);
  }
  SUBCASE("row with wrong width names its line") {
    auto p = write_temp("width.vec", "2 2\na 1 0\nb 0 1 5\n");
    try {
      load_vectors(p);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find(":3:") != std::string::npos);
    }
  }
  SUBCASE("extra rows") {
    auto p = write_temp("extra.vec", "1 2\na 1 0\nb 0 1\n");
    CHECK_THROWS_AS(load_vectors(p), FormatError);
  }
}

TEST_CASE("save and load round trip within six decimals") {
  std::mt19937_64 rng(3);
  auto t = random_table(40, 7, rng);
  auto p = std::filesystem::temp_directory_path() / "unmt_emb_rt.vec";
  save_vectors(t, p);
  auto u = load_vectors(p);
  CHECK(u.tokens() == t.tokens());
  for (std::size_t i = 0; i < t.values().size(); ++i) CHECK(std::abs(u.values()[i] - t.values()[i]) <= 5e-7);
}

TEST_CASE("normalize_rows") {
  EmbeddingTable t("xx", {"a", "b", "z"}, 2, {3, 4, 0.6, 0.8, 0, 0});
  auto n = normalize_rows(t);
  CHECK(n.normalized());
  CHECK(n.row(0)[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(n.row(0)[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(std::abs(n.row(1)[0] - 0.6) < 1e-12);
  CHECK(std::abs(n.row(1)[1] - 0.8) < 1e-12);
  CHECK(n.row(2)[0] == 0.0);
  CHECK(n.zero_rows() == std::vector<std::size_t>{2});

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto r = normalize_rows(random_table(50, 1 + trial * 7, rng));
    for (std::size_t i = 0; i < r.size(); ++i) {
      double sq = 0;
      for (double v : r.row(i)) sq += v * v;
      CHECK(std::abs(std::sqrt(sq) - 1.0) < 1e-10);
    }
  }
}

TEST_CASE("nearest_neighbors") {
  auto t = normalize_rows(EmbeddingTable("xx", {"a", "b", "c"}, 3, {1, 0, 0, 0, 1, 0, 0.6, 0.8, 0}));
  auto nn = nearest_neighbors(t, t.row(1), 2);
  REQUIRE(nn.size() == 2);
  CHECK(nn[0].token == "b");
  CHECK(nn[0].cosine == doctest::Approx(1.0));
  CHECK(nn[1].token == "c");

  std::vector<double> orth{0, 0, 1};
  nn = nearest_neighbors(t, orth, 10);
  REQUIRE(nn.size() == 3);
  CHECK(nn[0].token == "a");
  CHECK(nn[1].token == "b");
  CHECK(nn[2].token == "c");
  for (auto& x : nn) CHECK(x.cosine == 0.0);

  CHECK_THROWS_AS(nearest_neighbors(EmbeddingTable("xx", {"a"}, 1, {1}), std::vector<double>{1}, 1), StateError);

  // Exhaustive scan oracle over random tables of many sizes.
  std::mt19937_64 rng(11);
  for (std::size_t n : {1u, 2u, 5u, 17u, 120u}) {
    auto r = normalize_rows(random_table(n, 6, rng));
    std::normal_distribution<double> g;
    std::vector<double> q(6);
    for (auto& x : q) x = g(rng);
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < n; ++i) all.push_back({-cosine(r.row(i), q), i});
    std::sort(all.begin(), all.end());
    auto got = nearest_neighbors(r, q, 5);
    REQUIRE(got.size() == std::min<std::size_t>(5, n));
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].token == r.tokens()[all[i].second]);
      CHECK(std::abs(got[i].cosine + all[i].first) < 1e-12);
    }
  }
}

TEST_CASE("skip-gram training") {
  // p and q appear in identical contexts; r lives in a disjoint set.
  std::mt19937_64 rng(7);
  std::vector<Sentence> corpus;
  const std::vector<std::string> left{"a1", "a2", "a3", "a4"};
  const std::vector<std::string> right{"b1", "b2", "b3", "b4"};
  const std::vector<std::string> other_left{"c1", "c2", "c3", "c4"};
  const std::vector<std::string> other_right{"d1", "d2", "d3", "d4"};
  std::uniform_int_distribution<int> pick(0, 3);
  for (int i = 0; i < 600; ++i) {
    corpus.push_back({left[pick(rng)], i % 2 ? "p" : "q", right[pick(rng)]});
    corpus.push_back({other_left[pick(rng)], "r", other_right[pick(rng)]});
  }
  SkipGramConfig cfg;
  cfg.dim = 16;
  cfg.window = 2;
  cfg.negatives = 5;
  cfg.epochs = 5;
  cfg.seed = 42;
  auto t = train_skipgram(corpus, cfg, "xx");
  CHECK(t.size() == 19);
  CHECK(t.language() == "xx");
  for (const auto& s : corpus)
    for (const auto& w : s) CHECK(t.contains(w));
  const auto p = *t.index("p"), q = *t.index("q"), r = *t.index("r");
  const double pq = cosine(t.row(p), t.row(q));
  const double pr = cosine(t.row(p), t.row(r));
  CHECK(pq > pr);
  CHECK(pq > 0.5);

  auto again = train_skipgram(corpus, cfg, "xx");
  CHECK(std::equal(t.values().begin(), t.values().end(), again.values().begin()));

  CHECK_THROWS_AS(train_skipgram(std::vector<Sentence>{}, cfg), InputError);
  cfg.dim = 1;
  CHECK_THROWS_AS(train_skipgram(corpus, cfg), ParameterError);
}
