#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <random>

#include "unmt/error.hpp"
#include "unmt/projection/projection.hpp"

using namespace unmt;

namespace {

// Random orthogonal matrix by Gram-Schmidt on Gaussian columns.
std::vector<double> random_rotation(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<double> q(d * d);
  for (auto& x : q) x = g(rng);
  for (std::size_t c = 0; c < d; ++c) {
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t p = 0; p < c; ++p) {
        double dot = 0;
        for (std::size_t r = 0; r < d; ++r) dot += q[r * d + c] * q[r * d + p];
        for (std::size_t r = 0; r < d; ++r) q[r * d + c] -= dot * q[r * d + p];
      }
    double n = 0;
    for (std::size_t r = 0; r < d; ++r) n += q[r * d + c] * q[r * d + c];
    n = std::sqrt(n);
    for (std::size_t r = 0; r < d; ++r) q[r * d + c] /= n;
  }
  return q;
}

struct Planted {
  EmbeddingTable queries, keys;
  SeedDictionary seeds;
  std::vector<double> rotation;
};

// keys = queries * R on every token; seeds are the identity pairing.
Planted planted(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<std::string> qt, kt;
  std::vector<double> qv(n * d);
  for (auto& x : qv) x = g(rng);
  for (std::size_t i = 0; i < n; ++i) {
    qt.push_back("s" + std::to_string(i));
    kt.push_back("u" + std::to_string(i));
  }
  auto queries = normalize_rows(EmbeddingTable("xx", qt, d, qv));
  auto r = random_rotation(d, rng);
  std::vector<double> kv(n * d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) kv[i * d + b] += queries.row(i)[a] * r[a * d + b];
  auto keys = normalize_rows(EmbeddingTable("en", kt, d, kv));
  SeedDictionary seeds{"xx", {}};
  for (std::size_t i = 0; i < n; ++i) seeds.entries.push_back({qt[i], kt[i], 1});
  return {queries, keys, seeds, r};
}

}  // namespace

TEST_CASE("extract_seeds") {
  std::vector<TokenPair> s;
  for (int i = 0; i < 5; ++i) s.emplace_back("gato", "cat");
  s.emplace_back("gato", "dog");
  auto d = extract_seeds(s, 2);
  REQUIRE(d.entries.size() == 1);
  CHECK(d.entries[0].source == "gato");
  CHECK(d.entries[0].target == "cat");
  CHECK(d.entries[0].count == 5);

  std::vector<TokenPair> three{{"a", "x"}, {"a", "x"}, {"b", "y"}, {"b", "y"}, {"b", "y"}, {"c", "z"}, {"c", "z"}};
  auto one = extract_seeds(three, 1, 1);
  REQUIRE(one.entries.size() == 1);
  CHECK(one.entries[0].source == "b");

  std::vector<TokenPair> tie{{"w", "zz"}, {"w", "aa"}};
  CHECK(extract_seeds(tie, 1).entries[0].target == "aa");

  CHECK_THROWS_AS(extract_seeds(s, 10), InputError);
  CHECK_THROWS_AS(extract_seeds(std::vector<TokenPair>{}, 1), InputError);
}

TEST_CASE("extract_seeds matches a hash-count oracle") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<int> src(0, 30), tgt(0, 8);
    std::vector<TokenPair> stream;
    for (int i = 0; i < 400; ++i) stream.emplace_back("s" + std::to_string(src(rng)), "t" + std::to_string(tgt(rng)));
    std::unordered_map<std::string, std::unordered_map<std::string, long>> counts;
    for (auto& [a, b] : stream) counts[a][b]++;
    const long min_count = 3;
    std::map<std::string, std::pair<std::string, long>> expect;
    for (auto& [a, m] : counts) {
      std::string best;
      long c = -1;
      for (auto& [b, n] : m)
        if (n > c || (n == c && b < best)) {
          best = b;
          c = n;
        }
      if (c >= min_count) expect[a] = {best, c};
    }
    auto got = extract_seeds(stream, min_count, 1000);
    REQUIRE(got.entries.size() == expect.size());
    for (std::size_t i = 0; i < got.entries.size(); ++i) {
      auto& e = got.entries[i];
      CHECK(expect.at(e.source).first == e.target);
      CHECK(expect.at(e.source).second == e.count);
      if (i > 0) CHECK(got.entries[i - 1].count >= e.count);
    }
  }
}

TEST_CASE("cooccurrence alignments recover a word-for-word lexicon") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> w(0, 19), len(3, 7);
  std::vector<SentencePair> pairs;
  for (int i = 0; i < 300; ++i) {
    SentencePair p;
    for (int k = len(rng); k > 0; --k) {
      int x = w(rng);
      p.source.push_back("f" + std::to_string(x));
      p.target.push_back("e" + std::to_string(x));
    }
    std::shuffle(p.target.begin(), p.target.end(), rng);
    pairs.push_back(p);
  }
  auto seeds = extract_seeds(cooccurrence_alignments(pairs), 2);
  CHECK(seeds.entries.size() == 20);
  for (auto& e : seeds.entries) CHECK(e.source.substr(1) == e.target.substr(1));
}

TEST_CASE("seed file round trip") {
  SeedDictionary d{"ro", {{"casa", "house", 7}, {"apa", "water", 3}}};
  auto p = std::filesystem::temp_directory_path() / "unmt_seeds.tsv";
  save_seeds(d, p);
  auto e = load_seeds(p, "ro");
  REQUIRE(e.entries.size() == 2);
  CHECK(e.entries[1].target == "water");
  CHECK(e.entries[1].count == 3);
}

TEST_CASE("procrustes on aligned spaces is the identity") {
  auto pl = planted(30, 8, 1);
  auto map = solve_procrustes(pl.queries, pl.queries, SeedDictionary{"xx", [&] {
                                std::vector<SeedPair> s;
                                for (auto& t : pl.queries.tokens()) s.push_back({t, t, 1});
                                return s;
                              }()});
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) CHECK(std::abs(map.matrix.at(i, j) - (i == j ? 1.0 : 0.0)) < 1e-8);
}

TEST_CASE("procrustes recovers a planted rotation") {
  for (std::size_t d : {5u, 20u, 50u}) {
    auto pl = planted(200, d, d);
    auto map = solve_procrustes(pl.queries, pl.keys, pl.seeds);
    double err = 0;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) err = std::max(err, std::abs(map.matrix.at(i, j) - pl.rotation[i * d + j]));
    CHECK(err < 1e-6);
    CHECK(orthogonality_residual(map.matrix) < 1e-8);
    CHECK(map.warnings.empty());

    Tensor id = Tensor::identity(d);
    CHECK(procrustes_objective(pl.queries, pl.keys, pl.seeds, map.matrix) >=
          procrustes_objective(pl.queries, pl.keys, pl.seeds, id));

    auto proj = project(pl.queries, map);
    for (std::size_t i = 0; i < proj.size(); ++i) {
      double dot = 0;
      for (std::size_t k = 0; k < d; ++k) dot += proj.row(i)[k] * pl.keys.row(i)[k];
      CHECK(1.0 - dot < 1e-5);
    }
  }
}

TEST_CASE("procrustes warnings and errors") {
  auto pl = planted(10, 6, 3);
  auto map = solve_procrustes(pl.queries, pl.keys, pl.seeds);
  CHECK_FALSE(map.warnings.empty());  // fewer than 50 seeds

  SeedDictionary two{"xx", {pl.seeds.entries[0], pl.seeds.entries[1]}};
  auto deficient = solve_procrustes(pl.queries, pl.keys, two);
  CHECK(orthogonality_residual(deficient.matrix) < 1e-8);
  bool rank_warning = false;
  for (auto& w : deficient.warnings) rank_warning |= w.find("rank") != std::string::npos;
  CHECK(rank_warning);

  SeedDictionary missing = pl.seeds;
  missing.entries.push_back({"nope", "u0", 1});
  try {
    solve_procrustes(pl.queries, pl.keys, missing);
    FAIL("expected LookupError");
  } catch (const LookupError& e) {
    CHECK(std::string(e.what()).find("nope") != std::string::npos);
  }
  CHECK(filter_seeds(missing, pl.queries, pl.keys).entries.size() == 10);
  CHECK_THROWS_AS(solve_procrustes(pl.queries, pl.keys, SeedDictionary{"xx", {pl.seeds.entries[0]}}), InputError);
}

TEST_CASE("projection is an isometry") {
  auto pl = planted(60, 12, 8);
  auto map = solve_procrustes(pl.queries, pl.keys, pl.seeds);
  auto before = pl.queries;
  auto after = project(before, map);
  for (std::size_t i = 0; i < 60; i += 3)
    for (std::size_t j = 0; j < 60; j += 7) {
      double a = 0, b = 0;
      for (std::size_t k = 0; k < 12; ++k) {
        a += before.row(i)[k] * before.row(j)[k];
        b += after.row(i)[k] * after.row(j)[k];
      }
      CHECK(std::abs(a - b) < 1e-10);
    }

  OrthogonalMap id{"xx", Tensor::identity(12), {}};
  auto same = project(before, id);
  for (std::size_t i = 0; i < before.values().size(); ++i) CHECK(std::abs(same.values()[i] - before.values()[i]) < 1e-15);

  OrthogonalMap wrong{"xx", Tensor::identity(5), {}};
  CHECK_THROWS_AS(project(before, wrong), DimensionError);
}

TEST_CASE("corrupted seeds still improve alignment") {
  auto pl = planted(200, 20, 17);
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> pick(0, 199);
  auto seeds = pl.seeds;
  for (std::size_t i = 0; i < 20; ++i) seeds.entries[i * 10].target = "u" + std::to_string(pick(rng));
  auto map = solve_procrustes(pl.queries, pl.keys, seeds);
  auto proj = project(pl.queries, map);
  double raw = 0, aligned = 0;
  for (std::size_t i = 0; i < 200; ++i)
    for (std::size_t k = 0; k < 20; ++k) {
      raw += pl.queries.row(i)[k] * pl.keys.row(i)[k];
      aligned += proj.row(i)[k] * pl.keys.row(i)[k];
    }
  CHECK(aligned > raw);
}

TEST_CASE("map file round trip is exact") {
  auto pl = planted(80, 9, 21);
  auto map = solve_procrustes(pl.queries, pl.keys, pl.seeds);
  auto p = std::filesystem::temp_directory_path() / "unmt_map.txt";
  save_map(map, p);
  auto back = load_map(p, "xx");
  CHECK(std::equal(back.matrix.data().begin(), back.matrix.data().end(), map.matrix.data().begin()));
}
