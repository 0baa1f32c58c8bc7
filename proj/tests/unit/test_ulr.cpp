#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "test_util.hpp"
#include "unmt/error.hpp"
#include "unmt/tensor/adam.hpp"
#include "unmt/tensor/grad_check.hpp"
#include "unmt/tensor/ops.hpp"
#include "unmt/ulr/ulr.hpp"

using namespace unmt;
using unmt::testing::random_tensor;

namespace {

EmbeddingTable random_unit_table(const std::string& prefix, std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<std::string> t;
  std::vector<double> v(n * d);
  for (std::size_t i = 0; i < n; ++i) t.push_back(prefix + std::to_string(i));
  for (auto& x : v) x = g(rng);
  return normalize_rows(EmbeddingTable("", t, d, v));
}

EmbeddingTable basis_table(std::size_t n, std::size_t d) {
  std::vector<std::string> t;
  std::vector<double> v(n * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    t.push_back("u" + std::to_string(i));
    v[i * d + i] = 1.0;
  }
  return normalize_rows(EmbeddingTable("en", t, d, v));
}

// Query space whose row for "x<i>" equals key row i.
QuerySpace mirror_queries(const EmbeddingTable& keys, std::unordered_map<std::string, long> counts = {}) {
  std::vector<std::string> t;
  for (std::size_t i = 0; i < keys.size(); ++i) t.push_back("x" + std::to_string(i));
  auto vals = std::vector<double>(keys.values().begin(), keys.values().end());
  return QuerySpace("xx", normalize_rows(EmbeddingTable("xx", t, keys.dim(), vals)), counts);
}

}  // namespace

TEST_CASE("similarity") {
  std::mt19937_64 rng(1);
  UniversalTokenSet uts(basis_table(4, 4), 3, rng);
  auto qs = mirror_queries(uts.keys());
  auto d = similarity(uts, qs, "x2");
  REQUIRE(d.cols() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(d.at(0, i) == (i == 2 ? 1.0 : 0.0));

  Tensor a = uts.transform();
  for (auto& x : a.data_mut()) x = 0.0;
  d = similarity(uts, qs, "x2");
  for (double v : d.data()) CHECK(v == 0.0);

  // Explicit bilinear form E^K(u) A E^Q(x)^T.
  auto keys = random_unit_table("u", 4, 5, rng);
  UniversalTokenSet r(keys, 3, rng);
  auto qtable = random_unit_table("x", 3, 5, rng);
  QuerySpace q2("xx", qtable, std::unordered_map<std::string, long>{});
  Tensor ra = r.transform();
  for (auto& x : ra.data_mut()) x = std::uniform_real_distribution<double>(-1, 1)(rng);
  for (std::size_t x = 0; x < 3; ++x) {
    auto got = similarity(r, q2, "x" + std::to_string(x));
    for (std::size_t u = 0; u < 4; ++u) {
      double expect = 0;
      for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) expect += keys.row(u)[i] * ra.at(i, j) * qtable.row(x)[j];
      CHECK(std::abs(got.at(0, u) - expect) < 1e-12);
    }
  }

  QuerySpace wrong("xx", random_unit_table("x", 2, 3, rng), std::unordered_map<std::string, long>{});
  CHECK_THROWS_AS(similarity(r, wrong, "x0"), ConfigError);
}

TEST_CASE("token_distribution") {
  UlrConfig cfg;
  auto q = token_distribution(Tensor({1, 5}, {0.3, 0.3, 0.3, 0.3, 0.3}), cfg);
  for (double v : q.data()) CHECK(std::abs(v - 0.2) < 1e-15);

  q = token_distribution(Tensor({1, 4}, {1, 0, 0, 0}), cfg);
  CHECK(q.at(0, 0) > 1 - 1e-8);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = random_tensor({1, 50}, rng, -1, 1);
    auto p = token_distribution(s, cfg);
    double total = std::accumulate(p.data().begin(), p.data().end(), 0.0);
    CHECK(std::abs(total - 1.0) < 1e-12);

    // Rescaling scores by c and tau by c leaves q unchanged.
    UlrConfig scaled = cfg;
    scaled.tau = cfg.tau * 3.0;
    auto p3 = token_distribution(ops::scale(s, 3.0), scaled);
    CHECK(unmt::testing::max_abs_diff(p.data(), p3.data()) < 1e-12);
  }

  UlrConfig top2 = cfg;
  top2.top_n_universal = 2;
  q = token_distribution(Tensor({1, 4}, {0.1, 0.5, 0.4, -1.0}), top2);
  CHECK(q.at(0, 0) == 0.0);
  CHECK(q.at(0, 3) == 0.0);
  CHECK(std::abs(q.at(0, 1) + q.at(0, 2) - 1.0) < 1e-12);
  const double e = std::exp(0.1 / 0.05);
  CHECK(std::abs(q.at(0, 1) - e / (e + 1.0)) < 1e-12);

  UlrConfig bad = cfg;
  bad.tau = 0.0;
  CHECK_THROWS_AS(token_distribution(Tensor({1, 2}, {0, 1}), bad), ConfigError);
}

TEST_CASE("universal_embedding") {
  std::mt19937_64 rng(5);
  UniversalTokenSet uts(basis_table(3, 3), 4, rng);
  const Tensor& eu = uts.universal();

  auto one = universal_embedding(uts, Tensor({1, 3}, {0, 1, 0}));
  for (std::size_t j = 0; j < 4; ++j) CHECK(one.at(0, j) == eu.at(1, j));

  auto mean = universal_embedding(uts, Tensor({1, 3}, {1.0 / 3, 1.0 / 3, 1.0 / 3}));
  for (std::size_t j = 0; j < 4; ++j)
    CHECK(std::abs(mean.at(0, j) - (eu.at(0, j) + eu.at(1, j) + eu.at(2, j)) / 3.0) < 1e-15);

  auto mix = universal_embedding(uts, Tensor({1, 3}, {0.5, 0.3, 0.2}));
  for (std::size_t j = 0; j < 4; ++j) {
    const double expect = 0.5 * eu.at(0, j) + 0.3 * eu.at(1, j) + 0.2 * eu.at(2, j);
    CHECK(std::abs(mix.at(0, j) - expect) < 1e-15);
  }
  CHECK_THROWS_AS(universal_embedding(uts, Tensor({1, 2}, {0.5, 0.5})), DimensionError);
}

TEST_CASE("interpolated embedding and alpha gating") {
  std::mt19937_64 rng(7);
  UniversalTokenSet uts(basis_table(4, 4), 3, rng);
  // x0 is the most frequent token, x3 the least.
  auto qs = mirror_queries(uts.keys(), {{"x0", 40}, {"x1", 30}, {"x2", 20}, {"x3", 10}});
  Vocabulary vocab;
  for (int i = 0; i < 4; ++i) vocab.add("x" + std::to_string(i));
  UlrConfig cfg;
  cfg.top_frequent_k = 2;
  InterpolationRule rule(vocab, qs, cfg.top_frequent_k, 3, rng);
  CHECK(rule.alpha(kUnk) == 1.0);
  CHECK(rule.alpha(*vocab.find("x1")) == 1.0);
  CHECK(rule.alpha(*vocab.find("x2")) == 0.0);

  for (std::string tok : {"x1", "x3"}) {
    auto got = interpolated_embedding(rule, uts, qs, tok, cfg);
    auto mixture = universal_embedding(uts, token_distribution(similarity(uts, qs, tok), cfg));
    const std::size_t id = *vocab.find(tok);
    for (std::size_t j = 0; j < 3; ++j) {
      const double expect = rule.alpha(id) * rule.table().at(id, j) + mixture.at(0, j);
      CHECK(std::abs(got.at(0, j) - expect) < 1e-15);
    }
  }

  // Gradient into E^I vanishes for rare tokens and not for frequent ones.
  for (std::string tok : {"x1", "x3"}) {
    Tensor ei = rule.table();
    ei.zero_grad();
    Tape tape;
    {
      TapeScope scope(tape);
      auto out = ops::sum(interpolated_embedding(rule, uts, qs, tok, cfg));
      tape.backward(out);
    }
    const std::size_t id = *vocab.find(tok);
    double g = 0;
    for (std::size_t j = 0; j < 3; ++j) g += std::abs(ei.grad()[id * 3 + j]);
    if (tok == "x1") CHECK(g > 0.0);
    else CHECK(g == 0.0);
  }

  // Tokens outside the vocabulary and without a query vector still embed.
  auto unk = interpolated_embedding(rule, uts, qs, "never-seen", cfg);
  for (double v : unk.data()) CHECK(std::isfinite(v));
  double norm = 0;
  for (double v : unk.data()) norm += v * v;
  CHECK(norm > 0.0);
}

TEST_CASE("batched embedding agrees with the per-token path and differentiates") {
  std::mt19937_64 rng(9);
  auto keys = random_unit_table("u", 12, 6, rng);
  UniversalTokenSet uts(keys, 5, rng);
  std::unordered_map<std::string, long> counts;
  std::vector<std::string> qt;
  for (int i = 0; i < 10; ++i) {
    qt.push_back("w" + std::to_string(i));
    counts[qt.back()] = 100 - i;
  }
  auto qtab = random_unit_table("w", 10, 6, rng);
  QuerySpace qs("xx", qtab, counts);
  Vocabulary vocab;
  for (auto& t : qt) vocab.add(t);
  vocab.add("no-vector");
  UlrConfig cfg;
  cfg.tau = 0.5;
  cfg.top_frequent_k = 4;
  InterpolationRule rule(vocab, qs, cfg.top_frequent_k, 5, rng);
  Tensor a = uts.transform();
  for (auto& x : a.data_mut()) x += std::uniform_real_distribution<double>(-0.2, 0.2)(rng);

  std::vector<std::size_t> ids{4, 7, 4, 13, 3, 9, 14, 0};
  auto batch = ulr_embed(rule, uts, qs, ids, cfg);
  REQUIRE(batch.rows() == ids.size());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    auto one = interpolated_embedding(rule, uts, qs, vocab.token(ids[r]), cfg);
    for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(batch.at(r, j) - one.at(0, j)) < 1e-14);
  }

  ParameterSet params{{"A", uts.transform()}, {"EU", uts.universal()}, {"EI", rule.table()}};
  auto weights = random_tensor({ids.size(), 5}, rng);
  for (std::optional<std::size_t> top : {std::optional<std::size_t>{}, std::optional<std::size_t>{3}}) {
    cfg.top_n_universal = top;
    auto report = grad_check([&] { return ops::sum(ops::mul(ulr_embed(rule, uts, qs, ids, cfg), weights)); },
                             params);
    CHECK(report.max_rel_error < 1e-6);
  }
  CHECK_THROWS_AS(ulr_embed(rule, uts, qs, std::vector<std::size_t>{99}, cfg), LookupError);
}

TEST_CASE("planted projection: top-1 universal token is the planted translation") {
  std::mt19937_64 rng(13);
  auto keys = random_unit_table("u", 200, 50, rng);
  UniversalTokenSet uts(keys, 8, rng);
  auto qs = mirror_queries(keys);
  UlrConfig cfg;
  int hits = 0;
  for (std::size_t i = 0; i < 200; ++i) {
    auto q = token_distribution(similarity(uts, qs, "x" + std::to_string(i)), cfg);
    auto d = q.data();
    const auto best = static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
    hits += best == i;
    CHECK(std::abs(std::accumulate(d.begin(), d.end(), 0.0) - 1.0) < 1e-12);
  }
  CHECK(hits >= 190);
}

TEST_CASE("training step leaves keys and queries bit-identical") {
  std::mt19937_64 rng(17);
  auto keys = random_unit_table("u", 8, 4, rng);
  UniversalTokenSet uts(keys, 3, rng);
  auto qs = mirror_queries(keys, {{"x0", 3}, {"x1", 2}});
  Vocabulary vocab;
  for (int i = 0; i < 8; ++i) vocab.add("x" + std::to_string(i));
  InterpolationRule rule(vocab, qs, 1, 3, rng);
  UlrConfig cfg;
  cfg.tau = 0.3;
  const std::vector<double> k0(uts.key_matrix().data().begin(), uts.key_matrix().data().end());
  const std::vector<double> q0(qs.table().values().begin(), qs.table().values().end());
  const std::vector<double> a0(uts.transform().data().begin(), uts.transform().data().end());
  const std::vector<double> u0(uts.universal().data().begin(), uts.universal().data().end());

  ParameterSet params{{"A", uts.transform()}, {"EU", uts.universal()}, {"EI", rule.table()}};
  AdamState adam(params, {});
  auto target = random_tensor({5, 3}, rng);
  std::vector<std::size_t> ids{4, 5, 6, 7, 8};
  for (int step = 0; step < 100; ++step) {
    zero_gradients(params);
    Tape tape;
    {
      TapeScope scope(tape);
      auto diff = ops::sub(ulr_embed(rule, uts, qs, ids, cfg), target);
      tape.backward(ops::sum(ops::mul(diff, diff)));
    }
    adam_step(params, adam);
  }
  CHECK(std::equal(k0.begin(), k0.end(), uts.key_matrix().data().begin()));
  CHECK(std::equal(q0.begin(), q0.end(), qs.table().values().begin()));
  CHECK_FALSE(uts.key_matrix().requires_grad());
  CHECK_FALSE(std::equal(a0.begin(), a0.end(), uts.transform().data().begin()));
  CHECK_FALSE(std::equal(u0.begin(), u0.end(), uts.universal().data().begin()));
}
