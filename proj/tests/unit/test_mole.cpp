#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "test_util.hpp"
#include "unmt/error.hpp"
#include "unmt/mole/mole.hpp"
#include "unmt/tensor/grad_check.hpp"
#include "unmt/tensor/ops.hpp"

using namespace unmt;
using unmt::testing::random_tensor;

namespace {

Tensor log_of(std::vector<double> p, std::size_t k) {
  for (auto& x : p) x = std::log(x);
  return Tensor({p.size() / k, k}, p);
}

std::vector<double> snapshot(const ParameterSet& ps) {
  std::vector<double> out;
  for (auto& p : ps) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

}  // namespace

TEST_CASE("single expert passes its own output") {
  std::mt19937_64 rng(1);
  MoleLayer layer({"aa"}, 4, 4, rng);
  auto h = random_tensor({5, 4}, rng);
  auto out = mole_forward(layer, h);
  auto f = layer.experts()[0].forward(h);
  CHECK(unmt::testing::max_abs_diff(out.hidden.data(), f.data()) < 1e-15);
  for (double p : out.gate_probs.data()) CHECK(p == 1.0);
}

TEST_CASE("zeroed gate averages the experts") {
  std::mt19937_64 rng(2);
  MoleLayer layer({"aa", "bb", "cc"}, 3, 5, rng);
  Tensor gw = layer.gate().w, gb = layer.gate().b;
  for (auto& x : gw.data_mut()) x = 0.0;
  for (auto& x : gb.data_mut()) x = 0.0;
  auto h = random_tensor({4, 3}, rng);
  auto out = mole_forward(layer, h);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 3; ++c) {
      double m = 0;
      for (const auto& e : layer.experts()) m += e.forward(h).at(r, c);
      CHECK(std::abs(out.hidden.at(r, c) - m / 3.0) < 1e-15);
    }
}

TEST_CASE("two experts match a hand-evaluated forward pass") {
  // h = [1, -1]; expert k: tanh(h W1 + b1) W2 + b2; gate logits h Wg + bg.
  ExpertNetwork e1{"aa", Tensor({2, 2}, {0.5, 0, 0, 0.5}), Tensor({2}, {0, 0}), Tensor({2, 2}, {1, 0, 0, 1}),
                   Tensor({2}, {0, 0})};
  ExpertNetwork e2{"bb", Tensor({2, 2}, {1, 1, 0, 1}), Tensor({2}, {0.1, -0.1}), Tensor({2, 2}, {2, 0, 1, 1}),
                   Tensor({2}, {0.5, 0})};
  GateNetwork gate{Tensor({2, 2}, {1, 0, 0, 1}), Tensor({2}, {0, 0})};
  MoleLayer layer({e1, e2}, gate, 1.0);
  auto out = mole_forward(layer, Tensor({1, 2}, {1, -1}));

  const double a1 = std::tanh(0.5), a2 = std::tanh(-0.5);
  const double f1[2] = {a1, a2};
  const double z1 = std::tanh(1.0 + 0.1), z2 = std::tanh(0.0 - 0.1);
  const double f2[2] = {2 * z1 + z2 + 0.5, z2};
  // logits [1, -1]
  const double p1 = std::exp(1.0) / (std::exp(1.0) + std::exp(-1.0)), p2 = 1 - p1;
  CHECK(std::abs(out.gate_probs.at(0, 0) - p1) < 1e-15);
  for (int c = 0; c < 2; ++c) CHECK(std::abs(out.hidden.at(0, c) - (p1 * f1[c] + p2 * f2[c])) < 1e-14);
}

TEST_CASE("gate probabilities and permutation equivariance") {
  std::mt19937_64 rng(3);
  MoleLayer layer({"aa", "bb", "cc", "dd"}, 6, 6, rng, 0.5);
  auto h = random_tensor({9, 6}, rng);
  auto out = mole_forward(layer, h);
  for (std::size_t r = 0; r < 9; ++r) {
    double s = 0;
    for (std::size_t k = 0; k < 4; ++k) s += out.gate_probs.at(r, k);
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  std::vector<std::size_t> perm(9);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto permuted = mole_forward(layer, ops::gather_rows(h, perm));
  for (std::size_t r = 0; r < 9; ++r)
    for (std::size_t c = 0; c < 6; ++c) CHECK(permuted.hidden.at(r, c) == out.hidden.at(perm[r], c));

  CHECK_THROWS_AS(mole_forward(layer, random_tensor({2, 5}, rng)), ConfigError);
}

TEST_CASE("gate loss") {
  CHECK(gate_loss(log_of({1e-300, 1, 1e-300, 1e-300, 1, 1e-300}, 3), 1).item() == doctest::Approx(0.0));
  CHECK(gate_loss(Tensor::zeros({3, 4}), 2).item() == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  const double expect = -(std::log(0.5) + std::log(0.25)) / 2;
  CHECK(std::abs(gate_loss(log_of({0.5, 0.5, 0.25, 0.75}, 2), 0).item() - expect) < 1e-14);
  // Padded positions do not count.
  std::vector<double> w{1, 0};
  CHECK(std::abs(gate_loss(log_of({0.5, 0.5, 0.25, 0.75}, 2), 0, w).item() + std::log(0.5)) < 1e-14);
  CHECK_THROWS_AS(gate_loss(Tensor::zeros({2, 3}), 3), ParameterError);
}

TEST_CASE("freeze rule") {
  std::mt19937_64 rng(4);
  const std::size_t d = 4;
  MoleLayer layer({"aa", "bb"}, d, d, rng, 0.3);
  Tensor enc_w = random_tensor({3, d}, rng, -0.5, 0.5, true);
  Tensor out_w = random_tensor({d, 5}, rng, -0.5, 0.5, true);
  ParameterSet params{{"encoder.w", enc_w}, {"out.w", out_w}};
  for (auto& p : layer.parameters()) params.push_back(p);
  AdamState adam(params, {0.01});
  auto x = random_tensor({6, 3}, rng);
  std::vector<std::size_t> targets{0, 1, 2, 3, 4, 0};
  std::vector<double> w(6, 1.0 / 6);

  auto step = [&](const std::string& lang, double* nll_out = nullptr, double* total_out = nullptr) {
    auto decision = apply_freeze_rule(layer, params, lang, {"low"});
    zero_gradients(params);
    Tape tape;
    {
      TapeScope scope(tape);
      auto m = mole_forward(layer, ops::tanh(ops::matmul(x, enc_w)));
      auto nll = ops::cross_entropy(ops::matmul(m.hidden, out_w), targets, w);
      auto loss = nll;
      if (decision.add_gate_loss) {
        loss = ops::add(loss, ops::scale(gate_loss(m.gate_logits, *decision.expert), layer.gate_loss_weight()));
      }
      if (nll_out) *nll_out = nll.item();
      if (total_out) *total_out = loss.item();
      tape.backward(loss);
    }
    adam_step(params, adam, decision.update_mask);
    return decision;
  };

  const auto mole_before = snapshot(layer.parameters());
  const auto enc_before = std::vector<double>(enc_w.data().begin(), enc_w.data().end());
  auto low = step("low");
  CHECK_FALSE(low.add_gate_loss);
  CHECK(snapshot(layer.parameters()) == mole_before);
  CHECK(std::vector<double>(enc_w.data().begin(), enc_w.data().end()) != enc_before);

  double nll = 0, total = 0;
  auto aux = step("bb", &nll, &total);
  CHECK(aux.add_gate_loss);
  CHECK(aux.expert == 1u);
  CHECK(snapshot(layer.parameters()) != mole_before);
  CHECK(total > nll);
}

TEST_CASE("loss decomposition on a fixed forward pass") {
  std::mt19937_64 rng(5);
  MoleLayer layer({"aa", "bb", "cc"}, 4, 3, rng, 0.4, 1.0);
  auto h = random_tensor({5, 4}, rng);
  auto out_w = random_tensor({4, 6}, rng);
  std::vector<std::size_t> t{0, 1, 2, 3, 4};
  std::vector<double> w(5, 0.2);
  auto m = mole_forward(layer, h);
  const double nll = ops::cross_entropy(ops::matmul(m.hidden, out_w), t, w).item();
  double g = 0;
  for (std::size_t r = 0; r < 5; ++r) g -= std::log(m.gate_probs.at(r, 2));
  g /= 5;
  const double total = ops::add(ops::cross_entropy(ops::matmul(m.hidden, out_w), t, w), gate_loss(m.gate_logits, 2)).item();
  CHECK(std::abs(total - (nll + g)) < 1e-13);
}

TEST_CASE("gradient check through experts and gate") {
  std::mt19937_64 rng(6);
  MoleLayer layer({"aa", "bb", "cc"}, 4, 5, rng, 0.5);
  Tensor h = random_tensor({6, 4}, rng, -1, 1, true);
  auto out_w = random_tensor({4, 7}, rng);
  std::vector<std::size_t> t{0, 1, 2, 3, 4, 6};
  std::vector<double> w{1, 1, 1, 1, 0, 1};
  ParameterSet params = layer.parameters();
  params.push_back({"h", h});
  auto report = grad_check(
      [&] {
        auto m = mole_forward(layer, h);
        return ops::add(ops::cross_entropy(ops::matmul(m.hidden, out_w), t, w), gate_loss(m.gate_logits, 1, w));
      },
      params);
  CHECK(report.max_rel_error < 1e-4);
}
