#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "unmt/tensor/tensor.hpp"

// Differentiable operations. All tensors are treated as matrices
// (rows() x cols()). Results record onto the active tape when any input
// requires a gradient.
namespace unmt::ops {

Tensor matmul(const Tensor& a, const Tensor& b);
// a * b^T
Tensor matmul_bt(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// x[r][c] + bias[c]
Tensor add_bias(const Tensor& x, const Tensor& bias);

Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);

Tensor softmax_rows(const Tensor& x, double tau = 1.0);
// Entries with keep[i] == 0 get probability exactly 0 and receive no gradient.
Tensor masked_softmax_rows(const Tensor& x, std::span<const unsigned char> keep,
                           double tau = 1.0);

Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);

// out[i] = table[ids[i]]; backward scatter-adds.
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids);
// out[r] = weights[r] * x[r]
Tensor scale_rows(const Tensor& x, std::span<const double> weights);
// out[r] = keep[r] ? fresh[r] : carried[r]
Tensor select_rows(const Tensor& fresh, const Tensor& carried, std::span<const unsigned char> keep);

Tensor sum(const Tensor& x);

// Sum over rows with weight w_r != 0 of w_r * -log softmax(logits[r])[targets[r]].
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets,
                     std::span<const double> weights);

// LSTM pieces. gates is B x 4H laid out as [input | forget | cell | output].
// lstm_cell returns c = sigmoid(f) * c_prev + sigmoid(i) * tanh(g).
Tensor lstm_cell(const Tensor& gates, const Tensor& c_prev);
// h = sigmoid(o) * tanh(c)
Tensor lstm_output(const Tensor& gates, const Tensor& c);

// Memory tensors hold T time steps of a B-row batch as (T*B) x D, with the
// row for step t and batch entry b at t*B + b.
//
// score[b][t] = v . tanh(keys[t*B+b] + query[b])
Tensor additive_scores(const Tensor& keys, const Tensor& query, const Tensor& v);
// score[b][t] = keys[t*B+b] . query[b]
Tensor dot_scores(const Tensor& keys, const Tensor& query);
// out[b] = sum_t weights[b][t] * memory[t*B+b]
Tensor attend(const Tensor& weights, const Tensor& memory);

// out[n] = sum_k gate[n][k] * experts[k][n]
Tensor mix_experts(const Tensor& gate, std::span<const Tensor> experts);

// Inverted dropout; identity when rate == 0.
Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng);

}  // namespace unmt::ops
