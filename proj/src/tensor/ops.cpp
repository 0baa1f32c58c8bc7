#include "unmt/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <string>

#include "unmt/error.hpp"
#include "unmt/tensor/kernels.hpp"

namespace unmt::ops {

namespace {

using detail::Node;

Tensor make_result(Shape shape, std::vector<double> value, const std::vector<Tensor>& inputs,
                   std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  Tape* tape = active_tape();
  const bool track = tape != nullptr && std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) {
                       return t.requires_grad();
                     });
  if (track) {
    node->requires_grad = true;
    node->grad.assign(node->value.size(), 0.0);
    for (const auto& t : inputs) node->inputs.push_back(t.node());
    node->backward = std::move(backward);
    tape->record(node);
  }
  return Tensor(std::move(node));
}

Tensor make_result(Shape shape, std::vector<double> value, std::initializer_list<Tensor> inputs,
                   std::function<void(Node&)> backward) {
  return make_result(std::move(shape), std::move(value), std::vector<Tensor>(inputs),
                     std::move(backward));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

inline double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions disagree for " + shape_string(a.shape()) +
                         " and " + shape_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  kernels::par::gemm_nn(a.data(), b.data(), out, m, k, n);
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    auto& na = *self.inputs[0];
    auto& nb = *self.inputs[1];
    if (na.requires_grad) kernels::par::gemm_nt(self.grad, nb.value, na.grad, m, n, k);
    if (nb.requires_grad) kernels::par::gemm_tn(na.value, self.grad, nb.grad, m, k, n);
  });
}

Tensor matmul_bt(const Tensor& a, const Tensor& b) {
  const auto m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    throw DimensionError("matmul_bt: inner dimensions disagree for " + shape_string(a.shape()) +
                         " and " + shape_string(b.shape()) + "^T");
  }
  std::vector<double> out(m * n, 0.0);
  kernels::par::gemm_nt(a.data(), b.data(), out, m, k, n);
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    auto& na = *self.inputs[0];
    auto& nb = *self.inputs[1];
    if (na.requires_grad) kernels::par::gemm_nn(self.grad, nb.value, na.grad, m, n, k);
    if (nb.requires_grad) kernels::par::gemm_tn(self.grad, na.value, nb.grad, m, n, k);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (auto& in : self.inputs) {
      if (!in->requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) in->grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    auto& na = *self.inputs[0];
    auto& nb = *self.inputs[1];
    if (na.requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) na.grad[i] += self.grad[i];
    }
    if (nb.requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) nb.grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    auto& na = *self.inputs[0];
    auto& nb = *self.inputs[1];
    if (na.requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) na.grad[i] += self.grad[i] * nb.value[i];
    }
    if (nb.requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) nb.grad[i] += self.grad[i] * na.value[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * factor;
  return make_result(a.shape(), std::move(out), {a}, [factor](Node& self) {
    auto& na = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) na.grad[i] += self.grad[i] * factor;
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  const auto rows = x.rows(), cols = x.cols();
  if (bias.numel() != cols) {
    throw DimensionError("add_bias: bias " + shape_string(bias.shape()) + " for input " +
                         shape_string(x.shape()));
  }
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x.data()[r * cols + c] + bias.data()[c];
  }
  return make_result(x.shape(), std::move(out), {x, bias}, [rows, cols](Node& self) {
    auto& nx = *self.inputs[0];
    auto& nb = *self.inputs[1];
    if (nx.requires_grad) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) nx.grad[i] += self.grad[i];
    }
    if (nb.requires_grad) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) nb.grad[c] += self.grad[r * cols + c];
      }
    }
  });
}

Tensor tanh(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x.data()[i]);
  return make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    auto& nx = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double y = self.value[i];
      nx.grad[i] += self.grad[i] * (1.0 - y * y);
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigm(x.data()[i]);
  return make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    auto& nx = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double y = self.value[i];
      nx.grad[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

namespace {

void softmax_backward(Node& self, std::size_t rows, std::size_t cols, double tau) {
  auto& nx = *self.inputs[0];
  for (std::size_t r = 0; r < rows; ++r) {
    const double* y = &self.value[r * cols];
    const double* g = &self.grad[r * cols];
    double dot = 0.0;
    for (std::size_t c = 0; c < cols; ++c) dot += g[c] * y[c];
    double* dx = &nx.grad[r * cols];
    for (std::size_t c = 0; c < cols; ++c) dx[c] += y[c] * (g[c] - dot) / tau;
  }
}

}  // namespace

Tensor softmax_rows(const Tensor& x, double tau) {
  if (!(tau > 0.0)) throw ParameterError("softmax_rows: temperature must be positive");
  const auto rows = x.rows(), cols = x.cols();
  std::vector<double> out(x.numel());
  kernels::par::softmax_rows(x.data(), out, rows, cols, tau);
  return make_result(x.shape(), std::move(out), {x}, [rows, cols, tau](Node& self) {
    softmax_backward(self, rows, cols, tau);
  });
}

Tensor masked_softmax_rows(const Tensor& x, std::span<const unsigned char> keep, double tau) {
  if (!(tau > 0.0)) throw ParameterError("masked_softmax_rows: temperature must be positive");
  const auto rows = x.rows(), cols = x.cols();
  if (keep.size() != x.numel()) throw DimensionError("masked_softmax_rows: mask size mismatch");
  std::vector<double> out(x.numel(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = &x.data()[r * cols];
    const unsigned char* k = &keep[r * cols];
    double mx = -INFINITY;
    for (std::size_t c = 0; c < cols; ++c) {
      if (k[c]) mx = std::max(mx, in[c]);
    }
    if (mx == -INFINITY) throw InputError("masked_softmax_rows: row " + std::to_string(r) + " is fully masked");
    double sum = 0.0;
    double* y = &out[r * cols];
    for (std::size_t c = 0; c < cols; ++c) {
      if (k[c]) {
        y[c] = std::exp((in[c] - mx) / tau);
        sum += y[c];
      }
    }
    for (std::size_t c = 0; c < cols; ++c) y[c] /= sum;
  }
  // Masked outputs are constant zero, so softmax_backward already gives them
  // zero gradient (y == 0).
  return make_result(x.shape(), std::move(out), {x}, [rows, cols, tau](Node& self) {
    softmax_backward(self, rows, cols, tau);
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const auto rows = parts[0].rows();
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw DimensionError("concat_cols: row counts disagree");
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto w = p.cols();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(&p.data()[r * w], w, &out[r * total + offset]);
    }
    offset += w;
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_result({rows, total}, std::move(out), inputs, [rows, total, widths](Node& self) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      auto& in = *self.inputs[i];
      const auto w = widths[i];
      if (in.requires_grad) {
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < w; ++c) in.grad[r * w + c] += self.grad[r * total + off + c];
        }
      }
      off += w;
    }
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const auto cols = parts[0].cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw DimensionError("concat_rows: column counts disagree");
    rows += p.rows();
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_result({rows, cols}, std::move(out), inputs, [](Node& self) {
    std::size_t off = 0;
    for (auto& in : self.inputs) {
      const auto n = in->value.size();
      if (in->requires_grad) {
        for (std::size_t i = 0; i < n; ++i) in->grad[i] += self.grad[off + i];
      }
      off += n;
    }
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
  const auto rows = x.rows(), cols = x.cols();
  if (count == 0 || begin + count > cols) throw DimensionError("slice_cols: range out of bounds");
  std::vector<double> out(rows * count);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(&x.data()[r * cols + begin], count, &out[r * count]);
  }
  return make_result({rows, count}, std::move(out), {x}, [rows, cols, begin, count](Node& self) {
    auto& nx = *self.inputs[0];
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < count; ++c) nx.grad[r * cols + begin + c] += self.grad[r * count + c];
    }
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  const auto rows = x.rows(), cols = x.cols();
  if (count == 0 || begin + count > rows) throw DimensionError("slice_rows: range out of bounds");
  std::vector<double> out(x.data().begin() + static_cast<long>(begin * cols),
                          x.data().begin() + static_cast<long>((begin + count) * cols));
  return make_result({count, cols}, std::move(out), {x}, [cols, begin](Node& self) {
    auto& nx = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) nx.grad[begin * cols + i] += self.grad[i];
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids) {
  const auto rows = table.rows(), cols = table.cols();
  if (ids.empty()) throw DimensionError("gather_rows: no ids");
  std::vector<double> out(ids.size() * cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= rows) {
      throw LookupError("gather_rows: id " + std::to_string(ids[i]) + " out of range for " +
                        std::to_string(rows) + " rows");
    }
    std::copy_n(&table.data()[ids[i] * cols], cols, &out[i * cols]);
  }
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  return make_result({ids.size(), cols}, std::move(out), {table}, [cols, idx](Node& self) {
    auto& nt = *self.inputs[0];
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t c = 0; c < cols; ++c) nt.grad[idx[i] * cols + c] += self.grad[i * cols + c];
    }
  });
}

Tensor scale_rows(const Tensor& x, std::span<const double> weights) {
  const auto rows = x.rows(), cols = x.cols();
  if (weights.size() != rows) throw DimensionError("scale_rows: weight count mismatch");
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = weights[r] * x.data()[r * cols + c];
  }
  std::vector<double> w(weights.begin(), weights.end());
  return make_result(x.shape(), std::move(out), {x}, [rows, cols, w](Node& self) {
    auto& nx = *self.inputs[0];
    for (std::size_t r = 0; r < rows; ++r) {
      if (w[r] == 0.0) continue;
      for (std::size_t c = 0; c < cols; ++c) nx.grad[r * cols + c] += w[r] * self.grad[r * cols + c];
    }
  });
}

Tensor select_rows(const Tensor& fresh, const Tensor& carried, std::span<const unsigned char> keep) {
  require_same_shape(fresh, carried, "select_rows");
  const auto rows = fresh.rows(), cols = fresh.cols();
  if (keep.size() != rows) throw DimensionError("select_rows: mask size mismatch");
  std::vector<double> out(fresh.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& src = keep[r] ? fresh : carried;
    std::copy_n(&src.data()[r * cols], cols, &out[r * cols]);
  }
  std::vector<unsigned char> k(keep.begin(), keep.end());
  return make_result(fresh.shape(), std::move(out), {fresh, carried}, [rows, cols, k](Node& self) {
    for (std::size_t r = 0; r < rows; ++r) {
      auto& in = *self.inputs[k[r] ? 0 : 1];
      if (!in.requires_grad) continue;
      for (std::size_t c = 0; c < cols; ++c) in.grad[r * cols + c] += self.grad[r * cols + c];
    }
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_result({1}, {s}, {x}, [](Node& self) {
    auto& nx = *self.inputs[0];
    const double g = self.grad[0];
    for (double& d : nx.grad) d += g;
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets,
                     std::span<const double> weights) {
  const auto rows = logits.rows(), cols = logits.cols();
  if (targets.size() != rows || weights.size() != rows) {
    throw DimensionError("cross_entropy: targets/weights must have one entry per row");
  }
  double total = 0.0;
  std::vector<double> lse(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    if (weights[r] == 0.0) continue;
    if (targets[r] >= cols) throw LookupError("cross_entropy: target id out of range");
    const double* x = &logits.data()[r * cols];
    double mx = x[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, x[c]);
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += std::exp(x[c] - mx);
    lse[r] = mx + std::log(s);
    total += weights[r] * (lse[r] - x[targets[r]]);
  }
  std::vector<std::size_t> t(targets.begin(), targets.end());
  std::vector<double> w(weights.begin(), weights.end());
  return make_result({1}, {total}, {logits}, [rows, cols, t, w, lse](Node& self) {
    auto& nx = *self.inputs[0];
    const double g = self.grad[0];
    for (std::size_t r = 0; r < rows; ++r) {
      if (w[r] == 0.0) continue;
      const double* x = &nx.value[r * cols];
      double* dx = &nx.grad[r * cols];
      const double gw = g * w[r];
      for (std::size_t c = 0; c < cols; ++c) dx[c] += gw * std::exp(x[c] - lse[r]);
      dx[t[r]] -= gw;
    }
  });
}

Tensor lstm_cell(const Tensor& gates, const Tensor& c_prev) {
  const auto batch = c_prev.rows(), hidden = c_prev.cols();
  if (gates.rows() != batch || gates.cols() != 4 * hidden) {
    throw DimensionError("lstm_cell: gates " + shape_string(gates.shape()) + " for state " +
                         shape_string(c_prev.shape()));
  }
  std::vector<double> out(batch * hidden);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* g = &gates.data()[b * 4 * hidden];
    for (std::size_t j = 0; j < hidden; ++j) {
      const double i = sigm(g[j]), f = sigm(g[hidden + j]), cand = std::tanh(g[2 * hidden + j]);
      out[b * hidden + j] = f * c_prev.data()[b * hidden + j] + i * cand;
    }
  }
  return make_result(c_prev.shape(), std::move(out), {gates, c_prev}, [batch, hidden](Node& self) {
    auto& ng = *self.inputs[0];
    auto& nc = *self.inputs[1];
    for (std::size_t b = 0; b < batch; ++b) {
      const double* g = &ng.value[b * 4 * hidden];
      for (std::size_t j = 0; j < hidden; ++j) {
        const double dc = self.grad[b * hidden + j];
        if (dc == 0.0) continue;
        const double i = sigm(g[j]), f = sigm(g[hidden + j]), cand = std::tanh(g[2 * hidden + j]);
        const double cp = nc.value[b * hidden + j];
        if (ng.requires_grad) {
          double* dg = &ng.grad[b * 4 * hidden];
          dg[j] += dc * cand * i * (1.0 - i);
          dg[hidden + j] += dc * cp * f * (1.0 - f);
          dg[2 * hidden + j] += dc * i * (1.0 - cand * cand);
        }
        if (nc.requires_grad) nc.grad[b * hidden + j] += dc * f;
      }
    }
  });
}

Tensor lstm_output(const Tensor& gates, const Tensor& c) {
  const auto batch = c.rows(), hidden = c.cols();
  if (gates.rows() != batch || gates.cols() != 4 * hidden) {
    throw DimensionError("lstm_output: gates " + shape_string(gates.shape()) + " for state " +
                         shape_string(c.shape()));
  }
  std::vector<double> out(batch * hidden);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < hidden; ++j) {
      const double o = sigm(gates.data()[b * 4 * hidden + 3 * hidden + j]);
      out[b * hidden + j] = o * std::tanh(c.data()[b * hidden + j]);
    }
  }
  return make_result(c.shape(), std::move(out), {gates, c}, [batch, hidden](Node& self) {
    auto& ng = *self.inputs[0];
    auto& nc = *self.inputs[1];
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < hidden; ++j) {
        const double dh = self.grad[b * hidden + j];
        if (dh == 0.0) continue;
        const double o = sigm(ng.value[b * 4 * hidden + 3 * hidden + j]);
        const double tc = std::tanh(nc.value[b * hidden + j]);
        if (ng.requires_grad) ng.grad[b * 4 * hidden + 3 * hidden + j] += dh * tc * o * (1.0 - o);
        if (nc.requires_grad) nc.grad[b * hidden + j] += dh * o * (1.0 - tc * tc);
      }
    }
  });
}

Tensor additive_scores(const Tensor& keys, const Tensor& query, const Tensor& v) {
  const auto batch = query.rows(), dim = query.cols();
  if (keys.cols() != dim || keys.rows() % batch != 0 || v.numel() != dim) {
    throw DimensionError("additive_scores: keys " + shape_string(keys.shape()) + ", query " +
                         shape_string(query.shape()) + ", v " + shape_string(v.shape()));
  }
  const auto steps = keys.rows() / batch;
  std::vector<double> hidden(keys.numel());
  std::vector<double> out(batch * steps, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t b = 0; b < batch; ++b) {
      const double* k = &keys.data()[(t * batch + b) * dim];
      const double* q = &query.data()[b * dim];
      double* u = &hidden[(t * batch + b) * dim];
      double acc = 0.0;
      for (std::size_t a = 0; a < dim; ++a) {
        u[a] = std::tanh(k[a] + q[a]);
        acc += v.data()[a] * u[a];
      }
      out[b * steps + t] = acc;
    }
  }
  return make_result({batch, steps}, std::move(out), {keys, query, v},
                     [batch, dim, steps, hidden = std::move(hidden)](Node& self) {
                       auto& nk = *self.inputs[0];
                       auto& nq = *self.inputs[1];
                       auto& nv = *self.inputs[2];
                       for (std::size_t t = 0; t < steps; ++t) {
                         for (std::size_t b = 0; b < batch; ++b) {
                           const double g = self.grad[b * steps + t];
                           if (g == 0.0) continue;
                           const double* u = &hidden[(t * batch + b) * dim];
                           for (std::size_t a = 0; a < dim; ++a) {
                             if (nv.requires_grad) nv.grad[a] += g * u[a];
                             const double dpre = g * nv.value[a] * (1.0 - u[a] * u[a]);
                             if (nk.requires_grad) nk.grad[(t * batch + b) * dim + a] += dpre;
                             if (nq.requires_grad) nq.grad[b * dim + a] += dpre;
                           }
                         }
                       }
                     });
}

Tensor dot_scores(const Tensor& keys, const Tensor& query) {
  const auto batch = query.rows(), dim = query.cols();
  if (keys.cols() != dim || keys.rows() % batch != 0) {
    throw DimensionError("dot_scores: keys " + shape_string(keys.shape()) + ", query " +
                         shape_string(query.shape()));
  }
  const auto steps = keys.rows() / batch;
  std::vector<double> out(batch * steps, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t b = 0; b < batch; ++b) {
      const double* k = &keys.data()[(t * batch + b) * dim];
      const double* q = &query.data()[b * dim];
      double acc = 0.0;
      for (std::size_t a = 0; a < dim; ++a) acc += k[a] * q[a];
      out[b * steps + t] = acc;
    }
  }
  return make_result({batch, steps}, std::move(out), {keys, query}, [batch, dim, steps](Node& self) {
    auto& nk = *self.inputs[0];
    auto& nq = *self.inputs[1];
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t b = 0; b < batch; ++b) {
        const double g = self.grad[b * steps + t];
        if (g == 0.0) continue;
        const auto row = (t * batch + b) * dim;
        for (std::size_t a = 0; a < dim; ++a) {
          if (nk.requires_grad) nk.grad[row + a] += g * nq.value[b * dim + a];
          if (nq.requires_grad) nq.grad[b * dim + a] += g * nk.value[row + a];
        }
      }
    }
  });
}

Tensor attend(const Tensor& weights, const Tensor& memory) {
  const auto batch = weights.rows(), steps = weights.cols(), dim = memory.cols();
  if (memory.rows() != batch * steps) {
    throw DimensionError("attend: weights " + shape_string(weights.shape()) + " for memory " +
                         shape_string(memory.shape()));
  }
  std::vector<double> out(batch * dim, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t b = 0; b < batch; ++b) {
      const double w = weights.data()[b * steps + t];
      if (w == 0.0) continue;
      const double* m = &memory.data()[(t * batch + b) * dim];
      for (std::size_t a = 0; a < dim; ++a) out[b * dim + a] += w * m[a];
    }
  }
  return make_result({batch, dim}, std::move(out), {weights, memory}, [batch, steps, dim](Node& self) {
    auto& nw = *self.inputs[0];
    auto& nm = *self.inputs[1];
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t b = 0; b < batch; ++b) {
        const double* g = &self.grad[b * dim];
        const auto row = (t * batch + b) * dim;
        if (nw.requires_grad) {
          double acc = 0.0;
          for (std::size_t a = 0; a < dim; ++a) acc += g[a] * nm.value[row + a];
          nw.grad[b * steps + t] += acc;
        }
        if (nm.requires_grad) {
          const double w = nw.value[b * steps + t];
          if (w == 0.0) continue;
          for (std::size_t a = 0; a < dim; ++a) nm.grad[row + a] += w * g[a];
        }
      }
    }
  });
}

Tensor mix_experts(const Tensor& gate, std::span<const Tensor> experts) {
  const auto n = gate.rows(), k = gate.cols();
  if (experts.size() != k) throw DimensionError("mix_experts: gate width != expert count");
  const auto dim = experts[0].cols();
  for (const auto& e : experts) {
    if (e.rows() != n || e.cols() != dim) throw DimensionError("mix_experts: expert shape mismatch");
  }
  std::vector<double> out(n * dim, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t e = 0; e < k; ++e) {
      const double w = gate.data()[r * k + e];
      const double* x = &experts[e].data()[r * dim];
      for (std::size_t a = 0; a < dim; ++a) out[r * dim + a] += w * x[a];
    }
  }
  std::vector<Tensor> inputs{gate};
  inputs.insert(inputs.end(), experts.begin(), experts.end());
  return make_result({n, dim}, std::move(out), inputs, [n, k, dim](Node& self) {
    auto& ng = *self.inputs[0];
    for (std::size_t e = 0; e < k; ++e) {
      auto& ne = *self.inputs[e + 1];
      for (std::size_t r = 0; r < n; ++r) {
        const double* g = &self.grad[r * dim];
        if (ng.requires_grad) {
          double acc = 0.0;
          for (std::size_t a = 0; a < dim; ++a) acc += g[a] * ne.value[r * dim + a];
          ng.grad[r * k + e] += acc;
        }
        if (ne.requires_grad) {
          const double w = ng.value[r * k + e];
          for (std::size_t a = 0; a < dim; ++a) ne.grad[r * dim + a] += w * g[a];
        }
      }
    }
  });
}

Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ParameterError("dropout: rate must be in [0, 1)");
  if (rate == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  const double inv = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.numel());
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = keep(rng) ? inv : 0.0;
    out[i] = x.data()[i] * mask[i];
  }
  return make_result(x.shape(), std::move(out), {x}, [mask = std::move(mask)](Node& self) {
    auto& nx = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) nx.grad[i] += self.grad[i] * mask[i];
  });
}

}  // namespace unmt::ops
