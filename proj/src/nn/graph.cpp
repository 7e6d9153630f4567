#include "tdps/nn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tdps/error.hpp"

namespace tdps::nn {

namespace {

constexpr double kProbClamp = 1e-7;

}  // namespace

const Matrix& Graph::val(Var v) const {
  const Node& n = node(v);
  return n.external != nullptr ? *n.external : n.value;
}

const Matrix& Graph::value(Var v) const {
  require(v.id < nodes_.size(), "unknown graph variable");
  return val(v);
}

const Matrix& Graph::grad(Var v) const {
  require(v.id < nodes_.size(), "unknown graph variable");
  return node(v).grad;
}

Matrix& Graph::grad_of(Var v) {
  Node& n = node(v);
  if (n.grad.size() == 0) {
    const Matrix& x = val(v);
    n.grad = Matrix(x.rows, x.cols);
  }
  return n.grad;
}

Var Graph::push(Matrix value, bool needs_grad) {
  nodes_.emplace_back();
  nodes_.back().value = std::move(value);
  nodes_.back().needs_grad = needs_grad;
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::constant(Matrix value) {
  return push(std::move(value), false);
}

Var Graph::param(const Parameter& p) {
  nodes_.emplace_back();
  nodes_.back().external = &p.value;
  nodes_.back().needs_grad = true;
  const Var v{static_cast<std::uint32_t>(nodes_.size() - 1)};
  bindings_.push_back({&p, v});
  return v;
}

Var Graph::matmul(Var a, Var b) {
  const Matrix& A = val(a);
  const Matrix& B = val(b);
  require(A.cols == B.rows, "matmul: inner dimensions differ");
  Matrix out(A.rows, B.cols);
  kernels::gemm(A, B, out);
  const Var o = push(std::move(out), needs(a) || needs(b));
  node(o).backward = [this, a, b, o] {
    const Matrix& g = node(o).grad;
    if (needs(a)) {
      kernels::gemm_bt(g, val(b), grad_of(a));
    }
    if (needs(b)) {
      kernels::gemm_at(val(a), g, grad_of(b));
    }
  };
  return o;
}

Var Graph::add(Var a, Var b) {
  const Matrix& A = val(a);
  const Matrix& B = val(b);
  require(A.same_shape(B), "add: shape mismatch");
  Matrix out = A;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data[i] += B.data[i];
  }
  const Var o = push(std::move(out), needs(a) || needs(b));
  node(o).backward = [this, a, b, o] {
    const Matrix& g = node(o).grad;
    for (Var in : {a, b}) {
      if (needs(in)) {
        Matrix& d = grad_of(in);
        for (std::size_t i = 0; i < g.size(); ++i) {
          d.data[i] += g.data[i];
        }
      }
    }
  };
  return o;
}

Var Graph::add_bias(Var a, Var bias) {
  const Matrix& A = val(a);
  const Matrix& B = val(bias);
  require(B.rows == 1 && B.cols == A.cols, "add_bias: bias must be 1 x cols");
  Matrix out = A;
  for (std::size_t r = 0; r < out.rows; ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < out.cols; ++c) {
      row[c] += B.data[c];
    }
  }
  const Var o = push(std::move(out), needs(a) || needs(bias));
  node(o).backward = [this, a, bias, o] {
    const Matrix& g = node(o).grad;
    if (needs(a)) {
      Matrix& d = grad_of(a);
      for (std::size_t i = 0; i < g.size(); ++i) {
        d.data[i] += g.data[i];
      }
    }
    if (needs(bias)) {
      Matrix& d = grad_of(bias);
      for (std::size_t r = 0; r < g.rows; ++r) {
        const auto row = g.row(r);
        for (std::size_t c = 0; c < g.cols; ++c) {
          d.data[c] += row[c];
        }
      }
    }
  };
  return o;
}

Var Graph::mul(Var a, Var b) {
  const Matrix& A = val(a);
  const Matrix& B = val(b);
  require(A.same_shape(B), "mul: shape mismatch");
  Matrix out = A;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data[i] *= B.data[i];
  }
  const Var o = push(std::move(out), needs(a) || needs(b));
  node(o).backward = [this, a, b, o] {
    const Matrix& g = node(o).grad;
    if (needs(a)) {
      Matrix& d = grad_of(a);
      const Matrix& B = val(b);
      for (std::size_t i = 0; i < g.size(); ++i) {
        d.data[i] += g.data[i] * B.data[i];
      }
    }
    if (needs(b)) {
      Matrix& d = grad_of(b);
      const Matrix& A = val(a);
      for (std::size_t i = 0; i < g.size(); ++i) {
        d.data[i] += g.data[i] * A.data[i];
      }
    }
  };
  return o;
}

Var Graph::scale(Var a, double s) {
  Matrix out = val(a);
  for (double& x : out.data) {
    x *= s;
  }
  const Var o = push(std::move(out), needs(a));
  node(o).backward = [this, a, o, s] {
    const Matrix& g = node(o).grad;
    Matrix& d = grad_of(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      d.data[i] += s * g.data[i];
    }
  };
  return o;
}

Var Graph::sigmoid(Var a) {
  Matrix out = val(a);
  for (double& x : out.data) {
    x = 1.0 / (1.0 + std::exp(-x));
  }
  const Var o = push(std::move(out), needs(a));
  node(o).backward = [this, a, o] {
    const Matrix& g = node(o).grad;
    const Matrix& y = val(o);
    Matrix& d = grad_of(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      d.data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
    }
  };
  return o;
}

Var Graph::tanh(Var a) {
  Matrix out = val(a);
  for (double& x : out.data) {
    x = std::tanh(x);
  }
  const Var o = push(std::move(out), needs(a));
  node(o).backward = [this, a, o] {
    const Matrix& g = node(o).grad;
    const Matrix& y = val(o);
    Matrix& d = grad_of(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      d.data[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]);
    }
  };
  return o;
}

Var Graph::relu(Var a) {
  Matrix out = val(a);
  for (double& x : out.data) {
    x = x > 0.0 ? x : 0.0;
  }
  const Var o = push(std::move(out), needs(a));
  node(o).backward = [this, a, o] {
    const Matrix& g = node(o).grad;
    const Matrix& x = val(a);
    Matrix& d = grad_of(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x.data[i] > 0.0) {
        d.data[i] += g.data[i];
      }
    }
  };
  return o;
}

Var Graph::slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Matrix& A = val(a);
  require(begin + count <= A.cols, "slice_cols: range out of bounds");
  Matrix out(A.rows, count);
  for (std::size_t r = 0; r < A.rows; ++r) {
    std::copy_n(A.row(r).begin() + static_cast<std::ptrdiff_t>(begin), count, out.row(r).begin());
  }
  const Var o = push(std::move(out), needs(a));
  node(o).backward = [this, a, o, begin, count] {
    const Matrix& g = node(o).grad;
    Matrix& d = grad_of(a);
    for (std::size_t r = 0; r < g.rows; ++r) {
      const auto src = g.row(r);
      auto dst = d.row(r);
      for (std::size_t c = 0; c < count; ++c) {
        dst[begin + c] += src[c];
      }
    }
  };
  return o;
}

Var Graph::select_rows(Var a, std::vector<std::size_t> rows) {
  const Matrix& A = val(a);
  Matrix out(rows.size(), A.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] < A.rows, "select_rows: row index out of range");
    std::copy_n(A.row(rows[i]).begin(), A.cols, out.row(i).begin());
  }
  const Var o = push(std::move(out), needs(a));
  node(o).backward = [this, a, o, rows = std::move(rows)] {
    const Matrix& g = node(o).grad;
    Matrix& d = grad_of(a);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto src = g.row(i);
      auto dst = d.row(rows[i]);
      for (std::size_t c = 0; c < g.cols; ++c) {
        dst[c] += src[c];
      }
    }
  };
  return o;
}

Var Graph::blend_rows(Var prev, Var next, std::vector<std::uint8_t> keep_next) {
  const Matrix& P = val(prev);
  const Matrix& N = val(next);
  require(P.same_shape(N) && keep_next.size() == P.rows, "blend_rows: shape mismatch");
  Matrix out = P;
  for (std::size_t r = 0; r < P.rows; ++r) {
    if (keep_next[r] != 0) {
      std::copy_n(N.row(r).begin(), N.cols, out.row(r).begin());
    }
  }
  const Var o = push(std::move(out), needs(prev) || needs(next));
  node(o).backward = [this, prev, next, o, keep = std::move(keep_next)] {
    const Matrix& g = node(o).grad;
    for (std::size_t r = 0; r < g.rows; ++r) {
      const Var target = keep[r] != 0 ? next : prev;
      if (!needs(target)) {
        continue;
      }
      const auto src = g.row(r);
      auto dst = grad_of(target).row(r);
      for (std::size_t c = 0; c < g.cols; ++c) {
        dst[c] += src[c];
      }
    }
  };
  return o;
}

Var Graph::softmax_rows(Var a, std::vector<std::uint8_t> mask) {
  const Matrix& A = val(a);
  require(mask.empty() || mask.size() == A.size(), "softmax_rows: mask size mismatch");
  Matrix out(A.rows, A.cols);
  for (std::size_t r = 0; r < A.rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < A.cols; ++c) {
      if (mask.empty() || mask[r * A.cols + c] != 0) {
        mx = std::max(mx, A(r, c));
      }
    }
    require(std::isfinite(mx), "softmax_rows: every entry of a row is masked");
    double total = 0.0;
    for (std::size_t c = 0; c < A.cols; ++c) {
      if (mask.empty() || mask[r * A.cols + c] != 0) {
        out(r, c) = std::exp(A(r, c) - mx);
        total += out(r, c);
      }
    }
    for (std::size_t c = 0; c < A.cols; ++c) {
      out(r, c) /= total;
    }
  }
  const Var o = push(std::move(out), needs(a));
  node(o).backward = [this, a, o] {
    const Matrix& g = node(o).grad;
    const Matrix& y = val(o);
    Matrix& d = grad_of(a);
    for (std::size_t r = 0; r < g.rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < g.cols; ++c) {
        dot += y(r, c) * g(r, c);
      }
      for (std::size_t c = 0; c < g.cols; ++c) {
        d(r, c) += y(r, c) * (g(r, c) - dot);
      }
    }
  };
  return o;
}

Var Graph::layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Matrix& X = val(x);
  const Matrix& G = val(gamma);
  const Matrix& B = val(beta);
  require(G.rows == 1 && B.rows == 1 && G.cols == X.cols && B.cols == X.cols, "layer_norm: parameter shape mismatch");
  const std::size_t n = X.cols;
  Matrix out(X.rows, n);
  // aux: normalized inputs followed by per-row inverse std.
  std::vector<double> aux(X.rows * n + X.rows);
  for (std::size_t r = 0; r < X.rows; ++r) {
    const auto row = X.row(r);
    double mu = 0.0;
    for (double v : row) {
      mu += v;
    }
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (double v : row) {
      var += (v - mu) * (v - mu);
    }
    var /= static_cast<double>(n);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    aux[X.rows * n + r] = inv_std;
    for (std::size_t c = 0; c < n; ++c) {
      const double xhat = (row[c] - mu) * inv_std;
      aux[r * n + c] = xhat;
      out(r, c) = G.data[c] * xhat + B.data[c];
    }
  }
  const Var o = push(std::move(out), needs(x) || needs(gamma) || needs(beta));
  node(o).aux = std::move(aux);
  node(o).backward = [this, x, gamma, beta, o] {
    const Matrix& g = node(o).grad;
    const auto& aux = node(o).aux;
    const std::size_t rows = g.rows;
    const std::size_t n = g.cols;
    const Matrix& G = val(gamma);
    if (needs(gamma) || needs(beta)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
          if (needs(gamma)) {
            grad_of(gamma).data[c] += g(r, c) * aux[r * n + c];
          }
          if (needs(beta)) {
            grad_of(beta).data[c] += g(r, c);
          }
        }
      }
    }
    if (needs(x)) {
      Matrix& d = grad_of(x);
      const auto nn = static_cast<double>(n);
      for (std::size_t r = 0; r < rows; ++r) {
        const double inv_std = aux[rows * n + r];
        double sum_dxhat = 0.0;
        double sum_dxhat_xhat = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
          const double dxhat = g(r, c) * G.data[c];
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * aux[r * n + c];
        }
        for (std::size_t c = 0; c < n; ++c) {
          const double dxhat = g(r, c) * G.data[c];
          d(r, c) += inv_std / nn * (nn * dxhat - sum_dxhat - aux[r * n + c] * sum_dxhat_xhat);
        }
      }
    }
  };
  return o;
}

Var Graph::embedding_bag(Var table, std::vector<std::vector<std::uint32_t>> bags) {
  const Matrix& E = val(table);
  Matrix out(bags.size(), E.cols);
  for (std::size_t i = 0; i < bags.size(); ++i) {
    if (bags[i].empty()) {
      continue;
    }
    auto dst = out.row(i);
    for (auto idx : bags[i]) {
      require(idx < E.rows, "embedding_bag: index out of range");
      const auto src = E.row(idx);
      for (std::size_t c = 0; c < E.cols; ++c) {
        dst[c] += src[c];
      }
    }
    const double inv = 1.0 / static_cast<double>(bags[i].size());
    for (double& v : dst) {
      v *= inv;
    }
  }
  const Var o = push(std::move(out), needs(table));
  node(o).backward = [this, table, o, bags = std::move(bags)] {
    const Matrix& g = node(o).grad;
    Matrix& d = grad_of(table);
    for (std::size_t i = 0; i < bags.size(); ++i) {
      if (bags[i].empty()) {
        continue;
      }
      const double inv = 1.0 / static_cast<double>(bags[i].size());
      const auto src = g.row(i);
      for (auto idx : bags[i]) {
        auto dst = d.row(idx);
        for (std::size_t c = 0; c < g.cols; ++c) {
          dst[c] += inv * src[c];
        }
      }
    }
  };
  return o;
}

AttentionOutput Graph::attention(Var q, Var k, Var v, std::size_t batch, std::size_t len, std::size_t heads,
                                 std::vector<std::uint8_t> key_mask) {
  require(key_mask.size() == batch * len, "attention: mask length must equal batch * len");
  return attention_packed(q, k, v, std::vector<std::size_t>(batch, len), heads, std::move(key_mask));
}

AttentionOutput Graph::attention_packed(Var q, Var k, Var v, std::vector<std::size_t> lengths, std::size_t heads,
                                        std::vector<std::uint8_t> key_mask) {
  const Matrix& Q = val(q);
  const Matrix& K = val(k);
  const Matrix& V = val(v);
  const std::size_t dim = Q.cols;
  require(heads >= 1 && dim % heads == 0, "attention: model dim must be divisible by heads");
  std::size_t rows = 0;
  std::size_t wsize = 0;
  std::vector<std::size_t> row_off(lengths.size());
  std::vector<std::size_t> w_off(lengths.size());
  for (std::size_t b = 0; b < lengths.size(); ++b) {
    require(lengths[b] >= 1, "attention: empty sequence");
    row_off[b] = rows;
    w_off[b] = wsize;
    rows += lengths[b];
    wsize += heads * lengths[b] * lengths[b];
  }
  require(Q.same_shape(K) && Q.same_shape(V) && Q.rows == rows, "attention: q/k/v shape mismatch");
  if (key_mask.empty()) {
    key_mask.assign(rows, 1);
  }
  require(key_mask.size() == rows, "attention: mask length must equal the row count");
  const std::size_t dh = dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<double> weights(wsize, 0.0);
  Matrix out(rows, dim);
  for (std::size_t b = 0; b < lengths.size(); ++b) {
    const std::size_t len = lengths[b];
    const std::size_t r0 = row_off[b];
    const std::uint8_t* mask = key_mask.data() + r0;
    require(std::any_of(mask, mask + len, [](std::uint8_t m) { return m != 0; }),
            "attention: all key positions are masked for a sequence");
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * dh;
      for (std::size_t i = 0; i < len; ++i) {
        double* w = weights.data() + w_off[b] + (h * len + i) * len;
        const double* qi = Q.data.data() + (r0 + i) * dim + off;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < len; ++j) {
          if (mask[j] == 0) {
            continue;
          }
          const double* kj = K.data.data() + (r0 + j) * dim + off;
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) {
            s += qi[c] * kj[c];
          }
          w[j] = s * scale;
          mx = std::max(mx, w[j]);
        }
        double total = 0.0;
        for (std::size_t j = 0; j < len; ++j) {
          if (mask[j] != 0) {
            w[j] = std::exp(w[j] - mx);
            total += w[j];
          }
        }
        double* oi = out.data.data() + (r0 + i) * dim + off;
        for (std::size_t j = 0; j < len; ++j) {
          if (mask[j] == 0) {
            continue;
          }
          w[j] /= total;
          const double* vj = V.data.data() + (r0 + j) * dim + off;
          for (std::size_t c = 0; c < dh; ++c) {
            oi[c] += w[j] * vj[c];
          }
        }
      }
    }
  }

  const Var o = push(std::move(out), needs(q) || needs(k) || needs(v));
  node(o).aux = std::move(weights);
  node(o).backward = [this, q, k, v, o, lengths = std::move(lengths), row_off = std::move(row_off),
                      w_off = std::move(w_off), heads, dh, scale] {
    const Matrix& g = node(o).grad;
    const auto& weights = node(o).aux;
    const Matrix& Q = val(q);
    const Matrix& K = val(k);
    const Matrix& V = val(v);
    const std::size_t dim = Q.cols;
    Matrix* dq = needs(q) ? &grad_of(q) : nullptr;
    Matrix* dk = needs(k) ? &grad_of(k) : nullptr;
    Matrix* dv = needs(v) ? &grad_of(v) : nullptr;
    std::vector<double> dw;
    for (std::size_t b = 0; b < lengths.size(); ++b) {
      const std::size_t len = lengths[b];
      const std::size_t r0 = row_off[b];
      dw.assign(len, 0.0);
      for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * dh;
        for (std::size_t i = 0; i < len; ++i) {
          const double* w = weights.data() + w_off[b] + (h * len + i) * len;
          const double* gi = g.data.data() + (r0 + i) * dim + off;
          double dot = 0.0;
          for (std::size_t j = 0; j < len; ++j) {
            if (w[j] == 0.0) {
              dw[j] = 0.0;
              continue;
            }
            const double* vj = V.data.data() + (r0 + j) * dim + off;
            double s = 0.0;
            for (std::size_t c = 0; c < dh; ++c) {
              s += gi[c] * vj[c];
            }
            dw[j] = s;
            dot += w[j] * s;
            if (dv != nullptr) {
              double* dvj = dv->data.data() + (r0 + j) * dim + off;
              for (std::size_t c = 0; c < dh; ++c) {
                dvj[c] += w[j] * gi[c];
              }
            }
          }
          const double* qi = Q.data.data() + (r0 + i) * dim + off;
          double* dqi = dq != nullptr ? dq->data.data() + (r0 + i) * dim + off : nullptr;
          for (std::size_t j = 0; j < len; ++j) {
            if (w[j] == 0.0) {
              continue;
            }
            const double dlogit = w[j] * (dw[j] - dot) * scale;
            const double* kj = K.data.data() + (r0 + j) * dim + off;
            if (dqi != nullptr) {
              for (std::size_t c = 0; c < dh; ++c) {
                dqi[c] += dlogit * kj[c];
              }
            }
            if (dk != nullptr) {
              double* dkj = dk->data.data() + (r0 + j) * dim + off;
              for (std::size_t c = 0; c < dh; ++c) {
                dkj[c] += dlogit * qi[c];
              }
            }
          }
        }
      }
    }
  };
  return {o, std::span<const double>(node(o).aux)};
}

Var Graph::sum(Var a) {
  double s = 0.0;
  for (double v : val(a).data) {
    s += v;
  }
  const Var o = push(Matrix(1, 1, s), needs(a));
  node(o).backward = [this, a, o] {
    const double g = node(o).grad.data[0];
    for (double& d : grad_of(a).data) {
      d += g;
    }
  };
  return o;
}

Var Graph::mean(Var a) {
  const auto n = static_cast<double>(val(a).size());
  require(n > 0, "mean of an empty matrix");
  return scale(sum(a), 1.0 / n);
}

Var Graph::bce(Var probs, std::vector<double> labels) {
  const Matrix& P = val(probs);
  require(P.cols == 1 && P.rows == labels.size() && P.rows > 0, "bce: probabilities must be (m x 1) matching labels");
  double loss = 0.0;
  for (std::size_t i = 0; i < P.rows; ++i) {
    const double p = std::clamp(P.data[i], kProbClamp, 1.0 - kProbClamp);
    loss -= labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(1.0 - p);
  }
  loss /= static_cast<double>(P.rows);
  const Var o = push(Matrix(1, 1, loss), needs(probs));
  node(o).backward = [this, probs, o, labels = std::move(labels)] {
    const double g = node(o).grad.data[0];
    const Matrix& P = val(probs);
    Matrix& d = grad_of(probs);
    const auto m = static_cast<double>(P.rows);
    for (std::size_t i = 0; i < P.rows; ++i) {
      const double raw = P.data[i];
      if (raw < kProbClamp || raw > 1.0 - kProbClamp) {
        continue;
      }
      d.data[i] += g * (-(labels[i] / raw) + (1.0 - labels[i]) / (1.0 - raw)) / m;
    }
  };
  return o;
}

void Graph::backward(Var loss) {
  require(loss.id < nodes_.size(), "unknown graph variable");
  const Matrix& L = val(loss);
  require(L.rows == 1 && L.cols == 1, "backward requires a scalar loss");
  for (auto& n : nodes_) {
    n.grad.data.clear();
    n.grad.rows = n.grad.cols = 0;
  }
  grad_of(loss).data[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.needs_grad && n.backward && n.grad.size() != 0) {
      n.backward();
    }
  }
}

}  // namespace tdps::nn
