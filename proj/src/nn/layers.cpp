#include "tdps/nn/layers.hpp"

#include <cmath>

#include "tdps/error.hpp"

namespace tdps::nn {

std::vector<double> positional_encoding(std::size_t position, std::size_t dim) {
  require(dim % 2 == 0, "positional encoding dimension must be even");
  std::vector<double> pe(dim);
  const auto pos = static_cast<double>(position);
  for (std::size_t i = 0; i < dim / 2; ++i) {
    const double angle = pos / std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(dim));
    pe[2 * i] = std::sin(angle);
    pe[2 * i + 1] = std::cos(angle);
  }
  return pe;
}

Matrix positional_matrix(const std::vector<std::size_t>& positions, std::size_t dim) {
  Matrix m(positions.size(), dim);
  for (std::size_t r = 0; r < positions.size(); ++r) {
    const auto pe = positional_encoding(positions[r], dim);
    std::copy(pe.begin(), pe.end(), m.row(r).begin());
  }
  return m;
}

Linear::Linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng)
    : weight(&params.add_glorot(name + ".weight", in, out, rng)), bias(&params.add(name + ".bias", 1, out)) {}

LayerNorm::LayerNorm(ParameterSet& params, const std::string& name, std::size_t dim)
    : gamma(&params.add(name + ".gamma", 1, dim)), beta(&params.add(name + ".beta", 1, dim)) {
  gamma->value.fill(1.0);
}

LstmCell::LstmCell(ParameterSet& params, const std::string& name, std::size_t input, std::size_t hidden, Rng& rng)
    : input_dim(input),
      hidden_dim(hidden),
      w_input(&params.add_glorot(name + ".w_input", input, 4 * hidden, rng)),
      w_hidden(&params.add_glorot(name + ".w_hidden", hidden, 4 * hidden, rng)),
      bias(&params.add(name + ".bias", 1, 4 * hidden)) {
  for (std::size_t j = hidden; j < 2 * hidden; ++j) {
    bias->value.data[j] = 1.0;
  }
}

LstmCell::State LstmCell::step(Graph& g, const Bound& b, Var x, State prev) const {
  require(g.value(x).cols == input_dim, "lstm_step: input width mismatch");
  require(g.value(prev.h).cols == hidden_dim && g.value(prev.c).cols == hidden_dim, "lstm_step: state width mismatch");
  require(g.value(prev.h).rows == g.value(x).rows, "lstm_step: batch size mismatch");
  const Var gates = g.add_bias(g.add(g.matmul(x, b.w_input), g.matmul(prev.h, b.w_hidden)), b.bias);
  const std::size_t H = hidden_dim;
  const Var in_gate = g.sigmoid(g.slice_cols(gates, 0, H));
  const Var forget_gate = g.sigmoid(g.slice_cols(gates, H, H));
  const Var candidate = g.tanh(g.slice_cols(gates, 2 * H, H));
  const Var out_gate = g.sigmoid(g.slice_cols(gates, 3 * H, H));
  const Var c = g.add(g.mul(forget_gate, prev.c), g.mul(in_gate, candidate));
  const Var h = g.mul(out_gate, g.tanh(c));
  return {h, c};
}

MultiHeadAttention::MultiHeadAttention(ParameterSet& params, const std::string& name, std::size_t d, std::size_t h,
                                       Rng& rng)
    : dim(d),
      heads(h),
      query(params, name + ".query", d, d, rng),
      key(params, name + ".key", d, d, rng),
      value(params, name + ".value", d, d, rng),
      out(params, name + ".out", d, d, rng) {
  require(h >= 1 && d % h == 0, "model dimension must be divisible by the number of heads");
}

AttentionOutput MultiHeadAttention::operator()(Graph& g, Var x, std::size_t batch, std::size_t len,
                                               const std::vector<std::uint8_t>& key_mask) const {
  const Var q = query(g, x);
  const Var k = key(g, x);
  const Var v = value(g, x);
  const auto att = g.attention(q, k, v, batch, len, heads, key_mask);
  return {out(g, att.output), att.weights};
}

AttentionOutput MultiHeadAttention::packed(Graph& g, Var x, const std::vector<std::size_t>& lengths,
                                           const std::vector<std::uint8_t>& key_mask) const {
  const Var q = query(g, x);
  const Var k = key(g, x);
  const Var v = value(g, x);
  const auto att = g.attention_packed(q, k, v, lengths, heads, key_mask);
  return {out(g, att.output), att.weights};
}

}  // namespace tdps::nn
