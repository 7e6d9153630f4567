#pragma once

#include <string>
#include <vector>

#include "tdps/nn/graph.hpp"
#include "tdps/nn/parameter.hpp"

namespace tdps::nn {

// Sinusoidal encoding: entry 2i = sin(pos / 10000^(2i/dim)), 2i+1 = cos(same).
std::vector<double> positional_encoding(std::size_t position, std::size_t dim);
// One encoding row per position.
Matrix positional_matrix(const std::vector<std::size_t>& positions, std::size_t dim);

// Layers register their parameters in a ParameterSet at construction and
// create graph leaves through bind(); bind once per graph and reuse the
// handles across time steps.

struct Linear {
  Parameter* weight;  // in x out
  Parameter* bias;    // 1 x out

  Linear(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng);

  struct Bound {
    Var weight;
    Var bias;
  };
  Bound bind(Graph& g) const { return {g.param(*weight), g.param(*bias)}; }
  static Var apply(Graph& g, const Bound& b, Var x) { return g.add_bias(g.matmul(x, b.weight), b.bias); }
  Var operator()(Graph& g, Var x) const { return apply(g, bind(g), x); }
};

struct LayerNorm {
  Parameter* gamma;
  Parameter* beta;

  LayerNorm(ParameterSet& params, const std::string& name, std::size_t dim);
  Var operator()(Graph& g, Var x) const { return g.layer_norm(x, g.param(*gamma), g.param(*beta)); }
};

// Standard LSTM cell with gate blocks ordered input, forget, candidate, output.
struct LstmCell {
  std::size_t input_dim;
  std::size_t hidden_dim;
  Parameter* w_input;   // input_dim x 4H
  Parameter* w_hidden;  // H x 4H
  Parameter* bias;      // 1 x 4H, forget block initialized to 1

  LstmCell(ParameterSet& params, const std::string& name, std::size_t input, std::size_t hidden, Rng& rng);

  struct Bound {
    Var w_input;
    Var w_hidden;
    Var bias;
  };
  Bound bind(Graph& g) const { return {g.param(*w_input), g.param(*w_hidden), g.param(*bias)}; }

  struct State {
    Var h;
    Var c;
  };
  State step(Graph& g, const Bound& b, Var x, State prev) const;
};

// Projections around the fused attention op; returns outputs and weights.
struct MultiHeadAttention {
  std::size_t dim;
  std::size_t heads;
  Linear query;
  Linear key;
  Linear value;
  Linear out;

  MultiHeadAttention(ParameterSet& params, const std::string& name, std::size_t dim, std::size_t heads, Rng& rng);

  AttentionOutput operator()(Graph& g, Var x, std::size_t batch, std::size_t len,
                             const std::vector<std::uint8_t>& key_mask) const;
  // Unpadded sequences stacked back to back (see Graph::attention_packed).
  AttentionOutput packed(Graph& g, Var x, const std::vector<std::size_t>& lengths,
                         const std::vector<std::uint8_t>& key_mask = {}) const;
};

}  // namespace tdps::nn
