#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "tdps/nn/matrix.hpp"
#include "tdps/nn/parameter.hpp"

namespace tdps::nn {

// Handle to a node of a Graph.
struct Var {
  std::uint32_t id = 0;
};

// Output of the fused scaled dot-product attention op.
struct AttentionOutput {
  Var output;
  // Row-major [batch][head][query][key] softmax weights.
  std::span<const double> weights;
};

// Reverse-mode automatic differentiation tape over matrix-valued nodes.
// Nodes are appended in evaluation order, so the tape order is topological
// and backward() is a single reverse sweep. One graph is built per minibatch;
// parameters outlive graphs.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Matrix value);
  // Leaf that reads the parameter's value in place and receives a gradient.
  Var param(const Parameter& p);

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;
  std::size_t node_count() const { return nodes_.size(); }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  // a (m x n) + bias (1 x n) broadcast over rows.
  Var add_bias(Var a, Var bias);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  Var slice_cols(Var a, std::size_t begin, std::size_t count);
  Var select_rows(Var a, std::vector<std::size_t> rows);
  // Row r is next's row where keep_next[r] != 0, otherwise prev's row.
  Var blend_rows(Var prev, Var next, std::vector<std::uint8_t> keep_next);
  // Row-wise softmax; masked entries (mask[r*cols + c] == 0) get weight 0.
  Var softmax_rows(Var a, std::vector<std::uint8_t> mask = {});
  // Row-wise normalization to zero mean and unit variance, then gamma/beta.
  Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
  // Row i is the mean of table rows listed in bags[i]; empty bags give zeros.
  Var embedding_bag(Var table, std::vector<std::vector<std::uint32_t>> bags);
  // Multi-head scaled dot-product attention. q, k, v are (batch*len x dim)
  // with sequence b occupying rows [b*len, (b+1)*len). key_mask has
  // batch*len entries; masked keys receive exactly zero weight.
  AttentionOutput attention(Var q, Var k, Var v, std::size_t batch, std::size_t len, std::size_t heads,
                            std::vector<std::uint8_t> key_mask);
  // Same op over unpadded sequences stacked back to back: sequence b owns
  // lengths[b] consecutive rows. Weights are laid out per sequence as
  // [head][query][key], sequences concatenated. An empty mask keeps all keys.
  AttentionOutput attention_packed(Var q, Var k, Var v, std::vector<std::size_t> lengths, std::size_t heads,
                                   std::vector<std::uint8_t> key_mask = {});
  Var sum(Var a);
  Var mean(Var a);
  // Mean binary cross-entropy of probabilities (m x 1) against 0/1 labels,
  // with probabilities clamped to [1e-7, 1 - 1e-7].
  Var bce(Var probs, std::vector<double> labels);

  // Fills grad() of every node reachable from the scalar loss. Node gradients
  // are reset at the start of each call.
  void backward(Var loss);

  struct Binding {
    const Parameter* param;
    Var leaf;
  };
  const std::vector<Binding>& bindings() const { return bindings_; }

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    bool needs_grad = false;
    std::function<void()> backward;
    std::vector<double> aux;
  };

  Node& node(Var v) { return nodes_[v.id]; }
  const Node& node(Var v) const { return nodes_[v.id]; }
  const Matrix& val(Var v) const;
  Matrix& grad_of(Var v);
  Var push(Matrix value, bool needs_grad);
  bool needs(Var v) const { return nodes_[v.id].needs_grad; }

  std::deque<Node> nodes_;
  std::vector<Binding> bindings_;
};

}  // namespace tdps::nn
