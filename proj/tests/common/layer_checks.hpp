#pragma once

#include <map>
#include <string>

#include "gradcheck.hpp"
#include "tdps/models/bert.hpp"
#include "tdps/nn/layers.hpp"

namespace tdps::testing {

inline nn::Parameter& random_param(nn::ParameterSet& ps, const std::string& name, std::size_t r, std::size_t c,
                                   Rng& rng) {
  auto& p = ps.add(name, r, c);
  p.value = random_matrix(r, c, rng);
  return p;
}

inline double min_ff_preactivation(const models::EncoderLayer& layer, const nn::Parameter& x,
                                   const std::vector<std::size_t>& lengths, const std::vector<std::uint8_t>& mask) {
  nn::Graph g;
  const nn::Var in = g.param(x);
  const nn::Var h = layer.norm1(g, g.add(in, layer.attention.packed(g, in, lengths, mask).output));
  double m = 1e300;
  for (double v : g.value(layer.ff1(g, h)).data) {
    m = std::min(m, std::abs(v));
  }
  return m;
}

// Worst finite-difference relative error of each layer for one seed.
inline std::map<std::string, double> layer_grad_errors(std::uint64_t seed) {
  using namespace nn;
  std::map<std::string, double> out;
  Rng rng(seed);
  {
    ParameterSet ps;
    auto& x = random_param(ps, "x", 3, 4, rng);
    Linear lin(ps, "lin", 4, 5, rng);
    const Matrix w = random_matrix(3, 5, rng);
    out["affine"] = max_grad_error(ps, [&](Graph& g) { return project(g, lin(g, g.param(x)), w); });
  }
  {
    ParameterSet ps;
    auto& x = random_param(ps, "x", 4, 3, rng);
    const Matrix w = random_matrix(4, 3, rng);
    out["sigmoid"] = max_grad_error(ps, [&](Graph& g) { return project(g, g.sigmoid(g.param(x)), w); });
    out["tanh"] = max_grad_error(ps, [&](Graph& g) { return project(g, g.tanh(g.param(x)), w); });
  }
  {
    ParameterSet ps;
    auto& x = random_param(ps, "x", 3, 4, rng);
    const Matrix w = random_matrix(3, 4, rng);
    const std::vector<std::uint8_t> mask{1, 1, 0, 1, 1, 0, 1, 1, 1, 1, 1, 1};
    out["softmax"] = max_grad_error(ps, [&](Graph& g) { return project(g, g.softmax_rows(g.param(x), mask), w); });
  }
  {
    ParameterSet ps;
    auto& x = random_param(ps, "x", 3, 6, rng);
    LayerNorm ln(ps, "ln", 6);
    ln.gamma->value = random_matrix(1, 6, rng);
    ln.beta->value = random_matrix(1, 6, rng);
    const Matrix w = random_matrix(3, 6, rng);
    out["layer norm"] = max_grad_error(ps, [&](Graph& g) { return project(g, ln(g, g.param(x)), w); });
  }
  {
    ParameterSet ps;
    auto& table = random_param(ps, "table", 5, 3, rng);
    const Matrix w = random_matrix(3, 3, rng);
    const std::vector<std::vector<std::uint32_t>> bags{{0, 2}, {}, {1, 1, 4}};
    out["embedding bag"] =
        max_grad_error(ps, [&](Graph& g) { return project(g, g.embedding_bag(g.param(table), bags), w); });
  }
  {
    ParameterSet ps;
    std::vector<Parameter*> xs;
    for (int t = 0; t < 3; ++t) {
      xs.push_back(&random_param(ps, "x" + std::to_string(t), 2, 4, rng));
    }
    LstmCell cell(ps, "cell", 4, 5, rng);
    const Matrix w = random_matrix(2, 5, rng);
    out["lstm cell"] = max_grad_error(ps, [&](Graph& g) {
      const auto b = cell.bind(g);
      LstmCell::State s{g.constant(Matrix(2, 5)), g.constant(Matrix(2, 5))};
      for (auto* x : xs) {
        s = cell.step(g, b, g.param(*x), s);
      }
      return g.add(project(g, s.h, w), project(g, s.c, w));
    });
  }
  {
    ParameterSet ps;
    auto& x = random_param(ps, "x", 7, 8, rng);
    MultiHeadAttention mha(ps, "mha", 8, 2, rng);
    const Matrix w = random_matrix(7, 8, rng);
    const std::vector<std::size_t> lengths{3, 4};
    const std::vector<std::uint8_t> mask{1, 1, 0, 1, 1, 1, 0};
    const double packed = max_grad_error(
        ps, [&](Graph& g) { return project(g, mha.packed(g, g.param(x), lengths, mask).output, w); });
    ParameterSet ps2;
    auto& y = random_param(ps2, "y", 8, 8, rng);
    MultiHeadAttention mha2(ps2, "mha", 8, 4, rng);
    const Matrix w2 = random_matrix(8, 8, rng);
    const std::vector<std::uint8_t> mask2{1, 1, 1, 0, 1, 1, 0, 0};
    const double padded =
        max_grad_error(ps2, [&](Graph& g) { return project(g, mha2(g, g.param(y), 2, 4, mask2).output, w2); });
    out["attention"] = std::max(packed, padded);
  }
  {
    ParameterSet ps;
    auto& x = random_param(ps, "x", 5, 8, rng);
    models::BertConfig config{8, 1, 2, 16, 16};
    models::EncoderLayer layer(ps, "enc", config, rng);
    const Matrix w = random_matrix(5, 8, rng);
    const std::vector<std::size_t> lengths{2, 3};
    const std::vector<std::uint8_t> mask(5, 1);
    // Finite differences are meaningless across a rectifier kink.
    while (min_ff_preactivation(layer, x, lengths, mask) < 1e-3) {
      x.value = random_matrix(5, 8, rng);
    }
    out["encoder block"] =
        max_grad_error(ps, [&](Graph& g) { return project(g, layer(g, g.param(x), lengths, mask).x, w); });
  }
  {
    ParameterSet ps;
    auto& x = random_param(ps, "x", 6, 3, rng);
    Linear lin(ps, "lin", 3, 1, rng);
    const std::vector<double> labels{0, 1, 1, 0, 1, 0};
    out["bce"] = max_grad_error(ps, [&](Graph& g) { return g.bce(g.sigmoid(lin(g, g.param(x))), labels); });
  }
  return out;
}

}  // namespace tdps::testing
