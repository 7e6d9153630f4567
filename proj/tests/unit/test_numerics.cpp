#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "../common/layer_checks.hpp"
#include "tdps/error.hpp"
#include "tdps/models/bert.hpp"
#include "tdps/nn/adam.hpp"
#include "tdps/nn/checkpoint.hpp"
#include "tdps/nn/layers.hpp"

using namespace tdps;
using namespace tdps::nn;
using tdps::testing::max_grad_error;
using tdps::testing::project;
using tdps::testing::random_matrix;
using tdps::testing::random_param;

namespace {

constexpr double kGradTol = 1e-4;

}  // namespace

TEST_CASE("product and sigmoid derivatives") {
  ParameterSet ps;
  auto& x = ps.add("x", 1, 1);
  auto& y = ps.add("y", 1, 1);
  x.value.data[0] = 3.0;
  y.value.data[0] = 4.0;
  Graph g;
  const Var vx = g.param(x);
  const Var vy = g.param(y);
  const Var loss = g.mul(vx, vy);
  g.backward(loss);
  CHECK(g.grad(vx).data[0] == 4.0);
  CHECK(g.grad(vy).data[0] == 3.0);

  auto& pre = ps.add("pre", 1, 1);
  Graph h;
  const Var z = h.param(pre);
  const Var s = h.sigmoid(z);
  h.backward(s);
  CHECK(h.grad(z).data[0] == doctest::Approx(0.25));
}

TEST_CASE("backward requires a scalar loss") {
  Graph g;
  const Var x = g.constant(Matrix(2, 2, 1.0));
  CHECK_THROWS_AS(g.backward(x), ContractViolation);
}

TEST_CASE("gemm kernels match their references bitwise") {
  Rng rng(5);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = 1 + rng.index(40);
    const std::size_t k = 1 + rng.index(40);
    const std::size_t n = 1 + rng.index(40);
    const Matrix a = random_matrix(m, k, rng);
    const Matrix b = random_matrix(k, n, rng);
    const Matrix c0 = random_matrix(m, n, rng);
    Matrix c1 = c0;
    Matrix c2 = c0;
    kernels::gemm(a, b, c1);
    kernels::gemm_reference(a, b, c2);
    REQUIRE(c1 == c2);

    const Matrix bt = random_matrix(n, k, rng);
    c1 = c0;
    c2 = c0;
    kernels::gemm_bt(a, bt, c1);
    kernels::gemm_bt_reference(a, bt, c2);
    REQUIRE(c1 == c2);

    const Matrix at = random_matrix(m, n, rng);
    Matrix d1(k, n);
    Matrix d2(k, n);
    kernels::gemm_at(a, at, d1);
    kernels::gemm_at_reference(a, at, d2);
    REQUIRE(d1 == d2);
  }
}

TEST_CASE("gradient checks over 20 seeds") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    for (const auto& [layer, err] : tdps::testing::layer_grad_errors(seed)) {
      CAPTURE(seed);
      CAPTURE(layer);
      CHECK(err < kGradTol);
    }
  }
}

TEST_CASE("random three-layer network gradients") {
  Rng rng(99);
  ParameterSet ps;
  auto& x = random_param(ps, "x", 4, 5, rng);
  Linear l1(ps, "l1", 5, 6, rng);
  Linear l2(ps, "l2", 6, 6, rng);
  Linear l3(ps, "l3", 6, 1, rng);
  std::vector<double> labels{1, 0, 0, 1};
  auto loss = [&](Graph& g) {
    const Var h1 = g.tanh(l1(g, g.param(x)));
    const Var h2 = g.sigmoid(l2(g, h1));
    return g.bce(g.sigmoid(l3(g, h2)), labels);
  };
  CHECK(max_grad_error(ps, loss) < kGradTol);
}

TEST_CASE("positional encoding") {
  const auto p0 = positional_encoding(0, 6);
  CHECK(p0 == std::vector<double>{0, 1, 0, 1, 0, 1});
  const auto p1 = positional_encoding(1, 4);
  CHECK(p1[0] == doctest::Approx(0.8415).epsilon(1e-4));
  CHECK(p1[1] == doctest::Approx(std::cos(1.0)));
  CHECK(p1[2] == doctest::Approx(std::sin(0.01)));
  CHECK_THROWS_AS(positional_encoding(1, 5), ContractViolation);
}

TEST_CASE("attention with identical keys is uniform over unmasked positions") {
  Graph g;
  Matrix q(4, 4, 0.3);
  Matrix kv(4, 4, 0.7);
  const auto out = g.attention_packed(g.constant(q), g.constant(kv), g.constant(kv), {4}, 2, {1, 1, 0, 1});
  for (std::size_t h = 0; h < 2; ++h) {
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) {
        const double w = out.weights[(h * 4 + i) * 4 + j];
        CHECK(w == doctest::Approx(j == 2 ? 0.0 : 1.0 / 3.0));
      }
    }
  }
  Graph g2;
  CHECK_THROWS_AS(g2.attention_packed(g2.constant(q), g2.constant(kv), g2.constant(kv), {4}, 2, {0, 0, 0, 0}),
                  ContractViolation);
}

TEST_CASE("lstm cell with zero parameters outputs zeros") {
  ParameterSet ps;
  Rng rng(1);
  LstmCell cell(ps, "cell", 3, 4, rng);
  cell.w_input->value.fill(0.0);
  cell.w_hidden->value.fill(0.0);
  cell.bias->value.fill(0.0);
  Graph g;
  Rng xr(2);
  const auto b = cell.bind(g);
  const auto s = cell.step(g, b, g.constant(random_matrix(2, 3, xr)),
                           {g.constant(Matrix(2, 4)), g.constant(Matrix(2, 4))});
  for (double v : g.value(s.h).data) {
    CHECK(v == 0.0);
  }
}

TEST_CASE("binary cross-entropy values") {
  Graph g;
  const Var loss = g.bce(g.constant(Matrix(2, 1, 0.5)), {0.0, 1.0});
  CHECK(g.value(loss).data[0] == doctest::Approx(std::log(2.0)));
  Graph h;
  const Var exact = h.bce(h.constant(Matrix(2, 1, std::vector<double>{0.0, 1.0})), {0.0, 1.0});
  CHECK(h.value(exact).data[0] <= 1e-6 * 16.2);
  CHECK(std::isfinite(h.value(exact).data[0]));
}

TEST_CASE("adam first step and zero gradients") {
  ParameterSet ps;
  auto& w = ps.add("w", 1, 3);
  w.value.data = {1.0, 2.0, 3.0};
  Adam adam(ps, {0.01});
  w.grad.data = {0.5, -2.0, 0.0};
  CHECK(adam.step(ps) == StepStatus::Applied);
  CHECK(w.value.data[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
  CHECK(w.value.data[1] == doctest::Approx(2.0 + 0.01).epsilon(1e-6));
  CHECK(w.value.data[2] == doctest::Approx(3.0));
  CHECK(adam.steps() == 1);
}

TEST_CASE("adam minimizes a quadratic and skips non-finite steps") {
  ParameterSet ps;
  auto& w = ps.add("w", 1, 1);
  Adam adam(ps, {0.1});
  for (int i = 0; i < 200; ++i) {
    w.grad.data[0] = 2.0 * (w.value.data[0] - 3.0);
    REQUIRE(adam.step(ps) == StepStatus::Applied);
  }
  CHECK(std::abs(w.value.data[0] - 3.0) < 0.1);
  const double before = w.value.data[0];
  w.grad.data[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK(adam.step(ps) == StepStatus::SkippedNonFinite);
  CHECK(w.value.data[0] == before);
}

TEST_CASE("parameter checkpoints reload bit-exactly") {
  Rng rng(3);
  ParameterSet a;
  Linear la(a, "lin", 7, 5, rng);
  la.weight->value.data[0] = 0.1 + 0.2;
  la.bias->value.data[0] = 1e-300;
  ParameterSet b;
  Rng other(4);
  Linear lb(b, "lin", 7, 5, other);
  const auto path = std::filesystem::temp_directory_path() / "tdps_ckpt_test.json";
  save_parameters(a, path);
  load_parameters(b, path);
  std::filesystem::remove(path);
  CHECK(lb.weight->value == la.weight->value);
  CHECK(lb.bias->value == la.bias->value);

  ParameterSet c;
  Linear lc(c, "lin", 7, 4, other);
  CHECK_THROWS(parameters_from_json(c, parameters_to_json(a)));
}

TEST_CASE("seeded initialization is reproducible") {
  ParameterSet a;
  ParameterSet b;
  Rng ra(77);
  Rng rb(77);
  Linear la(a, "lin", 6, 6, ra);
  Linear lb(b, "lin", 6, 6, rb);
  CHECK(la.weight->value == lb.weight->value);
}
