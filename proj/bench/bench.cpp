#include <benchmark/benchmark.h>

#include <numeric>

#include "tdps/claimsgen/generator.hpp"
#include "tdps/features/features.hpp"
#include "tdps/models/sequence.hpp"
#include "tdps/nn/checkpoint.hpp"
#include "tdps/nn/matrix.hpp"

using namespace tdps;

namespace {

nn::Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  nn::Matrix m(r, c);
  for (auto& v : m.data) {
    v = rng.uniform(-1, 1);
  }
  return m;
}

const claimsgen::ClaimsDataset& dataset() {
  static const auto data = [] {
    claimsgen::GeneratorParams p;
    p.n_samples = 2000;
    return claimsgen::generate_synthetic(
        p, claimsgen::ScenarioSpec::defaults(claimsgen::ScenarioKind::OccurrenceDistance), 1);
  }();
  return data;
}

template <void (*Gemm)(const nn::Matrix&, const nn::Matrix&, nn::Matrix&)>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, n, 1);
  const auto b = random_matrix(n, n, 2);
  nn::Matrix c(n, n);
  for (auto _ : state) {
    Gemm(a, b, c);
    benchmark::DoNotOptimize(c.data.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Gemm<nn::kernels::gemm_reference>)->Name("gemm/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_Gemm<nn::kernels::gemm>)->Name("gemm/parallel")->Arg(64)->Arg(256);

template <features::CountMatrix (*Count)(const claimsgen::ClaimsDataset&, std::span<const std::size_t>)>
void BM_CountMatrix(benchmark::State& state) {
  const auto& data = dataset();
  for (auto _ : state) {
    benchmark::DoNotOptimize(Count(data, {}));
  }
}
BENCHMARK(BM_CountMatrix<features::count_matrix_serial>)->Name("count_matrix/serial");
BENCHMARK(BM_CountMatrix<features::count_matrix>)->Name("count_matrix/parallel");

template <claimsgen::ClaimsDataset (*Generate)(const claimsgen::GeneratorParams&, const claimsgen::ScenarioSpec&,
                                               std::uint64_t)>
void BM_Generate(benchmark::State& state) {
  claimsgen::GeneratorParams p;
  p.n_samples = 1000;
  const auto spec = claimsgen::ScenarioSpec::defaults(claimsgen::ScenarioKind::OccurrenceDistance);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Generate(p, spec, 3));
  }
}
BENCHMARK(BM_Generate<claimsgen::generate_synthetic_serial>)->Name("generate/serial");
BENCHMARK(BM_Generate<claimsgen::generate_synthetic>)->Name("generate/parallel");

void BM_Predict(benchmark::State& state) {
  const auto& data = dataset();
  models::LstmEstimator lstm(data.dx, 4);
  lstm.load_parameters(nn::parameters_to_json(lstm.parameters()));
  std::vector<std::size_t> idx(500);
  std::iota(idx.begin(), idx.end(), 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(state.range(0) == 0 ? lstm.predict_serial(data, idx) : lstm.predict(data, idx));
  }
}
BENCHMARK(BM_Predict)->Name("lstm_predict/serial")->Arg(0);
BENCHMARK(BM_Predict)->Name("lstm_predict/parallel")->Arg(1);

}  // namespace

BENCHMARK_MAIN();
