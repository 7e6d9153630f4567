#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tdps {

// Derives an independent 64-bit seed from (master seed, role, index). Adding a
// new role never perturbs streams of existing roles.
std::uint64_t derive_seed(std::uint64_t master, std::string_view role, std::uint64_t index = 0);

// 64-bit FNV-1a; used for config hashes and vocabulary fingerprints.
std::uint64_t fnv1a64(std::string_view bytes);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal(double mean, double stddev) { return std::normal_distribution<double>(mean, stddev)(engine_); }
  double gamma(double shape) { return std::gamma_distribution<double>(shape, 1.0)(engine_); }
  double beta(double a, double b);
  int poisson(double mean) { return std::poisson_distribution<int>(mean)(engine_); }
  bool bernoulli(double p) { return std::bernoulli_distribution(p)(engine_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tdps
