#pragma once

#include <array>
#include <vector>

#include "tdps/claimsgen/types.hpp"
#include "tdps/rng.hpp"

namespace tdps::claimsgen {

// Five degree-4 Bezier archetypes modulating the dynamic variables over time.
enum class SplineArchetype {
  MildIncline,
  MildDecline,
  SteepInclineMildDecline,
  SteepDeclineMildIncline,
  Stable,
};

inline constexpr std::size_t kSplineArchetypes = 5;

const std::array<double, 5>& control_points(SplineArchetype archetype);

// Degree-4 Bezier curve evaluated at s in [0,1].
double bezier4(const std::array<double, 5>& control, double s);

// Evaluates the archetype at t/(T-1), t = 0..T-1 (s = 0 when T = 1).
std::vector<double> spline_series(SplineArchetype archetype, std::size_t T);

// Picks an archetype uniformly and returns its series of length T.
std::vector<double> sample_spline_coeffs(std::size_t T, Rng& rng);

// Row-major T x dx matrix of occurrence probabilities P_tk ~ Beta(B_tk, C_tk).
struct OccurrenceProbs {
  std::size_t T = 0;
  std::size_t dx = 0;
  std::vector<double> p;

  double operator()(std::size_t t, std::size_t k) const { return p[t * dx + k]; }
};

OccurrenceProbs gen_occurrence_probs(const GeneratorParams& params, std::size_t T, Rng& rng);

// Bernoulli draws of every (t, k) entry of P.
RecordSequence sample_records(const OccurrenceProbs& probs, Rng& rng);

// T ~ Poisson(lambda) resampled until T >= 2, then P and X.
RecordSequence gen_record_sequence(const GeneratorParams& params, Rng& rng);

// One labeled sample drawn from its own stream keyed by (seed, index).
LabeledSample generate_sample(const GeneratorParams& params, const ScenarioSpec& spec, std::uint64_t seed,
                              std::size_t index);

// Full dataset; samples are generated in parallel with OpenMP. Results are
// independent of the thread count.
ClaimsDataset generate_synthetic(const GeneratorParams& params, const ScenarioSpec& spec, std::uint64_t seed);

// Single-threaded reference for generate_synthetic.
ClaimsDataset generate_synthetic_serial(const GeneratorParams& params, const ScenarioSpec& spec, std::uint64_t seed);

}  // namespace tdps::claimsgen
