#pragma once

#include <optional>
#include <utility>

#include "tdps/claimsgen/types.hpp"
#include "tdps/rng.hpp"

namespace tdps::claimsgen {

// Longest run of adjacent records that all contain `code`.
std::size_t consec_feature(const RecordSequence& seq, Code code);

// Shortest record-wise distance between an occurrence of code_a and one of
// code_b; empty when either code never occurs.
std::optional<std::size_t> distance_feature(const RecordSequence& seq, Code code_a, Code code_b);

// Number of records among the last min(window, T) containing `code`.
std::size_t window_feature(const RecordSequence& seq, Code code, std::size_t window);

// The scenario's confounding feature (o, d or c). Empty only for a distance
// scenario whose codes do not both occur.
std::optional<std::size_t> scenario_feature(const RecordSequence& seq, const ScenarioSpec& spec);

// Noise-free propensity and untreated-outcome means for a feature value.
// SemiSyntheticDistance throws ScenarioError when the distance is absent or 0.
double propensity_mean(std::optional<std::size_t> feature, const ScenarioSpec& spec);
double outcome_mean(std::optional<std::size_t> feature, const ScenarioSpec& spec);

double sigmoid(double z);

// e = clamp(mean + eps, ps_clamp), eps ~ Normal(0, ps_noise_var).
double scenario_propensity(const RecordSequence& seq, const ScenarioSpec& spec, Rng& rng);

// (y0, y1) with y1 = y0 + treatment_effect.
std::pair<double, double> scenario_outcome(const RecordSequence& seq, const ScenarioSpec& spec, Rng& rng);

// A ~ Bernoulli(e); e must lie strictly inside (0,1).
int assign_treatment(double e, Rng& rng);

// Draws true PS, potential outcomes and treatment for one sequence.
LabeledSample label_sample(std::uint64_t id, RecordSequence seq, const ScenarioSpec& spec, Rng& rng);

}  // namespace tdps::claimsgen
