#pragma once

#include "tdps/models/estimator.hpp"

namespace tdps::models {

// Test oracle: returns each sample's true propensity score.
class OracleEstimator : public PropensityEstimator {
 public:
  std::string name() const override { return "oracle"; }
  TrainLog fit(const ClaimsDataset& data, std::span<const std::size_t> train, const TrainConfig& config) override;
  double predict_ps(const LabeledSample& sample) const override;
  // A bare sequence carries no ground truth; always a contract violation.
  double predict_ps(const RecordSequence& seq) const override;
};

// Predicts the treated prevalence of its training set for every sample.
class ConstantEstimator : public PropensityEstimator {
 public:
  using PropensityEstimator::predict_ps;
  std::string name() const override { return "constant"; }
  TrainLog fit(const ClaimsDataset& data, std::span<const std::size_t> train, const TrainConfig& config) override;
  double predict_ps(const LabeledSample& sample) const override;
  double prevalence() const { return prevalence_; }
  nlohmann::json describe() const override;

 private:
  double prevalence_ = 0.5;
};

}  // namespace tdps::models
