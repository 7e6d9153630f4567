#pragma once

#include <optional>

#include "tdps/features/features.hpp"
#include "tdps/models/estimator.hpp"
#include "tdps/nn/layers.hpp"

namespace tdps::models {

enum class FeatureMode { Counts, Hdps };

// Standardized counts or HDPS binaries computed from a record sequence.
class FlatFeatures {
 public:
  explicit FlatFeatures(FeatureMode mode, std::size_t dx) : mode_(mode), dx_(dx) {}

  void fit(const ClaimsDataset& data, std::span<const std::size_t> idx, std::string fitted_on);
  bool fitted() const { return standardizer_.has_value() || hdps_.has_value(); }
  std::vector<double> transform(const RecordSequence& seq) const;
  std::size_t width() const { return mode_ == FeatureMode::Hdps ? 3 * dx_ : dx_; }
  FeatureMode mode() const { return mode_; }
  nlohmann::json describe() const;

 private:
  FeatureMode mode_;
  std::size_t dx_;
  std::optional<features::StandardizerStats> standardizer_;
  std::optional<features::HdpsThresholds> hdps_;
};

// Base for estimators over flat covariates. If prepare() was not called,
// fit() fits feature statistics on its training indices.
class FlatEstimator : public NeuralEstimator {
 public:
  FlatEstimator(FeatureMode mode, std::size_t dx) : features_(mode, dx) {}

  void prepare(const ClaimsDataset& data, std::span<const std::size_t> fit_indices) override;
  TrainLog fit(const ClaimsDataset& data, std::span<const std::size_t> train, const TrainConfig& config) override;
  nn::Var forward(nn::Graph& g, std::span<const LabeledSample* const> batch) const override;
  // Probability from an already-transformed feature vector.
  double predict_features(std::span<const double> x) const;
  const FlatFeatures& features() const { return features_; }
  nlohmann::json describe() const override;

 protected:
  virtual nn::Var forward_features(nn::Graph& g, nn::Var x) const = 0;
  bool prepared_ = false;
  FlatFeatures features_;
};

class LogisticRegression : public FlatEstimator {
 public:
  LogisticRegression(FeatureMode mode, std::size_t dx, std::uint64_t seed);
  std::string name() const override { return features_.mode() == FeatureMode::Hdps ? "lr-hdps" : "lr"; }

 protected:
  nn::Var forward_features(nn::Graph& g, nn::Var x) const override;

 private:
  nn::Linear linear_;
};

// Two hidden rectifier layers of `hidden` units.
class Mlp : public FlatEstimator {
 public:
  Mlp(FeatureMode mode, std::size_t dx, std::uint64_t seed, std::size_t hidden = 64);
  std::string name() const override { return features_.mode() == FeatureMode::Hdps ? "mlp-hdps" : "mlp"; }
  nlohmann::json describe() const override;

 protected:
  nn::Var forward_features(nn::Graph& g, nn::Var x) const override;

 private:
  std::size_t hidden_;
  std::optional<nn::Linear> l1_;
  std::optional<nn::Linear> l2_;
  std::optional<nn::Linear> out_;
};

// MLP over a learned code-embedding bag (mean over every code occurrence in
// the sequence). Off by default; selected with the "mlp-embed" name.
class EmbeddingBagMlp : public NeuralEstimator {
 public:
  EmbeddingBagMlp(std::size_t dx, std::uint64_t seed, std::size_t embed = 64, std::size_t hidden = 64);
  std::string name() const override { return "mlp-embed"; }
  nn::Var forward(nn::Graph& g, std::span<const LabeledSample* const> batch) const override;
  nlohmann::json describe() const override;

 private:
  std::size_t dx_;
  nn::Parameter* table_;
  nn::Linear l1_;
  nn::Linear l2_;
  nn::Linear out_;
};

}  // namespace tdps::models
