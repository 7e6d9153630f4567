#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tdps/claimsgen/types.hpp"
#include "tdps/nn/graph.hpp"
#include "tdps/nn/parameter.hpp"

namespace tdps::models {

using claimsgen::ClaimsDataset;
using claimsgen::LabeledSample;
using claimsgen::RecordSequence;

struct TrainConfig {
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  double min_delta = 1e-4;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
// Missing fields keep the values already in `base`.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  std::size_t skipped_steps = 0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_validation_loss = 0.0;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
  bool early_stopped = false;
};

nlohmann::json to_json(const TrainLog& log);

// Last-layer [CLS] attention of a sample, averaged over heads. Entry 0 is the
// [CLS] position; token_codes[i] lists the codes behind input position i.
struct ClsAttention {
  std::vector<double> weights;
  std::vector<std::vector<std::uint32_t>> token_codes;
};

// Maps a sample's record sequence to an estimated propensity score in (0,1).
class PropensityEstimator {
 public:
  virtual ~PropensityEstimator() = default;

  virtual std::string name() const = 0;

  // Dataset-level preprocessing (feature statistics) fitted on `fit_indices`.
  virtual void prepare(const ClaimsDataset& data, std::span<const std::size_t> fit_indices);

  virtual TrainLog fit(const ClaimsDataset& data, std::span<const std::size_t> train, const TrainConfig& config) = 0;

  // Throws ContractViolation before fit() or a checkpoint load.
  virtual double predict_ps(const LabeledSample& sample) const = 0;
  virtual double predict_ps(const RecordSequence& seq) const;

  // Estimates for data.samples[idx[i]]; chunks run in parallel.
  virtual std::vector<double> predict(const ClaimsDataset& data, std::span<const std::size_t> idx) const;
  // Single-threaded reference for predict().
  virtual std::vector<double> predict_serial(const ClaimsDataset& data, std::span<const std::size_t> idx) const;

  virtual bool has_attention() const { return false; }
  // Throws ContractViolation unless has_attention().
  virtual ClsAttention cls_attention(const RecordSequence& seq) const;
  bool trained() const { return trained_; }

  // Hyperparameters and fitted feature statistics, for reports and manifests.
  virtual nlohmann::json describe() const;

 protected:
  void require_trained() const;
  void mark_trained() { trained_ = true; }

 private:
  bool trained_ = false;
};

// Throws TrainingError unless both treatment classes occur in `idx`.
void check_both_classes(const ClaimsDataset& data, std::span<const std::size_t> idx);

// Stratified split of `train` into (fit, validation) subsets.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(const ClaimsDataset& data,
                                                                                std::span<const std::size_t> train,
                                                                                double validation_fraction,
                                                                                std::uint64_t seed);

// Estimator backed by a differentiable model trained with minibatch Adam on
// binary cross-entropy against the treatment labels.
class NeuralEstimator : public PropensityEstimator {
 public:
  using PropensityEstimator::predict_ps;
  TrainLog fit(const ClaimsDataset& data, std::span<const std::size_t> train, const TrainConfig& config) override;
  double predict_ps(const LabeledSample& sample) const override;
  std::vector<double> predict(const ClaimsDataset& data, std::span<const std::size_t> idx) const override;
  std::vector<double> predict_serial(const ClaimsDataset& data, std::span<const std::size_t> idx) const override;

  // (batch x 1) probabilities for the given samples.
  virtual nn::Var forward(nn::Graph& g, std::span<const LabeledSample* const> batch) const = 0;

  // Mean BCE over the samples, evaluated without gradients.
  double mean_loss(const ClaimsDataset& data, std::span<const std::size_t> idx) const;

  nn::ParameterSet& parameters() { return params_; }
  const nn::ParameterSet& parameters() const { return params_; }

  // params.json plus manifest.json (kind, hyperparameters, feature stats,
  // vocabulary hash).
  void save_checkpoint(const std::filesystem::path& dir, std::uint64_t vocabulary_hash) const;
  // Loads parameter values and marks the estimator trained.
  void load_checkpoint(const std::filesystem::path& dir);
  void load_parameters(const nlohmann::json& params_json);

 protected:
  nn::ParameterSet params_;
};

// Vocabulary fingerprint recorded in checkpoint manifests.
std::uint64_t vocabulary_hash(const ClaimsDataset& data);

}  // namespace tdps::models
