#include "tdps/models/baselines.hpp"

#include "tdps/error.hpp"

namespace tdps::models {

TrainLog OracleEstimator::fit(const ClaimsDataset& data, std::span<const std::size_t> train, const TrainConfig&) {
  check_both_classes(data, train);
  mark_trained();
  TrainLog log;
  log.train_size = train.size();
  return log;
}

double OracleEstimator::predict_ps(const LabeledSample& sample) const {
  require_trained();
  require(sample.true_ps > 0.0 && sample.true_ps < 1.0, "oracle: true propensity outside (0,1)");
  return sample.true_ps;
}

double OracleEstimator::predict_ps(const RecordSequence&) const {
  require(false, "oracle estimator needs labeled samples");
  return 0.5;
}

TrainLog ConstantEstimator::fit(const ClaimsDataset& data, std::span<const std::size_t> train, const TrainConfig&) {
  check_both_classes(data, train);
  double treated = 0.0;
  for (auto i : train) {
    treated += data.samples.at(i).treatment;
  }
  prevalence_ = treated / static_cast<double>(train.size());
  mark_trained();
  TrainLog log;
  log.train_size = train.size();
  return log;
}

double ConstantEstimator::predict_ps(const LabeledSample&) const {
  require_trained();
  return prevalence_;
}

nlohmann::json ConstantEstimator::describe() const {
  return {{"name", name()}, {"prevalence", prevalence_}};
}

}  // namespace tdps::models
