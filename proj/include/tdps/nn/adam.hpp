#pragma once

#include <vector>

#include "tdps/nn/parameter.hpp"

namespace tdps::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

enum class StepStatus {
  Applied,
  SkippedNonFinite,  // some gradient was NaN/inf; parameters untouched
};

// Bias-corrected Adam with a constant learning rate.
class Adam {
 public:
  Adam(const ParameterSet& params, AdamConfig config);

  // Updates parameter values from their grads. The caller zeroes grads
  // afterwards.
  [[nodiscard]] StepStatus step(ParameterSet& params);

  std::size_t steps() const { return step_count_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::size_t step_count_ = 0;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
};

}  // namespace tdps::nn
