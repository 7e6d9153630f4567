#include "tdps/nn/adam.hpp"

#include <cmath>

#include "tdps/error.hpp"

namespace tdps::nn {

Adam::Adam(const ParameterSet& params, AdamConfig config) : config_(config) {
  for (const auto& p : params) {
    first_.emplace_back(p.value.rows, p.value.cols);
    second_.emplace_back(p.value.rows, p.value.cols);
  }
}

StepStatus Adam::step(ParameterSet& params) {
  require(params.size() == first_.size(), "optimizer state does not match the parameter set");
  for (const auto& p : params) {
    for (double g : p.grad.data) {
      if (!std::isfinite(g)) {
        return StepStatus::SkippedNonFinite;
      }
    }
  }
  ++step_count_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
  std::size_t idx = 0;
  for (auto& p : params) {
    Matrix& m = first_[idx];
    Matrix& v = second_[idx];
    require(m.same_shape(p.value), "optimizer moment shape mismatch for " + p.name);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad.data[i];
      m.data[i] = b1 * m.data[i] + (1.0 - b1) * g;
      v.data[i] = b2 * v.data[i] + (1.0 - b2) * g * g;
      const double m_hat = m.data[i] / correction1;
      const double v_hat = v.data[i] / correction2;
      p.value.data[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
    ++idx;
  }
  return StepStatus::Applied;
}

}  // namespace tdps::nn
