#include "tdps/nn/parameter.hpp"

#include <cmath>

#include "tdps/error.hpp"
#include "tdps/nn/graph.hpp"

namespace tdps::nn {

Parameter& ParameterSet::add(const std::string& name, std::size_t rows, std::size_t cols) {
  for (const auto& p : params_) {
    require(p.name != name, "duplicate parameter name " + name);
  }
  return params_.emplace_back(name, rows, cols);
}

Parameter& ParameterSet::add_glorot(const std::string& name, std::size_t rows, std::size_t cols, Rng& rng) {
  Parameter& p = add(name, rows, cols);
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (double& v : p.value.data) {
    v = rng.uniform(-limit, limit);
  }
  return p;
}

Parameter& ParameterSet::at(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) {
      return p;
    }
  }
  throw ContractViolation("no parameter named " + name);
}

const Parameter& ParameterSet::at(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) {
      return p;
    }
  }
  throw ContractViolation("no parameter named " + name);
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    n += p.value.size();
  }
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) {
    p.grad.fill(0.0);
  }
}

void ParameterSet::accumulate_grads(const Graph& graph) {
  for (const auto& binding : graph.bindings()) {
    const Matrix& g = graph.grad(binding.leaf);
    if (g.size() == 0) {
      continue;
    }
    for (auto& p : params_) {
      if (&p != binding.param) {
        continue;
      }
      for (std::size_t i = 0; i < g.size(); ++i) {
        p.grad.data[i] += g.data[i];
      }
      break;
    }
  }
}

void ParameterSet::copy_values_from(const ParameterSet& other) {
  require(other.size() == size(), "parameter sets differ in size");
  auto it = other.params_.begin();
  for (auto& p : params_) {
    require(p.name == it->name && p.value.same_shape(it->value), "parameter sets differ in layout");
    p.value = it->value;
    ++it;
  }
}

}  // namespace tdps::nn
