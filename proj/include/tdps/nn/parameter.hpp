#pragma once

#include <deque>
#include <string>

#include "tdps/nn/matrix.hpp"
#include "tdps/rng.hpp"

namespace tdps::nn {

class Graph;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter(std::string n, std::size_t rows, std::size_t cols)
      : name(std::move(n)), value(rows, cols), grad(rows, cols) {}
};

// Owns a model's trainable tensors. Addresses stay stable as parameters are
// added, so graphs may hold pointers to them.
class ParameterSet {
 public:
  Parameter& add(const std::string& name, std::size_t rows, std::size_t cols);
  // Uniform in +-sqrt(6 / (fan_in + fan_out)).
  Parameter& add_glorot(const std::string& name, std::size_t rows, std::size_t cols, Rng& rng);

  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  // Adds each parameter-leaf gradient of a graph (after backward) into the
  // owning Parameter::grad. Leaves bound to other sets are ignored.
  void accumulate_grads(const Graph& graph);

  // Copies values only; shapes and names must match.
  void copy_values_from(const ParameterSet& other);

 private:
  std::deque<Parameter> params_;
};

}  // namespace tdps::nn
