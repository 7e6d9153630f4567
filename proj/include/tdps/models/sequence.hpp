#pragma once

#include <optional>

#include "tdps/models/estimator.hpp"
#include "tdps/nn/layers.hpp"

namespace tdps::models {

// Mean of the embeddings of the record's codes; an empty record gives zeros.
// Codes are summed in ascending order so the result does not depend on the
// order they are listed in.
std::vector<double> record_pool(const claimsgen::CodeSet& record, const nn::Matrix& table);

// Per-record code bags (sorted) for a sequence, for Graph::embedding_bag.
std::vector<std::vector<std::uint32_t>> record_bags(const RecordSequence& seq);

struct LstmConfig {
  std::size_t embed_dim = 64;
  std::size_t hidden_dim = 64;
  std::size_t layers = 2;
};

// Record average-pooling, stacked LSTM, affine + sigmoid on the final hidden
// state. Batches are right-padded; padded steps carry the previous state.
class LstmEstimator : public NeuralEstimator {
 public:
  LstmEstimator(std::size_t dx, std::uint64_t seed, LstmConfig config = {});
  std::string name() const override { return "lstm"; }
  nn::Var forward(nn::Graph& g, std::span<const LabeledSample* const> batch) const override;
  nlohmann::json describe() const override;
  const nn::Parameter& embedding() const { return *table_; }

 private:
  std::size_t dx_;
  LstmConfig config_;
  nn::Parameter* table_;
  std::vector<nn::LstmCell> cells_;
  std::optional<nn::Linear> head_;
};

}  // namespace tdps::models
