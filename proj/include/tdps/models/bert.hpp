#pragma once

#include <optional>

#include "tdps/models/estimator.hpp"
#include "tdps/nn/layers.hpp"

namespace tdps::models {

enum class TokenLevel { Code, Record };

// Encoder input for one sequence. Token 0 is [CLS]; every other token is a
// bag of codes whose embeddings are averaged (a single code at code level).
struct EncoderInput {
  std::vector<std::vector<std::uint32_t>> tokens;
  std::vector<std::size_t> positions;
  std::vector<std::uint8_t> mask;
  std::size_t dropped_records = 0;
  std::size_t dropped_tokens = 0;

  std::size_t length() const { return tokens.size(); }
  bool truncated() const { return dropped_records + dropped_tokens > 0; }
};

// Codes in chronological order; codes of record t (1-based) share position t.
// Oldest records, then oldest tokens, are dropped to fit max_len.
EncoderInput build_input_code(const RecordSequence& seq, std::size_t max_len = 512);
// One token per record, positions 1..T.
EncoderInput build_input_record(const RecordSequence& seq, std::size_t max_len = 512);

struct BertConfig {
  std::size_t dim = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ff_dim = 256;
  std::size_t max_len = 512;
};

// Post-norm encoder block: x = LN(x + MHA(x)); x = LN(x + FF(x)).
struct EncoderLayer {
  nn::MultiHeadAttention attention;
  nn::LayerNorm norm1;
  nn::Linear ff1;
  nn::Linear ff2;
  nn::LayerNorm norm2;

  EncoderLayer(nn::ParameterSet& params, const std::string& name, const BertConfig& config, Rng& rng);

  struct Output {
    nn::Var x;
    std::span<const double> weights;  // per sequence [head][query][key]
  };
  // x holds the sequences unpadded, lengths[b] rows each.
  Output operator()(nn::Graph& g, nn::Var x, const std::vector<std::size_t>& lengths,
                    const std::vector<std::uint8_t>& mask) const;
};

struct BertResult {
  double ps = 0.5;
  // attention[layer][head] is an (L x L) row-stochastic matrix.
  std::vector<std::vector<nn::Matrix>> attention;
};

class BertEstimator : public NeuralEstimator {
 public:
  BertEstimator(TokenLevel level, std::size_t dx, std::uint64_t seed, BertConfig config = {});
  std::string name() const override { return level_ == TokenLevel::Code ? "bert-code" : "bert-record"; }

  EncoderInput build_input(const RecordSequence& seq) const;
  nn::Var forward(nn::Graph& g, std::span<const LabeledSample* const> batch) const override;
  BertResult bert_forward(const EncoderInput& input) const;

  bool has_attention() const override { return true; }
  ClsAttention cls_attention(const RecordSequence& seq) const override;
  // Number of the given samples whose input exceeds max_len.
  std::size_t truncated_count(const ClaimsDataset& data, std::span<const std::size_t> idx) const;

  nlohmann::json describe() const override;
  TokenLevel level() const { return level_; }

 private:
  struct Encoded {
    nn::Var cls;
    std::vector<std::span<const double>> weights;
  };
  Encoded encode(nn::Graph& g, std::span<const EncoderInput> inputs) const;

  TokenLevel level_;
  std::size_t dx_;
  BertConfig config_;
  nn::Parameter* table_;  // (dx + 1) x dim; row dx is [CLS]
  std::vector<EncoderLayer> layers_;
  std::optional<nn::Linear> head_;
};

// Last-layer [CLS] query row averaged over heads.
std::vector<double> extract_cls_attention(const BertResult& result);

}  // namespace tdps::models
