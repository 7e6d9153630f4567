#include "tdps/models/bert.hpp"

#include <algorithm>

#include "tdps/error.hpp"
#include "tdps/models/sequence.hpp"
#include "tdps/rng.hpp"

namespace tdps::models {

namespace {

constexpr std::uint32_t kClsMarker = 0xffffffffu;

EncoderInput start_input() {
  EncoderInput in;
  in.tokens.push_back({kClsMarker});
  in.positions.push_back(0);
  return in;
}

void finish(EncoderInput& in) {
  in.mask.assign(in.tokens.size(), 1);
}

}  // namespace

EncoderInput build_input_code(const RecordSequence& seq, std::size_t max_len) {
  require(seq.length() >= 1, "encoder input needs at least one record");
  require(max_len >= 2, "max_len must leave room for one token");
  const std::size_t budget = max_len - 1;
  std::size_t first = seq.length();
  std::size_t used = 0;
  while (first > 0 && used + seq.records[first - 1].size() <= budget) {
    used += seq.records[--first].size();
  }
  EncoderInput in = start_input();
  in.dropped_records = first;
  // The newest dropped record may still fill part of the budget.
  std::size_t skip = 0;
  if (first > 0 && used < budget) {
    --first;
    --in.dropped_records;
    skip = seq.records[first].size() - (budget - used);
    in.dropped_tokens = skip;
  }
  for (std::size_t t = first; t < seq.length(); ++t) {
    std::vector<claimsgen::Code> codes(seq.records[t].begin(), seq.records[t].end());
    std::sort(codes.begin(), codes.end());
    for (std::size_t i = t == first ? skip : 0; i < codes.size(); ++i) {
      in.tokens.push_back({codes[i]});
      in.positions.push_back(t + 1);
    }
  }
  finish(in);
  return in;
}

EncoderInput build_input_record(const RecordSequence& seq, std::size_t max_len) {
  require(seq.length() >= 1, "encoder input needs at least one record");
  require(max_len >= 2, "max_len must leave room for one token");
  EncoderInput in = start_input();
  const auto bags = record_bags(seq);
  const std::size_t first = bags.size() > max_len - 1 ? bags.size() - (max_len - 1) : 0;
  in.dropped_records = first;
  for (std::size_t t = first; t < bags.size(); ++t) {
    in.tokens.push_back(bags[t]);
    in.positions.push_back(t + 1);
  }
  finish(in);
  return in;
}

EncoderLayer::EncoderLayer(nn::ParameterSet& params, const std::string& name, const BertConfig& config, Rng& rng)
    : attention(params, name + ".attention", config.dim, config.heads, rng),
      norm1(params, name + ".norm1", config.dim),
      ff1(params, name + ".ff1", config.dim, config.ff_dim, rng),
      ff2(params, name + ".ff2", config.ff_dim, config.dim, rng),
      norm2(params, name + ".norm2", config.dim) {}

EncoderLayer::Output EncoderLayer::operator()(nn::Graph& g, nn::Var x, const std::vector<std::size_t>& lengths,
                                              const std::vector<std::uint8_t>& mask) const {
  const auto att = attention.packed(g, x, lengths, mask);
  const nn::Var h = norm1(g, g.add(x, att.output));
  const nn::Var ff = ff2(g, g.relu(ff1(g, h)));
  return {norm2(g, g.add(h, ff)), att.weights};
}

BertEstimator::BertEstimator(TokenLevel level, std::size_t dx, std::uint64_t seed, BertConfig config)
    : level_(level), dx_(dx), config_(config) {
  require(config.dim % 2 == 0, "model dimension must be even");
  Rng rng(derive_seed(seed, level == TokenLevel::Code ? "init:bert-code" : "init:bert-record"));
  table_ = &params_.add_glorot("embedding", dx + 1, config.dim, rng);
  for (std::size_t l = 0; l < config.layers; ++l) {
    layers_.emplace_back(params_, "encoder" + std::to_string(l), config, rng);
  }
  head_.emplace(params_, "output", config.dim, 1, rng);
}

EncoderInput BertEstimator::build_input(const RecordSequence& seq) const {
  return level_ == TokenLevel::Code ? build_input_code(seq, config_.max_len) : build_input_record(seq, config_.max_len);
}

BertEstimator::Encoded BertEstimator::encode(nn::Graph& g, std::span<const EncoderInput> inputs) const {
  std::vector<std::size_t> lengths;
  std::vector<std::vector<std::uint32_t>> bags;
  std::vector<std::size_t> positions;
  std::vector<std::uint8_t> mask;
  std::vector<std::size_t> cls_rows;
  for (const auto& in : inputs) {
    cls_rows.push_back(bags.size());
    lengths.push_back(in.length());
    for (std::size_t i = 0; i < in.length(); ++i) {
      auto bag = in.tokens[i];
      for (auto& code : bag) {
        if (code == kClsMarker) {
          code = static_cast<std::uint32_t>(dx_);
        } else {
          require(code < dx_, "encoder input: code out of range");
        }
      }
      bags.push_back(std::move(bag));
      positions.push_back(in.positions[i]);
      mask.push_back(in.mask[i]);
    }
  }
  nn::Var x = g.add(g.embedding_bag(g.param(*table_), std::move(bags)),
                    g.constant(nn::positional_matrix(positions, config_.dim)));
  Encoded enc;
  for (const auto& layer : layers_) {
    const auto out = layer(g, x, lengths, mask);
    x = out.x;
    enc.weights.push_back(out.weights);
  }
  enc.cls = g.select_rows(x, std::move(cls_rows));
  return enc;
}

nn::Var BertEstimator::forward(nn::Graph& g, std::span<const LabeledSample* const> batch) const {
  std::vector<EncoderInput> inputs;
  inputs.reserve(batch.size());
  for (const auto* s : batch) {
    inputs.push_back(build_input(s->seq));
  }
  return g.sigmoid((*head_)(g, encode(g, inputs).cls));
}

BertResult BertEstimator::bert_forward(const EncoderInput& input) const {
  require(!input.tokens.empty() && input.positions.size() == input.tokens.size() &&
              input.mask.size() == input.tokens.size(),
          "malformed encoder input");
  nn::Graph g;
  const auto enc = encode(g, std::span<const EncoderInput>(&input, 1));
  BertResult r;
  r.ps = g.value(g.sigmoid((*head_)(g, enc.cls))).data[0];
  const std::size_t L = input.length();
  for (const auto& w : enc.weights) {
    std::vector<nn::Matrix> heads;
    for (std::size_t h = 0; h < config_.heads; ++h) {
      const auto block = w.subspan(h * L * L, L * L);
      heads.emplace_back(L, L, std::vector<double>(block.begin(), block.end()));
    }
    r.attention.push_back(std::move(heads));
  }
  return r;
}

std::vector<double> extract_cls_attention(const BertResult& result) {
  require(!result.attention.empty() && !result.attention.back().empty(), "no attention weights recorded");
  const auto& heads = result.attention.back();
  std::vector<double> row(heads.front().cols, 0.0);
  for (const auto& m : heads) {
    const auto cls = m.row(0);
    for (std::size_t j = 0; j < row.size(); ++j) {
      row[j] += cls[j];
    }
  }
  for (double& v : row) {
    v /= static_cast<double>(heads.size());
  }
  return row;
}

ClsAttention BertEstimator::cls_attention(const RecordSequence& seq) const {
  require_trained();
  auto input = build_input(seq);
  ClsAttention out;
  out.weights = extract_cls_attention(bert_forward(input));
  out.token_codes = std::move(input.tokens);
  out.token_codes[0].clear();
  return out;
}

std::size_t BertEstimator::truncated_count(const ClaimsDataset& data, std::span<const std::size_t> idx) const {
  std::size_t n = 0;
  for (auto i : idx) {
    n += build_input(data.samples.at(i).seq).truncated() ? 1 : 0;
  }
  return n;
}

nlohmann::json BertEstimator::describe() const {
  return {{"name", name()},
          {"tokens", level_ == TokenLevel::Code ? "code" : "record"},
          {"model_dim", config_.dim},
          {"layers", config_.layers},
          {"heads", config_.heads},
          {"feed_forward_dim", config_.ff_dim},
          {"max_len", config_.max_len},
          {"norm", "post"}};
}

}  // namespace tdps::models
