#include "tdps/models/sequence.hpp"

#include <algorithm>

#include "tdps/error.hpp"
#include "tdps/rng.hpp"

namespace tdps::models {

std::vector<double> record_pool(const claimsgen::CodeSet& record, const nn::Matrix& table) {
  std::vector<double> out(table.cols, 0.0);
  if (record.empty()) {
    return out;
  }
  std::vector<claimsgen::Code> codes(record.begin(), record.end());
  std::sort(codes.begin(), codes.end());
  for (auto code : codes) {
    require(code < table.rows, "record_pool: code out of range");
    const auto src = table.row(code);
    for (std::size_t c = 0; c < table.cols; ++c) {
      out[c] += src[c];
    }
  }
  const double inv = 1.0 / static_cast<double>(codes.size());
  for (double& v : out) {
    v *= inv;
  }
  return out;
}

std::vector<std::vector<std::uint32_t>> record_bags(const RecordSequence& seq) {
  std::vector<std::vector<std::uint32_t>> bags;
  bags.reserve(seq.length());
  for (const auto& record : seq.records) {
    bags.emplace_back(record.begin(), record.end());
    std::sort(bags.back().begin(), bags.back().end());
  }
  return bags;
}

LstmEstimator::LstmEstimator(std::size_t dx, std::uint64_t seed, LstmConfig config) : dx_(dx), config_(config) {
  require(config.layers >= 1, "lstm needs at least one layer");
  Rng rng(derive_seed(seed, "init:lstm"));
  table_ = &params_.add_glorot("embedding", dx, config.embed_dim, rng);
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::size_t in = l == 0 ? config.embed_dim : config.hidden_dim;
    cells_.emplace_back(params_, "lstm" + std::to_string(l), in, config.hidden_dim, rng);
  }
  head_.emplace(params_, "output", config.hidden_dim, 1, rng);
}

nn::Var LstmEstimator::forward(nn::Graph& g, std::span<const LabeledSample* const> batch) const {
  const std::size_t B = batch.size();
  std::size_t steps = 0;
  std::vector<std::vector<std::vector<std::uint32_t>>> bags(B);
  for (std::size_t b = 0; b < B; ++b) {
    require(batch[b]->seq.length() >= 1, "lstm: empty record sequence");
    bags[b] = record_bags(batch[b]->seq);
    steps = std::max(steps, bags[b].size());
  }

  const nn::Var table = g.param(*table_);
  std::vector<nn::LstmCell::Bound> bound;
  std::vector<nn::LstmCell::State> state;
  for (const auto& cell : cells_) {
    bound.push_back(cell.bind(g));
    const nn::Var zero = g.constant(nn::Matrix(B, config_.hidden_dim));
    state.push_back({zero, zero});
  }

  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<std::vector<std::uint32_t>> step_bags(B);
    std::vector<std::uint8_t> live(B, 0);
    bool all_live = true;
    for (std::size_t b = 0; b < B; ++b) {
      if (t < bags[b].size()) {
        step_bags[b] = bags[b][t];
        live[b] = 1;
      } else {
        all_live = false;
      }
    }
    nn::Var x = g.embedding_bag(table, std::move(step_bags));
    for (std::size_t l = 0; l < cells_.size(); ++l) {
      auto next = cells_[l].step(g, bound[l], x, state[l]);
      if (!all_live) {
        next.h = g.blend_rows(state[l].h, next.h, live);
        next.c = g.blend_rows(state[l].c, next.c, live);
      }
      state[l] = next;
      x = next.h;
    }
  }
  return g.sigmoid((*head_)(g, state.back().h));
}

nlohmann::json LstmEstimator::describe() const {
  return {{"name", name()},
          {"embedding_dim", config_.embed_dim},
          {"hidden_dim", config_.hidden_dim},
          {"layers", config_.layers},
          {"pooling", "record-mean"}};
}

}  // namespace tdps::models
