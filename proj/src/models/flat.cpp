#include "tdps/models/flat.hpp"

#include "tdps/error.hpp"
#include "tdps/rng.hpp"

namespace tdps::models {

using nlohmann::json;

void FlatFeatures::fit(const ClaimsDataset& data, std::span<const std::size_t> idx, std::string fitted_on) {
  require(data.dx == dx_, "feature vocabulary does not match the dataset");
  const auto counts = features::count_matrix(data, idx);
  if (mode_ == FeatureMode::Hdps) {
    hdps_ = features::fit_hdps(counts, std::move(fitted_on));
  } else {
    standardizer_ = features::fit_standardizer(counts, std::move(fitted_on));
  }
}

std::vector<double> FlatFeatures::transform(const RecordSequence& seq) const {
  require(fitted(), "feature statistics are not fitted");
  const auto counts = features::count_features(seq, dx_);
  return mode_ == FeatureMode::Hdps ? features::apply_hdps(counts, *hdps_)
                                    : features::apply_standardizer(counts, *standardizer_);
}

json FlatFeatures::describe() const {
  json j{{"mode", mode_ == FeatureMode::Hdps ? "hdps" : "counts"}};
  if (standardizer_) {
    j["stats"] = features::to_json(*standardizer_);
  }
  if (hdps_) {
    j["stats"] = features::to_json(*hdps_);
  }
  return j;
}

void FlatEstimator::prepare(const ClaimsDataset& data, std::span<const std::size_t> fit_indices) {
  const bool all = fit_indices.size() == data.size();
  features_.fit(data, fit_indices, all ? "all" : "train");
  prepared_ = true;
}

TrainLog FlatEstimator::fit(const ClaimsDataset& data, std::span<const std::size_t> train, const TrainConfig& config) {
  if (!prepared_) {
    prepare(data, train);
  }
  return NeuralEstimator::fit(data, train, config);
}

nn::Var FlatEstimator::forward(nn::Graph& g, std::span<const LabeledSample* const> batch) const {
  nn::Matrix x(batch.size(), features_.width());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto row = features_.transform(batch[i]->seq);
    std::copy(row.begin(), row.end(), x.row(i).begin());
  }
  return forward_features(g, g.constant(std::move(x)));
}

double FlatEstimator::predict_features(std::span<const double> x) const {
  require_trained();
  require(x.size() == features_.width(), "feature vector width mismatch");
  nn::Graph g;
  nn::Matrix m(1, x.size(), std::vector<double>(x.begin(), x.end()));
  return g.value(forward_features(g, g.constant(std::move(m)))).data[0];
}

json FlatEstimator::describe() const {
  return {{"name", name()}, {"features", features_.describe()}};
}

LogisticRegression::LogisticRegression(FeatureMode mode, std::size_t dx, std::uint64_t seed)
    : FlatEstimator(mode, dx),
      linear_([&]() -> nn::Linear {
        Rng rng(derive_seed(seed, "init:lr"));
        return nn::Linear(params_, "linear", features_.width(), 1, rng);
      }()) {}

nn::Var LogisticRegression::forward_features(nn::Graph& g, nn::Var x) const {
  return g.sigmoid(linear_(g, x));
}

Mlp::Mlp(FeatureMode mode, std::size_t dx, std::uint64_t seed, std::size_t hidden)
    : FlatEstimator(mode, dx), hidden_(hidden) {
  Rng rng(derive_seed(seed, "init:mlp"));
  l1_.emplace(params_, "hidden1", features_.width(), hidden, rng);
  l2_.emplace(params_, "hidden2", hidden, hidden, rng);
  out_.emplace(params_, "output", hidden, 1, rng);
}

nn::Var Mlp::forward_features(nn::Graph& g, nn::Var x) const {
  const nn::Var h1 = g.relu((*l1_)(g, x));
  const nn::Var h2 = g.relu((*l2_)(g, h1));
  return g.sigmoid((*out_)(g, h2));
}

json Mlp::describe() const {
  json j = FlatEstimator::describe();
  j["hidden_units"] = hidden_;
  j["hidden_layers"] = 2;
  return j;
}

namespace {

nn::Parameter* make_table(nn::ParameterSet& params, std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "init:embedding"));
  return &params.add_glorot("embedding", rows, cols, rng);
}

}  // namespace

EmbeddingBagMlp::EmbeddingBagMlp(std::size_t dx, std::uint64_t seed, std::size_t embed, std::size_t hidden)
    : dx_(dx),
      table_(make_table(params_, dx, embed, seed)),
      l1_([&] {
        Rng rng(derive_seed(seed, "init:mlp-embed"));
        return nn::Linear(params_, "hidden1", embed, hidden, rng);
      }()),
      l2_([&] {
        Rng rng(derive_seed(seed, "init:mlp-embed", 1));
        return nn::Linear(params_, "hidden2", hidden, hidden, rng);
      }()),
      out_([&] {
        Rng rng(derive_seed(seed, "init:mlp-embed", 2));
        return nn::Linear(params_, "output", hidden, 1, rng);
      }()) {}

nn::Var EmbeddingBagMlp::forward(nn::Graph& g, std::span<const LabeledSample* const> batch) const {
  std::vector<std::vector<std::uint32_t>> bags(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (const auto& record : batch[i]->seq.records) {
      bags[i].insert(bags[i].end(), record.begin(), record.end());
    }
  }
  const nn::Var x = g.embedding_bag(g.param(*table_), std::move(bags));
  const nn::Var h1 = g.relu(l1_(g, x));
  const nn::Var h2 = g.relu(l2_(g, h1));
  return g.sigmoid(out_(g, h2));
}

json EmbeddingBagMlp::describe() const {
  return {{"name", name()}, {"embedding_dim", table_->value.cols}, {"hidden_units", l1_.weight->value.cols}};
}

}  // namespace tdps::models
