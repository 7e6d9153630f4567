#include "tdps/models/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "tdps/error.hpp"
#include "tdps/nn/adam.hpp"
#include "tdps/nn/checkpoint.hpp"
#include "tdps/rng.hpp"

namespace tdps::models {

using nlohmann::json;

namespace {

constexpr std::size_t kPredictChunk = 64;

template <class T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    out = j.at(key).get<T>();
  }
}

std::vector<const LabeledSample*> gather(const ClaimsDataset& data, std::span<const std::size_t> idx) {
  std::vector<const LabeledSample*> out;
  out.reserve(idx.size());
  for (auto i : idx) {
    out.push_back(&data.samples.at(i));
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) {
    throw ConfigError("batch_size must be at least 1");
  }
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in (0,1)");
  }
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (max_epochs == 0) {
    throw ConfigError("max_epochs must be at least 1");
  }
}

json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
          {"max_epochs", c.max_epochs}, {"patience", c.patience},
          {"min_delta", c.min_delta},   {"validation_fraction", c.validation_fraction},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  try {
    read_if(j, "batch_size", c.batch_size);
    read_if(j, "learning_rate", c.learning_rate);
    read_if(j, "max_epochs", c.max_epochs);
    read_if(j, "patience", c.patience);
    read_if(j, "min_delta", c.min_delta);
    read_if(j, "validation_fraction", c.validation_fraction);
    read_if(j, "seed", c.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid train config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const TrainLog& log) {
  json epochs = json::array();
  for (const auto& e : log.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"validation_loss", e.validation_loss},
                      {"skipped_steps", e.skipped_steps}});
  }
  return {{"epochs", epochs},
          {"best_epoch", log.best_epoch},
          {"best_validation_loss", log.best_validation_loss},
          {"train_size", log.train_size},
          {"validation_size", log.validation_size},
          {"early_stopped", log.early_stopped}};
}

void PropensityEstimator::prepare(const ClaimsDataset&, std::span<const std::size_t>) {}

double PropensityEstimator::predict_ps(const RecordSequence& seq) const {
  LabeledSample s;
  s.seq = seq;
  return predict_ps(s);
}

std::vector<double> PropensityEstimator::predict(const ClaimsDataset& data, std::span<const std::size_t> idx) const {
  require_trained();
  std::vector<double> out(idx.size());
  const auto n = static_cast<std::int64_t>(idx.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = predict_ps(data.samples.at(idx[static_cast<std::size_t>(i)]));
  }
  return out;
}

std::vector<double> PropensityEstimator::predict_serial(const ClaimsDataset& data,
                                                        std::span<const std::size_t> idx) const {
  require_trained();
  std::vector<double> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out[i] = predict_ps(data.samples.at(idx[i]));
  }
  return out;
}

ClsAttention PropensityEstimator::cls_attention(const RecordSequence&) const {
  require(false, "estimator '" + name() + "' has no attention weights");
  return {};
}

json PropensityEstimator::describe() const {
  return {{"name", name()}};
}

void PropensityEstimator::require_trained() const {
  require(trained_, "estimator '" + name() + "' is not trained");
}

void check_both_classes(const ClaimsDataset& data, std::span<const std::size_t> idx) {
  if (idx.empty()) {
    throw TrainingError("training set is empty");
  }
  std::size_t treated = 0;
  for (auto i : idx) {
    const int a = data.samples.at(i).treatment;
    if (a != 0 && a != 1) {
      throw TrainingError("treatment labels must be 0 or 1");
    }
    treated += static_cast<std::size_t>(a);
  }
  if (treated == 0 || treated == idx.size()) {
    throw TrainingError("training labels contain a single treatment class");
  }
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(const ClaimsDataset& data,
                                                                                std::span<const std::size_t> train,
                                                                                double validation_fraction,
                                                                                std::uint64_t seed) {
  std::vector<std::size_t> by_class[2];
  for (auto i : train) {
    by_class[data.samples.at(i).treatment == 1 ? 1 : 0].push_back(i);
  }
  Rng rng(derive_seed(seed, "validation-split"));
  std::vector<std::size_t> fit_set;
  std::vector<std::size_t> val_set;
  for (auto& group : by_class) {
    std::shuffle(group.begin(), group.end(), rng.engine());
    std::size_t n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(group.size())));
    if (group.size() >= 2) {
      n_val = std::clamp<std::size_t>(n_val, 1, group.size() - 1);
    } else {
      n_val = 0;
    }
    val_set.insert(val_set.end(), group.begin(), group.begin() + static_cast<std::ptrdiff_t>(n_val));
    fit_set.insert(fit_set.end(), group.begin() + static_cast<std::ptrdiff_t>(n_val), group.end());
  }
  std::sort(fit_set.begin(), fit_set.end());
  std::sort(val_set.begin(), val_set.end());
  return {fit_set, val_set};
}

double NeuralEstimator::mean_loss(const ClaimsDataset& data, std::span<const std::size_t> idx) const {
  if (idx.empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  double total = 0.0;
  for (std::size_t start = 0; start < idx.size(); start += kPredictChunk) {
    const auto chunk = idx.subspan(start, std::min(kPredictChunk, idx.size() - start));
    const auto batch = gather(data, chunk);
    std::vector<double> labels;
    for (const auto* s : batch) {
      labels.push_back(static_cast<double>(s->treatment));
    }
    nn::Graph g;
    const nn::Var loss = g.bce(forward(g, batch), std::move(labels));
    total += g.value(loss).data[0] * static_cast<double>(chunk.size());
  }
  return total / static_cast<double>(idx.size());
}

TrainLog NeuralEstimator::fit(const ClaimsDataset& data, std::span<const std::size_t> train,
                              const TrainConfig& config) {
  config.validate();
  check_both_classes(data, train);
  auto [fit_set, val_set] = stratified_split(data, train, config.validation_fraction, config.seed);

  TrainLog log;
  log.train_size = fit_set.size();
  log.validation_size = val_set.size();

  nn::Adam adam(params_, nn::AdamConfig{config.learning_rate});
  nn::ParameterSet best;
  for (const auto& p : params_) {
    best.add(p.name, p.value.rows, p.value.cols);
  }
  best.copy_values_from(params_);

  double best_loss = std::numeric_limits<double>::infinity();
  double patience_ref = std::numeric_limits<double>::infinity();
  std::size_t since_improvement = 0;

  std::vector<std::size_t> order = fit_set;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, "epoch-shuffle", epoch));
    std::shuffle(order.begin(), order.end(), rng.engine());

    EpochLog entry;
    entry.epoch = epoch;
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const auto chunk = std::span<const std::size_t>(order).subspan(start, std::min(config.batch_size, order.size() - start));
      const auto batch = gather(data, chunk);
      std::vector<double> labels;
      labels.reserve(batch.size());
      for (const auto* s : batch) {
        labels.push_back(static_cast<double>(s->treatment));
      }
      nn::Graph g;
      const nn::Var loss = g.bce(forward(g, batch), std::move(labels));
      g.backward(loss);
      params_.zero_grad();
      params_.accumulate_grads(g);
      if (adam.step(params_) == nn::StepStatus::SkippedNonFinite) {
        ++entry.skipped_steps;
      }
      loss_sum += g.value(loss).data[0] * static_cast<double>(chunk.size());
    }
    entry.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(order.size(), 1));
    entry.validation_loss = val_set.empty() ? mean_loss(data, fit_set) : mean_loss(data, val_set);
    log.epochs.push_back(entry);

    if (entry.validation_loss < best_loss) {
      best_loss = entry.validation_loss;
      log.best_epoch = epoch;
      best.copy_values_from(params_);
    }
    if (entry.validation_loss < patience_ref - config.min_delta) {
      patience_ref = entry.validation_loss;
      since_improvement = 0;
    } else if (++since_improvement >= config.patience) {
      log.early_stopped = true;
      break;
    }
  }

  params_.copy_values_from(best);
  params_.zero_grad();
  log.best_validation_loss = best_loss;
  mark_trained();
  return log;
}

double NeuralEstimator::predict_ps(const LabeledSample& sample) const {
  require_trained();
  const LabeledSample* batch[] = {&sample};
  nn::Graph g;
  return g.value(forward(g, batch)).data[0];
}

std::vector<double> NeuralEstimator::predict(const ClaimsDataset& data, std::span<const std::size_t> idx) const {
  require_trained();
  std::vector<double> out(idx.size());
  const auto chunks = static_cast<std::int64_t>((idx.size() + kPredictChunk - 1) / kPredictChunk);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t c = 0; c < chunks; ++c) {
    const std::size_t start = static_cast<std::size_t>(c) * kPredictChunk;
    const auto chunk = idx.subspan(start, std::min(kPredictChunk, idx.size() - start));
    const auto batch = gather(data, chunk);
    nn::Graph g;
    const auto& probs = g.value(forward(g, batch));
    std::copy(probs.data.begin(), probs.data.end(), out.begin() + static_cast<std::ptrdiff_t>(start));
  }
  return out;
}

std::vector<double> NeuralEstimator::predict_serial(const ClaimsDataset& data, std::span<const std::size_t> idx) const {
  require_trained();
  std::vector<double> out;
  out.reserve(idx.size());
  for (auto i : idx) {
    out.push_back(predict_ps(data.samples.at(i)));
  }
  return out;
}

void NeuralEstimator::save_checkpoint(const std::filesystem::path& dir, std::uint64_t vocab_hash) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create checkpoint directory " + dir.string());
  }
  nn::save_parameters(params_, dir / "params.json");
  json manifest = describe();
  manifest["kind"] = name();
  manifest["vocabulary_hash"] = vocab_hash;
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) {
    throw IoError("cannot write checkpoint manifest in " + dir.string());
  }
  out << manifest.dump(2) << '\n';
}

void NeuralEstimator::load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) {
    throw IoError("missing checkpoint manifest in " + dir.string());
  }
  const json manifest = json::parse(in, nullptr, false);
  if (manifest.is_discarded() || manifest.value("kind", std::string{}) != name()) {
    throw ConfigError("checkpoint in " + dir.string() + " is not a '" + name() + "' estimator");
  }
  nn::load_parameters(params_, dir / "params.json");
  mark_trained();
}

void NeuralEstimator::load_parameters(const json& params_json) {
  nn::parameters_from_json(params_, params_json);
  mark_trained();
}

std::uint64_t vocabulary_hash(const ClaimsDataset& data) {
  std::string joined = "dx=" + std::to_string(data.dx);
  for (const auto& v : data.vocabulary) {
    joined += '\n';
    joined += v;
  }
  return fnv1a64(joined);
}

}  // namespace tdps::models
