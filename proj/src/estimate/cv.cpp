#include "tdps/estimate/cv.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "tdps/claimsgen/dataset_io.hpp"
#include "tdps/error.hpp"
#include "tdps/models/bert.hpp"
#include "tdps/models/registry.hpp"
#include "tdps/rng.hpp"

namespace tdps::estimate {

using nlohmann::json;

namespace {

const std::vector<std::string> kMetricKeys{"ps_mae", "ps_mae_weighted", "ate_err", "ate_err_trim", "ate_err_clip"};
const std::vector<std::string> kMetricHeaders{"PS", "PS_W", "ATE", "ATE_T", "ATE_C"};
const std::vector<std::string> kAttentionKeys{"confounder", "other", "cls"};
const std::vector<std::string> kAttentionHeaders{"Conf", "Other", "CLS"};

bool contains_any(const std::vector<std::uint32_t>& token, const std::vector<claimsgen::Code>& codes) {
  for (auto c : token) {
    if (std::find(codes.begin(), codes.end(), c) != codes.end()) {
      return true;
    }
  }
  return false;
}

json interval_json(std::span<const double> values) {
  if (values.empty()) {
    return json{{"mean", nullptr}, {"half_width", nullptr}};
  }
  if (values.size() == 1) {
    return json{{"mean", values[0]}, {"half_width", nullptr}};
  }
  const auto ci = ci95(values);
  return json{{"mean", ci.mean}, {"half_width", ci.half_width}};
}

Interval95 interval_from_json(const json& j) {
  const auto num = [](const json& v) {
    return v.is_number() ? v.get<double>() : std::numeric_limits<double>::quiet_NaN();
  };
  return {num(j.at("mean")), num(j.at("half_width"))};
}

FoldResult run_fold(const claimsgen::ClaimsDataset& data, const CvOptions& options,
                    const std::vector<std::vector<std::size_t>>& folds, std::size_t f) {
  std::vector<std::size_t> train;
  for (std::size_t g = 0; g < folds.size(); ++g) {
    if (g != f) {
      train.insert(train.end(), folds[g].begin(), folds[g].end());
    }
  }
  std::sort(train.begin(), train.end());
  const auto& eval = folds[f];

  const std::uint64_t seed = derive_seed(options.seed, "estimator:" + options.estimator, f);
  auto est = models::make_estimator(options.estimator, data.dx, seed, options.estimator_options);
  if (options.feature_fit == "all") {
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), 0);
    est->prepare(data, all);
  } else {
    est->prepare(data, train);
  }
  models::TrainConfig tc = options.train;
  tc.seed = seed;

  FoldResult r;
  r.fold = f;
  r.n_train = train.size();
  r.n_eval = eval.size();
  r.log = est->fit(data, train, tc);
  const auto ps = est->predict(data, eval);

  std::vector<double> e(eval.size());
  std::vector<Unit> units(eval.size());
  double effect = 0.0;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    const auto& s = data.samples[eval[i]];
    e[i] = s.true_ps;
    units[i] = {s.treatment, s.outcome, ps[i]};
    effect += s.y1 - s.y0;
  }
  r.ate_true = effect / static_cast<double>(eval.size());
  r.ps_mae = ps_mae(e, ps);
  r.ps_mae_weighted = ps_mae_weighted(e, ps);
  const auto plain = ate_error(units, r.ate_true, {options.trim_alpha, TrimMode::None});
  const auto trimmed = ate_error(units, r.ate_true, {options.trim_alpha, TrimMode::Trim});
  const auto clipped = ate_error(units, r.ate_true, {options.trim_alpha, TrimMode::Clip});
  r.ate_hat = plain.ate;
  r.ate_err = plain.error;
  r.ate_err_trim = trimmed.error;
  r.ate_err_clip = clipped.error;
  r.n_trimmed = eval.size() - trimmed.n_used;
  if (est->has_attention()) {
    r.attention = attention_summary(*est, data, eval, data.scenario);
  }
  r.description = est->describe();
  if (const auto* bert = dynamic_cast<const models::BertEstimator*>(est.get())) {
    r.truncated = bert->truncated_count(data, eval);
  }
  return r;
}

std::size_t skipped_steps(const models::TrainLog& log) {
  std::size_t n = 0;
  for (const auto& e : log.epochs) {
    n += e.skipped_steps;
  }
  return n;
}

std::string fold_message(std::size_t f, const char* what) {
  return fmt::format("fold {}: {}", f, what);
}

}  // namespace

AttentionBuckets attention_buckets(const models::ClsAttention& attention, const std::vector<claimsgen::Code>& codes) {
  require(!attention.weights.empty() && attention.weights.size() == attention.token_codes.size(),
          "attention row and token list differ in length");
  AttentionBuckets b;
  b.cls = attention.weights[0];
  for (std::size_t i = 1; i < attention.weights.size(); ++i) {
    if (contains_any(attention.token_codes[i], codes)) {
      b.confounder += attention.weights[i];
      ++b.n_confounder;
    } else {
      b.other += attention.weights[i];
      ++b.n_other;
    }
  }
  if (b.n_confounder > 0) {
    b.confounder /= static_cast<double>(b.n_confounder);
  }
  if (b.n_other > 0) {
    b.other /= static_cast<double>(b.n_other);
  }
  return b;
}

AttentionSummary attention_summary(const models::PropensityEstimator& model, const claimsgen::ClaimsDataset& data,
                                   std::span<const std::size_t> idx, const claimsgen::ScenarioSpec& spec) {
  require(model.has_attention(), "attention_summary needs an attention model");
  const auto codes = spec.confounding_codes();
  AttentionSummary s;
  std::size_t n_conf = 0;
  std::size_t n_other = 0;
  for (auto i : idx) {
    const auto b = attention_buckets(model.cls_attention(data.samples.at(i).seq), codes);
    s.cls += b.cls;
    if (b.n_confounder > 0) {
      s.confounder += b.confounder;
      ++n_conf;
    }
    if (b.n_other > 0) {
      s.other += b.other;
      ++n_other;
    }
    ++s.samples;
  }
  if (s.samples > 0) {
    s.cls /= static_cast<double>(s.samples);
  }
  if (n_conf > 0) {
    s.confounder /= static_cast<double>(n_conf);
  }
  if (n_other > 0) {
    s.other /= static_cast<double>(n_other);
  }
  return s;
}

std::string config_hash(const claimsgen::ClaimsDataset& data, const CvOptions& options) {
  const json canonical{{"estimator", options.estimator},
                       {"estimator_options", options.estimator_options},
                       {"train", models::to_json(options.train)},
                       {"k", options.k},
                       {"trim_alpha", options.trim_alpha},
                       {"seed", options.seed},
                       {"feature_fit", options.feature_fit},
                       {"only_folds", options.only_folds},
                       {"dataset",
                        {{"n", data.size()},
                         {"dx", data.dx},
                         {"seed", data.seed},
                         {"scenario", claimsgen::to_json(data.scenario)},
                         {"vocabulary_hash", models::vocabulary_hash(data)}}}};
  return fmt::format("{:016x}", fnv1a64(canonical.dump()));
}

EvaluationReport run_cv(const claimsgen::ClaimsDataset& data, const CvOptions& options) {
  if (options.k < 2) {
    throw ConfigError("k must be at least 2");
  }
  if (data.size() < options.k) {
    throw ConfigError("dataset has fewer samples than folds");
  }
  if (options.threads < 1) {
    throw ConfigError("threads must be at least 1");
  }
  if (options.feature_fit != "all" && options.feature_fit != "train") {
    throw ConfigError("feature_fit must be 'all' or 'train'");
  }
  TrimSpec{options.trim_alpha, TrimMode::Trim}.validate();
  options.train.validate();
  // Fails early on unknown names or bad options.
  models::make_estimator(options.estimator, data.dx, options.seed, options.estimator_options);

  const auto folds = kfold_split(data.size(), options.k, derive_seed(options.seed, "folds"));
  std::vector<std::size_t> todo = options.only_folds;
  if (todo.empty()) {
    todo.resize(options.k);
    std::iota(todo.begin(), todo.end(), 0);
  }
  for (auto f : todo) {
    if (f >= options.k) {
      throw ConfigError(fmt::format("fold {} out of range for k = {}", f, options.k));
    }
  }

  EvaluationReport report;
  report.estimator = options.estimator;
  report.scenario = claimsgen::to_string(data.scenario.kind);
  report.n_samples = data.size();
  report.dx = data.dx;
  report.k = options.k;
  report.trim_alpha = options.trim_alpha;
  report.seed = options.seed;
  report.config_hash = config_hash(data, options);
  report.threads = options.threads;
  report.train_config = models::to_json(options.train);
  report.feature_fit = options.feature_fit;

  std::vector<std::optional<FoldResult>> results(todo.size());
  std::vector<std::exception_ptr> errors(todo.size());
  const auto n = static_cast<std::int64_t>(todo.size());
#pragma omp parallel for schedule(dynamic) num_threads(options.threads) if (options.threads > 1)
  for (std::int64_t t = 0; t < n; ++t) {
    const auto i = static_cast<std::size_t>(t);
    if (options.cancel != nullptr && options.cancel->load()) {
      continue;
    }
    try {
      results[i] = run_fold(data, options, folds, todo[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (std::size_t i = 0; i < todo.size(); ++i) {
    if (!errors[i]) {
      continue;
    }
    try {
      std::rethrow_exception(errors[i]);
    } catch (const TrainingError& e) {
      throw TrainingError(fold_message(todo[i], e.what()));
    } catch (const EvaluationError& e) {
      throw EvaluationError(fold_message(todo[i], e.what()));
    }
  }
  for (auto& r : results) {
    if (r) {
      report.folds.push_back(std::move(*r));
    } else {
      report.complete = false;
    }
  }
  return report;
}

json to_json(const EvaluationReport& report) {
  json folds = json::array();
  std::map<std::string, std::vector<double>> series;
  std::map<std::string, std::vector<double>> attention_series;
  bool any_attention = false;
  std::size_t truncated = 0;
  for (const auto& f : report.folds) {
    json jf{{"fold", f.fold},
            {"n_train", f.n_train},
            {"n_eval", f.n_eval},
            {"ps_mae", f.ps_mae},
            {"ps_mae_weighted", f.ps_mae_weighted},
            {"ate_true", f.ate_true},
            {"ate_hat", f.ate_hat},
            {"ate_err", f.ate_err},
            {"ate_err_trim", f.ate_err_trim},
            {"ate_err_clip", f.ate_err_clip},
            {"n_trimmed", f.n_trimmed},
            {"truncated", f.truncated},
            {"epochs_run", f.log.epochs.size()},
            {"best_epoch", f.log.best_epoch},
            {"best_validation_loss", f.log.best_validation_loss},
            {"early_stopped", f.log.early_stopped},
            {"skipped_steps", skipped_steps(f.log)},
            {"estimator", f.description}};
    for (const auto& key : kMetricKeys) {
      series[key].push_back(jf.at(key).get<double>());
    }
    series["ate_hat"].push_back(f.ate_hat);
    series["n_trimmed"].push_back(static_cast<double>(f.n_trimmed));
    if (f.attention) {
      any_attention = true;
      jf["attention"] = {{"confounder", f.attention->confounder},
                         {"other", f.attention->other},
                         {"cls", f.attention->cls},
                         {"samples", f.attention->samples}};
      attention_series["confounder"].push_back(f.attention->confounder);
      attention_series["other"].push_back(f.attention->other);
      attention_series["cls"].push_back(f.attention->cls);
    }
    truncated += f.truncated;
    folds.push_back(std::move(jf));
  }
  json aggregate = json::object();
  for (const auto& [key, values] : series) {
    aggregate[key] = interval_json(values);
  }
  if (report.folds.empty()) {
    for (const auto& key : kMetricKeys) {
      aggregate[key] = interval_json({});
    }
  }
  json out{{"schema_version", kReportSchemaVersion},
           {"estimator", report.estimator},
           {"scenario", report.scenario},
           {"n_samples", report.n_samples},
           {"dx", report.dx},
           {"k", report.k},
           {"trim_alpha", report.trim_alpha},
           {"seed", report.seed},
           {"config_hash", report.config_hash},
           {"threads", report.threads},
           {"single_threaded", report.threads == 1},
           {"complete", report.complete},
           {"truncated_sequences", truncated},
           {"feature_fit", report.feature_fit},
           {"train_config", report.train_config},
           {"folds", folds},
           {"aggregate", aggregate}};
  if (any_attention) {
    json att = json::object();
    for (const auto& key : kAttentionKeys) {
      att[key] = interval_json(attention_series[key]);
    }
    out["attention"] = att;
  }
  return out;
}

ReportRow row_from_json(const json& report) {
  if (!report.is_object() || !report.contains("schema_version")) {
    throw ConfigError("not a report: missing schema_version");
  }
  if (report.at("schema_version") != kReportSchemaVersion) {
    throw ConfigError(fmt::format("report schema version {} is not supported (expected {})",
                                  report.at("schema_version").dump(), kReportSchemaVersion));
  }
  try {
    ReportRow row;
    row.estimator = report.at("estimator").get<std::string>();
    row.complete = report.value("complete", true);
    const auto& agg = report.at("aggregate");
    for (const auto& key : kMetricKeys) {
      row.metrics[key] = interval_from_json(agg.at(key));
    }
    if (report.contains("attention")) {
      std::map<std::string, Interval95> att;
      for (const auto& key : kAttentionKeys) {
        att[key] = interval_from_json(report.at("attention").at(key));
      }
      row.attention = std::move(att);
    }
    return row;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
}

void sort_rows(std::vector<ReportRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    const double x = a.metrics.at("ps_mae").mean;
    const double y = b.metrics.at("ps_mae").mean;
    // NaN (no finished folds) sorts last.
    if (std::isnan(x) != std::isnan(y)) {
      return std::isnan(y);
    }
    if (!std::isnan(x) && x != y) {
      return x < y;
    }
    return a.estimator < b.estimator;
  });
}

std::string render_table(const std::vector<ReportRow>& rows) {
  const auto cell = [](const Interval95& v) {
    if (std::isnan(v.mean)) {
      return std::string("n/a");
    }
    if (std::isnan(v.half_width)) {
      return fmt::format("{:.3f}", v.mean);
    }
    return fmt::format("{:.3f} ± {:.3f}", v.mean, v.half_width);
  };
  const bool any_attention = std::any_of(rows.begin(), rows.end(), [](const ReportRow& r) { return r.attention.has_value(); });

  std::vector<std::vector<std::string>> table;
  std::vector<std::string> header{"Model"};
  header.insert(header.end(), kMetricHeaders.begin(), kMetricHeaders.end());
  if (any_attention) {
    header.insert(header.end(), kAttentionHeaders.begin(), kAttentionHeaders.end());
  }
  table.push_back(header);
  for (const auto& r : rows) {
    std::vector<std::string> line{r.complete ? r.estimator : r.estimator + " (incomplete)"};
    for (const auto& key : kMetricKeys) {
      line.push_back(cell(r.metrics.at(key)));
    }
    if (any_attention) {
      for (const auto& key : kAttentionKeys) {
        line.push_back(r.attention ? cell(r.attention->at(key)) : "—");
      }
    }
    table.push_back(std::move(line));
  }

  // Display width, counting UTF-8 continuation bytes as zero.
  const auto width = [](const std::string& s) {
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
      return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
    }));
  };
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& line : table) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      widths[c] = std::max(widths[c], width(line[c]));
    }
  }
  std::string out;
  for (std::size_t r = 0; r < table.size(); ++r) {
    for (std::size_t c = 0; c < table[r].size(); ++c) {
      const auto& s = table[r][c];
      const std::string pad(widths[c] - width(s), ' ');
      out += c == 0 ? s + pad : "  " + pad + s;
    }
    out += '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : widths) {
        total += w + 2;
      }
      out += std::string(total - 2, '-') + '\n';
    }
  }
  return out;
}

}  // namespace tdps::estimate
