#include "tdps/features/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "tdps/error.hpp"

namespace tdps::features {

std::vector<double> count_features(const RecordSequence& seq, std::size_t dx) {
  std::vector<double> counts(dx, 0.0);
  for (const auto& record : seq.records) {
    for (auto code : record) {
      require(code < dx, "count_features: code out of range");
      counts[code] += 1.0;
    }
  }
  return counts;
}

namespace {

CountMatrix empty_counts(const ClaimsDataset& data, std::span<const std::size_t> indices) {
  const std::size_t n = indices.empty() ? data.size() : indices.size();
  return CountMatrix{n, data.dx, std::vector<double>(n * data.dx, 0.0)};
}

void fill_row(const ClaimsDataset& data, std::span<const std::size_t> indices, CountMatrix& m, std::size_t i) {
  const std::size_t src = indices.empty() ? i : indices[i];
  const auto row = count_features(data.samples.at(src).seq, data.dx);
  std::copy(row.begin(), row.end(), m.counts.begin() + static_cast<std::ptrdiff_t>(i * m.dx));
}

}  // namespace

CountMatrix count_matrix(const ClaimsDataset& data, std::span<const std::size_t> indices) {
  CountMatrix m = empty_counts(data, indices);
  const auto n = static_cast<std::int64_t>(m.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    fill_row(data, indices, m, static_cast<std::size_t>(i));
  }
  return m;
}

CountMatrix count_matrix_serial(const ClaimsDataset& data, std::span<const std::size_t> indices) {
  CountMatrix m = empty_counts(data, indices);
  for (std::size_t i = 0; i < m.rows; ++i) {
    fill_row(data, indices, m, i);
  }
  return m;
}

StandardizerStats fit_standardizer(const CountMatrix& counts, std::string fitted_on) {
  require(counts.rows >= 2, "fit_standardizer needs at least two rows");
  StandardizerStats s{std::vector<double>(counts.dx, 0.0), std::vector<double>(counts.dx, 0.0), std::move(fitted_on)};
  const auto n = static_cast<double>(counts.rows);
  for (std::size_t i = 0; i < counts.rows; ++i) {
    const auto row = counts.row(i);
    for (std::size_t k = 0; k < counts.dx; ++k) {
      s.mean[k] += row[k];
    }
  }
  for (double& m : s.mean) {
    m /= n;
  }
  for (std::size_t i = 0; i < counts.rows; ++i) {
    const auto row = counts.row(i);
    for (std::size_t k = 0; k < counts.dx; ++k) {
      const double d = row[k] - s.mean[k];
      s.std[k] += d * d;
    }
  }
  for (double& v : s.std) {
    v = std::sqrt(v / n);
  }
  return s;
}

std::vector<double> apply_standardizer(std::span<const double> x, const StandardizerStats& stats) {
  require(x.size() == stats.mean.size(), "apply_standardizer: vocabulary size mismatch");
  std::vector<double> out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    out[k] = stats.std[k] > 0.0 ? (x[k] - stats.mean[k]) / stats.std[k] : 0.0;
  }
  return out;
}

double nearest_rank(std::vector<double> values, double q) {
  require(!values.empty(), "nearest_rank of an empty column");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

HdpsThresholds fit_hdps(const CountMatrix& counts, std::string fitted_on) {
  require(counts.rows >= 1, "fit_hdps needs at least one row");
  HdpsThresholds t{std::vector<double>(counts.dx), std::vector<double>(counts.dx), std::move(fitted_on)};
  std::vector<double> column(counts.rows);
  for (std::size_t k = 0; k < counts.dx; ++k) {
    for (std::size_t i = 0; i < counts.rows; ++i) {
      column[i] = counts.counts[i * counts.dx + k];
    }
    t.median[k] = nearest_rank(column, 0.5);
    t.p75[k] = nearest_rank(column, 0.75);
  }
  return t;
}

std::vector<double> apply_hdps(std::span<const double> counts, const HdpsThresholds& thresholds) {
  require(counts.size() == thresholds.median.size() && counts.size() == thresholds.p75.size(),
          "apply_hdps: vocabulary size mismatch");
  std::vector<double> out(3 * counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) {
    out[3 * k] = counts[k] >= 1.0 ? 1.0 : 0.0;
    out[3 * k + 1] = counts[k] > thresholds.median[k] ? 1.0 : 0.0;
    out[3 * k + 2] = counts[k] > thresholds.p75[k] ? 1.0 : 0.0;
  }
  return out;
}

nlohmann::json to_json(const StandardizerStats& stats) {
  return {{"kind", "standardizer"}, {"fitted_on", stats.fitted_on}, {"mean", stats.mean}, {"std", stats.std}};
}

nlohmann::json to_json(const HdpsThresholds& t) {
  return {{"kind", "hdps"}, {"fitted_on", t.fitted_on}, {"median", t.median}, {"p75", t.p75}};
}

}  // namespace tdps::features
