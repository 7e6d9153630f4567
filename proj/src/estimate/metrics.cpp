#include "tdps/estimate/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "tdps/error.hpp"
#include "tdps/rng.hpp"

namespace tdps::estimate {

double iptw_ate(std::span<const Unit> units) {
  require(!units.empty(), "iptw_ate needs at least one unit");
  double treated = 0.0;
  double control = 0.0;
  for (const auto& u : units) {
    require(u.ps >= 0.0 && u.ps <= 1.0, "iptw_ate: propensity outside [0,1]");
    require(u.treatment == 0 || u.treatment == 1, "iptw_ate: treatment must be 0 or 1");
    if (u.ps == 0.0 || u.ps == 1.0) {
      throw EvaluationError("propensity score of exactly 0 or 1; use clip mode");
    }
    if (u.treatment == 1) {
      treated += u.outcome / u.ps;
    } else {
      control += u.outcome / (1.0 - u.ps);
    }
  }
  return (treated - control) / static_cast<double>(units.size());
}

double ps_mae(std::span<const double> e, std::span<const double> e_hat) {
  require(e.size() == e_hat.size(), "ps_mae: length mismatch");
  require(!e.empty(), "ps_mae: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    s += std::abs(e[i] - e_hat[i]);
  }
  return s / static_cast<double>(e.size());
}

double ps_mae_weighted(std::span<const double> e, std::span<const double> e_hat) {
  require(e.size() == e_hat.size(), "ps_mae_weighted: length mismatch");
  require(!e.empty(), "ps_mae_weighted: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    s += e[i] * std::abs(e[i] - e_hat[i]);
  }
  return s / static_cast<double>(e.size());
}

std::string to_string(TrimMode mode) {
  switch (mode) {
    case TrimMode::None:
      return "none";
    case TrimMode::Trim:
      return "trim";
    case TrimMode::Clip:
      return "clip";
  }
  return "none";
}

TrimMode trim_mode_from_string(const std::string& name) {
  if (name == "none") {
    return TrimMode::None;
  }
  if (name == "trim") {
    return TrimMode::Trim;
  }
  if (name == "clip") {
    return TrimMode::Clip;
  }
  throw ConfigError("unknown trim mode '" + name + "' (expected none, trim or clip)");
}

void TrimSpec::validate() const {
  if (!(alpha > 0.0 && alpha < 0.5)) {
    throw ConfigError("trim alpha must lie in (0, 0.5)");
  }
}

std::vector<std::size_t> trimmed_indices(std::span<const Unit> units, double alpha) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (units[i].ps >= alpha && units[i].ps <= 1.0 - alpha) {
      kept.push_back(i);
    }
  }
  return kept;
}

AteError ate_error(std::span<const Unit> units, double ate_true, const TrimSpec& trim) {
  if (trim.mode != TrimMode::None) {
    trim.validate();
  }
  AteError out;
  switch (trim.mode) {
    case TrimMode::None:
      out.ate = iptw_ate(units);
      out.n_used = units.size();
      break;
    case TrimMode::Trim: {
      std::vector<Unit> kept;
      bool arms[2] = {false, false};
      for (auto i : trimmed_indices(units, trim.alpha)) {
        kept.push_back(units[i]);
        arms[units[i].treatment == 1 ? 1 : 0] = true;
      }
      if (!arms[0] || !arms[1]) {
        throw EvaluationError("trimming removed every unit of one treatment arm");
      }
      out.ate = iptw_ate(kept);
      out.n_used = kept.size();
      break;
    }
    case TrimMode::Clip: {
      std::vector<Unit> clipped(units.begin(), units.end());
      for (auto& u : clipped) {
        u.ps = std::clamp(u.ps, trim.alpha, 1.0 - trim.alpha);
      }
      out.ate = iptw_ate(clipped);
      out.n_used = clipped.size();
      break;
    }
  }
  out.error = std::abs(out.ate - ate_true);
  return out;
}

std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  require(k >= 2, "kfold_split needs k >= 2");
  require(n >= k, "kfold_split needs at least k samples");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng.engine());
  std::vector<std::vector<std::size_t>> folds(k);
  const std::size_t base = n / k;
  const std::size_t extra = n % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                    order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    std::sort(folds[f].begin(), folds[f].end());
    pos += size;
  }
  return folds;
}

Interval95 ci95(std::span<const double> values) {
  require(values.size() >= 2, "ci95 needs at least two values");
  const auto k = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / k;
  double ss = 0.0;
  for (double v : values) {
    ss += (v - mean) * (v - mean);
  }
  const double sd = std::sqrt(ss / (k - 1.0));
  const boost::math::students_t dist(k - 1.0);
  const double t = boost::math::quantile(dist, 0.975);
  return {mean, t * sd / std::sqrt(k)};
}

}  // namespace tdps::estimate
