#include "pdgrav/latent_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "pdgrav/errors.hpp"
#include "pdgrav/rng.hpp"

namespace pdgrav {

double observation_variance(long event_count) {
  if (event_count < 0) throw DataError("negative event count");
  return 1.0 / (static_cast<double>(event_count) + 1.0);
}

double estimate_process_variance(std::span<const std::optional<double>> series, double floor,
                                 double fallback) {
  const auto observed = std::count_if(series.begin(), series.end(), [](const auto& v) { return v.has_value(); });
  if (observed == 0) throw DataError("cannot estimate process variance of an empty series");

  std::vector<double> lag, cur;
  for (std::size_t t = 1; t < series.size(); ++t) {
    if (series[t - 1] && series[t]) {
      lag.push_back(*series[t - 1]);
      cur.push_back(*series[t]);
    }
  }
  const auto n = static_cast<double>(lag.size());
  if (lag.size() < 3) return fallback;

  const double mx = std::accumulate(lag.begin(), lag.end(), 0.0) / n;
  const double my = std::accumulate(cur.begin(), cur.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < lag.size(); ++k) {
    sxx += (lag[k] - mx) * (lag[k] - mx);
    syy += (cur[k] - my) * (cur[k] - my);
    sxy += (lag[k] - mx) * (cur[k] - my);
    scale += lag[k] * lag[k] + cur[k] * cur[k];
  }
  const double zero = 1e-12 * std::max(scale, 1.0);
  if (sxx <= zero) {
    return syy <= zero ? floor : fallback;
  }

  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double ssr = 0.0;
  for (std::size_t k = 0; k < lag.size(); ++k) {
    const double e = cur[k] - intercept - slope * lag[k];
    ssr += e * e;
  }
  const double variance = ssr / (n - 2.0);
  if (!std::isfinite(variance)) return fallback;
  return std::max(variance, floor);
}

void StateSpaceParams::validate() const {
  if (!(process_variance >= kProcessVarianceFloor) || !std::isfinite(process_variance)) {
    throw ConfigError("process variance must be at least 1e-6");
  }
  if (particles < 1) throw ConfigError("particle count must be positive");
}

namespace {

void resample(std::vector<double>& particles, const std::vector<double>& weights,
              Resampling scheme, Rng& rng, std::vector<double>& cumulative,
              std::vector<double>& scratch) {
  const std::size_t m = particles.size();
  cumulative.resize(m);
  std::partial_sum(weights.begin(), weights.end(), cumulative.begin());
  cumulative.back() = 1.0;
  scratch.resize(m);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto pick = [&](double u) {
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    return particles[static_cast<std::size_t>(it - cumulative.begin())];
  };
  if (scheme == Resampling::kSystematic) {
    const double offset = unit(rng);
    for (std::size_t k = 0; k < m; ++k) {
      scratch[k] = pick((static_cast<double>(k) + offset) / static_cast<double>(m));
    }
  } else {
    for (std::size_t k = 0; k < m; ++k) scratch[k] = pick(unit(rng));
  }
  particles.swap(scratch);
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

FilteredSeries filter_series(const DistanceSeries& obs, const StateSpaceParams& params) {
  params.validate();
  if (obs.frequency != Frequency::kMonthly) throw DataError("filter expects a monthly series");
  if (obs.values.empty()) throw DataError("empty observation window for " + obs.pair_id);
  if (!obs.event_counts.empty() && obs.event_counts.size() != obs.values.size()) {
    throw DataError("event counts do not match observations for " + obs.pair_id);
  }

  std::vector<double> observed;
  for (const auto& v : obs.values) {
    if (v) observed.push_back(*v);
  }
  if (observed.empty()) throw DataError("no observed months for " + obs.pair_id);

  Rng rng(derive_seed(params.seed, obs.pair_id));
  const auto m = static_cast<std::size_t>(params.particles);
  std::vector<double> particles(m);
  if (params.initialization == Initialization::kFirstObservation) {
    std::fill(particles.begin(), particles.end(), observed.front());
  } else {
    std::uniform_int_distribution<std::size_t> draw(0, observed.size() - 1);
    for (auto& p : particles) p = observed[draw(rng)];
  }

  FilteredSeries out;
  out.pair_id = obs.pair_id;
  out.start = obs.start;
  out.posterior_mean.reserve(obs.values.size());
  out.effective_sample_size.reserve(obs.values.size());

  std::normal_distribution<double> step(0.0, std::sqrt(params.process_variance));
  std::vector<double> log_w(m), weights(m), cumulative, scratch;

  for (std::size_t t = 0; t < obs.values.size(); ++t) {
    if (t > 0) {
      for (auto& p : particles) p += step(rng);
    }
    const auto& y = obs.values[t];
    if (!y) {
      out.posterior_mean.push_back(mean_of(particles));
      out.effective_sample_size.push_back(static_cast<double>(m));
      continue;
    }

    const long n = obs.event_counts.empty() ? 0 : obs.event_counts[t];
    const double r = observation_variance(n);
    double max_log = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m; ++k) {
      const double e = *y - particles[k];
      log_w[k] = -0.5 * e * e / r;
      max_log = std::max(max_log, log_w[k]);
    }
    double total = 0.0;
    if (std::isfinite(max_log)) {
      for (std::size_t k = 0; k < m; ++k) {
        weights[k] = std::exp(log_w[k] - max_log);
        total += weights[k];
      }
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
      std::fill(weights.begin(), weights.end(), 1.0 / static_cast<double>(m));
      ++out.degenerate_months;
    } else {
      for (auto& w : weights) w /= total;
    }
    double sum_sq = 0.0;
    for (double w : weights) sum_sq += w * w;
    out.effective_sample_size.push_back(1.0 / sum_sq);

    resample(particles, weights, params.resampling, rng, cumulative, scratch);
    out.posterior_mean.push_back(mean_of(particles));
  }
  return out;
}

DistanceSeries filter_index(const DistanceSeries& obs, const FilterConfig& config) {
  StateSpaceParams params;
  params.process_variance = estimate_process_variance(obs.values, config.q_floor, config.q_default);
  params.particles = config.particles;
  params.seed = config.seed;
  params.resampling = config.resampling;
  params.initialization = config.initialization;
  // A configured floor below the model floor still has to pass validation.
  params.process_variance = std::max(params.process_variance, kProcessVarianceFloor);

  const FilteredSeries filtered = filter_series(obs, params);
  DistanceSeries out = obs;
  out.values.assign(filtered.posterior_mean.begin(), filtered.posterior_mean.end());
  out.filtered = true;
  return out;
}

}  // namespace pdgrav
