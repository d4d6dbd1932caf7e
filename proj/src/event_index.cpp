#include "pdgrav/event_index.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "pdgrav/errors.hpp"

namespace pdgrav {

namespace {

// Absorbs rounding in sums of scores that sit exactly on the scale ends.
constexpr double kBoundSlack = 1e-9;

}  // namespace

int IndexWindow::months() const {
  return period_index(last_month, Frequency::kMonthly) -
         period_index(first_month, Frequency::kMonthly) + 1;
}

std::optional<double> normalize_month(double goldstein_sum, long event_count_either) {
  if (event_count_either < 0) throw DataError("negative event count");
  if (!std::isfinite(goldstein_sum)) throw DataError("non-finite Goldstein sum");
  if (event_count_either == 0) return std::nullopt;
  const double value = goldstein_sum / static_cast<double>(event_count_either);
  if (value < kGoldsteinMin - kBoundSlack || value > kGoldsteinMax + kBoundSlack) {
    throw DataError("normalised Goldstein score " + std::to_string(value) +
                    " outside [-10, 8.3]; input is corrupt");
  }
  return value;
}

DistanceSeries aggregate_period(const DistanceSeries& monthly, Frequency target,
                                AggregationMode mode) {
  if (monthly.frequency != Frequency::kMonthly) {
    throw std::invalid_argument("aggregate_period expects a monthly series");
  }
  if (target == Frequency::kMonthly) return monthly;

  DistanceSeries out;
  out.pair_id = monthly.pair_id;
  out.frequency = target;
  out.coverage_months = monthly.coverage_months;
  out.filtered = monthly.filtered;
  out.sign = monthly.sign;
  if (monthly.values.empty()) {
    out.start = enclosing_period(monthly.start, target);
    return out;
  }

  const int first_month = period_index(monthly.start, Frequency::kMonthly);
  const int n_months = static_cast<int>(monthly.values.size());
  out.start = enclosing_period(monthly.start, target);
  const int first_out = period_index(out.start, target);
  const int last_out = period_index(
      enclosing_period(period_from_index(first_month + n_months - 1, Frequency::kMonthly), target),
      target);
  const std::size_t n_out = static_cast<std::size_t>(last_out - first_out + 1);

  std::vector<double> sums(n_out, 0.0);
  std::vector<std::optional<double>> firsts(n_out);
  out.observed_months.assign(n_out, 0);

  for (int k = 0; k < n_months; ++k) {
    const Period month = period_from_index(first_month + k, Frequency::kMonthly);
    const auto slot = static_cast<std::size_t>(
        period_index(enclosing_period(month, target), target) - first_out);
    const auto& v = monthly.values[static_cast<std::size_t>(k)];
    const bool opens_period = (month.sub - 1) % (12 / periods_per_year(target)) == 0;
    if (opens_period) firsts[slot] = v;
    if (v) {
      sums[slot] += *v;
      ++out.observed_months[slot];
    }
  }

  out.values.resize(n_out);
  for (std::size_t k = 0; k < n_out; ++k) {
    if (mode == AggregationMode::kSum) {
      out.values[k] = sums[k];
    } else {
      out.values[k] = firsts[k];
    }
  }
  return out;
}

ThresholdResult apply_coverage_threshold(std::vector<DistanceSeries> panel,
                                         int min_nonzero_months) {
  if (min_nonzero_months < 0) throw ConfigError("coverage threshold must be non-negative");
  ThresholdResult result;
  const std::size_t total = panel.size();
  for (auto& s : panel) {
    if (s.coverage_months >= min_nonzero_months) result.retained.push_back(std::move(s));
  }
  result.retention_fraction =
      total == 0 ? 1.0 : static_cast<double>(result.retained.size()) / static_cast<double>(total);
  return result;
}

DistanceSeries negate_for_regression(DistanceSeries series) {
  if (series.sign == SignConvention::kNegated) {
    throw std::logic_error("series " + series.pair_id + " is already negated");
  }
  for (auto& v : series.values) {
    if (v) *v = -*v;
  }
  series.sign = SignConvention::kNegated;
  return series;
}

double ihs(double x) { return std::asinh(x); }

std::string canonical_pair_id(std::string_view a, std::string_view b) {
  if (b < a) std::swap(a, b);
  std::string id(a);
  id += '-';
  id += b;
  return id;
}

std::pair<std::string, std::string> split_pair_id(std::string_view pair_id) {
  const auto dash = pair_id.find('-');
  if (dash == std::string_view::npos || dash == 0 || dash + 1 == pair_id.size()) {
    throw DataError("malformed pair id '" + std::string(pair_id) + "'");
  }
  return {std::string(pair_id.substr(0, dash)), std::string(pair_id.substr(dash + 1))};
}

int count_coverage(std::span<const std::optional<double>> values) {
  return static_cast<int>(
      std::count_if(values.begin(), values.end(), [](const auto& v) { return v && *v != 0.0; }));
}

std::vector<DistanceSeries> build_monthly_series(const EventPanel& events,
                                                 const IndexWindow& window) {
  const int first = period_index(window.first_month, Frequency::kMonthly);
  const int n_months = window.months();
  if (n_months <= 0) throw ConfigError("empty index window");

  std::map<std::string, DistanceSeries> by_pair;
  std::map<std::string, std::vector<char>> seen;
  for (const auto& e : events) {
    if (e.month.sub < 1 || e.month.sub > 12) {
      throw DataError("pair " + e.pair_id + ": month out of range");
    }
    if (e.event_count_pair < 0 || e.event_count_either < 0) {
      throw DataError("pair " + e.pair_id + ": negative event count");
    }
    if (e.event_count_pair > e.event_count_either) {
      throw DataError("pair " + e.pair_id + " " + to_string(e.month, Frequency::kMonthly) +
                      ": event_count_pair exceeds event_count_either");
    }
    const int k = period_index(e.month, Frequency::kMonthly) - first;
    if (k < 0 || k >= n_months) continue;

    auto [it, inserted] = by_pair.try_emplace(e.pair_id);
    DistanceSeries& s = it->second;
    if (inserted) {
      s.pair_id = e.pair_id;
      s.frequency = Frequency::kMonthly;
      s.start = window.first_month;
      s.values.assign(static_cast<std::size_t>(n_months), std::nullopt);
      s.event_counts.assign(static_cast<std::size_t>(n_months), 0);
      s.observed_months.assign(static_cast<std::size_t>(n_months), 0);
    }
    const auto slot = static_cast<std::size_t>(k);
    auto& seen_months = seen[e.pair_id];
    if (seen_months.empty()) seen_months.assign(static_cast<std::size_t>(n_months), 0);
    if (seen_months[slot]) {
      throw DataError("pair " + e.pair_id + " " + to_string(e.month, Frequency::kMonthly) +
                      ": duplicated month");
    }
    seen_months[slot] = 1;
    s.values[slot] = normalize_month(e.goldstein_sum, e.event_count_either);
    s.event_counts[slot] = e.event_count_pair;
    s.observed_months[slot] = s.values[slot] ? 1 : 0;
  }

  std::vector<DistanceSeries> out;
  out.reserve(by_pair.size());
  for (auto& [id, s] : by_pair) {
    s.coverage_months = count_coverage(s.values);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace pdgrav
