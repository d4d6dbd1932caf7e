#pragma once

// Coverage-normalised political-distance observations built from
// pair-month aggregates of coded events.

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pdgrav/period.hpp"

namespace pdgrav {

// Goldstein conflict-cooperation scale. No coded event scores above 8.3.
inline constexpr double kGoldsteinMin = -10.0;
inline constexpr double kGoldsteinMax = 8.3;

// Published range of annual sums of normalised monthly scores.
inline constexpr double kAnnualSumMin = -120.0;
inline constexpr double kAnnualSumMax = 96.0;

// Default index window: January 1980 to December 2024.
inline constexpr int kWindowStartYear = 1980;
inline constexpr int kWindowEndYear = 2024;
inline constexpr int kWindowMonths = 540;

// Minimum non-zero months per pair: half and 60% of the default window.
inline constexpr int kBaselineCoverageMonths = 270;
inline constexpr int kStrictCoverageMonths = 324;

// One pair-month of coded events.
struct EventRecord {
  std::string pair_id;
  Period month;  // sub = calendar month
  double goldstein_sum = 0.0;
  long event_count_pair = 0;
  long event_count_either = 0;
};

using EventPanel = std::vector<EventRecord>;

enum class SignConvention { kRaw, kNegated };

// Per-pair series of political distance at some frequency. values[k] belongs
// to period_from_index(period_index(start) + k).
struct DistanceSeries {
  std::string pair_id;
  Frequency frequency = Frequency::kMonthly;
  Period start;
  std::vector<std::optional<double>> values;
  // Monthly series only: events coded for the pair in each month.
  std::vector<long> event_counts;
  // Months carrying an observation within each period (0 or 1 for monthly).
  std::vector<int> observed_months;
  int coverage_months = 0;
  bool filtered = false;
  SignConvention sign = SignConvention::kRaw;
};

struct IndexWindow {
  Period first_month{kWindowStartYear, 1};
  Period last_month{kWindowEndYear, 12};

  int months() const;
};

// Goldstein sum divided by the events mentioning either country that month.
// Returns nullopt when no events were reported. Throws DataError when the
// ratio falls outside the Goldstein scale.
std::optional<double> normalize_month(double goldstein_sum, long event_count_either);

enum class AggregationMode { kSum, kFirstMonth };

// Monthly to quarterly or annual. kSum treats missing months as 0; periods
// without any observed month are flagged through observed_months == 0.
DistanceSeries aggregate_period(const DistanceSeries& monthly, Frequency target,
                                AggregationMode mode);

struct ThresholdResult {
  std::vector<DistanceSeries> retained;
  double retention_fraction = 0.0;
};

ThresholdResult apply_coverage_threshold(std::vector<DistanceSeries> panel,
                                         int min_nonzero_months);

// Flips the sign so that larger values mean more distant. Throws
// std::logic_error on a series that is already negated.
DistanceSeries negate_for_regression(DistanceSeries series);

// Inverse hyperbolic sine, ln(x + sqrt(x^2 + 1)).
double ihs(double x);

// Unordered pair identifier "AAA-BBB" with the codes sorted.
std::string canonical_pair_id(std::string_view a, std::string_view b);
std::pair<std::string, std::string> split_pair_id(std::string_view pair_id);

// Groups events by pair and normalises each month inside `window`. Records
// outside the window are ignored. Throws DataError on duplicated pair-months
// or when event_count_pair exceeds event_count_either.
std::vector<DistanceSeries> build_monthly_series(const EventPanel& events,
                                                 const IndexWindow& window);

// Months with a present, non-zero value.
int count_coverage(std::span<const std::optional<double>> values);

}  // namespace pdgrav
