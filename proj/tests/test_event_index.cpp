#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "pdgrav/errors.hpp"
#include "pdgrav/event_index.hpp"

using namespace pdgrav;

namespace {

DistanceSeries monthly(std::vector<std::optional<double>> values, Period start = {2000, 1}) {
  DistanceSeries s;
  s.pair_id = "AAA-BBB";
  s.frequency = Frequency::kMonthly;
  s.start = start;
  s.values = std::move(values);
  s.coverage_months = count_coverage(s.values);
  return s;
}

DistanceSeries with_coverage(int months) {
  DistanceSeries s = monthly({});
  s.coverage_months = months;
  return s;
}

}  // namespace

TEST_CASE("normalize_month divides by events mentioning either country") {
  CHECK(normalize_month(4.2, 6).value() == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(normalize_month(0.0, 17).value() == 0.0);
  CHECK_FALSE(normalize_month(3.0, 0).has_value());
  CHECK(normalize_month(-60.0, 6).value() == -10.0);
  CHECK(normalize_month(49.8, 6).value() == doctest::Approx(8.3));
  CHECK_THROWS_AS(normalize_month(50.0, 6), DataError);
  CHECK_THROWS_AS(normalize_month(-61.0, 6), DataError);
  CHECK_THROWS_AS(normalize_month(1.0, -1), DataError);
}

TEST_CASE("normalised scores of valid event months stay on the Goldstein scale") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> score(kGoldsteinMin, kGoldsteinMax);
  for (int rep = 0; rep < 2000; ++rep) {
    const long n_pair = std::uniform_int_distribution<long>(1, 50)(rng);
    const long n_either = n_pair + std::uniform_int_distribution<long>(0, 150)(rng);
    double sum = 0.0;
    for (long k = 0; k < n_pair; ++k) sum += score(rng);
    const double v = normalize_month(sum, n_either).value();
    CHECK(v >= kGoldsteinMin);
    CHECK(v <= kGoldsteinMax);
  }
}

TEST_CASE("annual sums") {
  DistanceSeries s = monthly(std::vector<std::optional<double>>(12, 0.5));
  const auto annual = aggregate_period(s, Frequency::kAnnual, AggregationMode::kSum);
  REQUIRE(annual.values.size() == 1);
  CHECK(annual.values[0].value() == doctest::Approx(6.0));
  CHECK(annual.observed_months[0] == 12);
  CHECK(annual.start == Period{2000, 0});

  SUBCASE("missing months count as zero and all-missing years are flagged") {
    std::vector<std::optional<double>> v(24);
    v[3] = 1.5;
    v[7] = -0.5;
    const auto a = aggregate_period(monthly(v), Frequency::kAnnual, AggregationMode::kSum);
    REQUIRE(a.values.size() == 2);
    CHECK(a.values[0].value() == doctest::Approx(1.0));
    CHECK(a.observed_months[0] == 2);
    CHECK(a.values[1].value() == 0.0);
    CHECK(a.observed_months[1] == 0);
  }
}

TEST_CASE("annual sums of realistic monthly scores respect the published range") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> score(kGoldsteinMin, kGoldsteinMax);
  std::bernoulli_distribution missing(0.2);
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<std::optional<double>> v(120);
    for (auto& x : v) {
      if (!missing(rng)) x = score(rng);
    }
    const auto a = aggregate_period(monthly(v), Frequency::kAnnual, AggregationMode::kSum);
    for (const auto& x : a.values) {
      CHECK(*x >= kAnnualSumMin);
      CHECK(*x <= kAnnualSumMax);
    }
  }
}

TEST_CASE("twelve months at the scale maximum sum past the published annual maximum") {
  // 12 * 8.3 = 99.6 > 96. The aggregator reports the sum rather than clipping.
  const auto a = aggregate_period(monthly(std::vector<std::optional<double>>(12, kGoldsteinMax)),
                                  Frequency::kAnnual, AggregationMode::kSum);
  CHECK(*a.values[0] == doctest::Approx(12.0 * 8.3));
  CHECK(*a.values[0] > kAnnualSumMax);
}

TEST_CASE("quarterly first-month aggregation") {
  const auto q = aggregate_period(monthly({1.0, -2.0, 0.5, std::nullopt, 3.0, 3.0}),
                                  Frequency::kQuarterly, AggregationMode::kFirstMonth);
  REQUIRE(q.values.size() == 2);
  CHECK(q.values[0].value() == 1.0);
  CHECK_FALSE(q.values[1].has_value());
  CHECK(q.observed_months[1] == 2);
  CHECK(q.start == Period{2000, 1});

  const auto s = aggregate_period(monthly({1.0, -2.0, 0.5}), Frequency::kQuarterly,
                                  AggregationMode::kSum);
  CHECK(s.values[0].value() == doctest::Approx(-0.5));
}

TEST_CASE("a series starting mid-period aggregates into the enclosing period") {
  const auto a = aggregate_period(monthly({1.0, 1.0, 1.0}, {2000, 11}), Frequency::kAnnual,
                                  AggregationMode::kSum);
  REQUIRE(a.values.size() == 2);
  CHECK(a.start == Period{2000, 0});
  CHECK(*a.values[0] == 2.0);
  CHECK(*a.values[1] == 1.0);
}

TEST_CASE("aggregation rejects non-monthly input") {
  DistanceSeries s = monthly({1.0});
  s.frequency = Frequency::kAnnual;
  CHECK_THROWS_AS(aggregate_period(s, Frequency::kAnnual, AggregationMode::kSum),
                  std::invalid_argument);
}

TEST_CASE("coverage threshold") {
  std::vector<DistanceSeries> panel{with_coverage(270), with_coverage(269)};
  auto r = apply_coverage_threshold(panel, kBaselineCoverageMonths);
  REQUIRE(r.retained.size() == 1);
  CHECK(r.retained[0].coverage_months == 270);
  CHECK(r.retention_fraction == 0.5);

  CHECK(apply_coverage_threshold(panel, 0).retained.size() == 2);
  CHECK_THROWS_AS(apply_coverage_threshold(panel, -1), ConfigError);
}

TEST_CASE("raising the threshold never adds pairs") {
  std::mt19937_64 rng(3);
  std::vector<DistanceSeries> panel;
  for (int k = 0; k < 300; ++k) {
    panel.push_back(with_coverage(std::uniform_int_distribution<int>(0, kWindowMonths)(rng)));
  }
  std::size_t previous = panel.size() + 1;
  for (int t = 0; t <= kWindowMonths; t += 9) {
    const auto n = apply_coverage_threshold(panel, t).retained.size();
    CHECK(n <= previous);
    previous = n;
  }
  CHECK(apply_coverage_threshold(panel, kStrictCoverageMonths).retained.size() <=
        apply_coverage_threshold(panel, kBaselineCoverageMonths).retained.size());
}

TEST_CASE("coverage counts present non-zero months") {
  const std::vector<std::optional<double>> v{0.0, std::nullopt, 1.0, -2.0, 0.0};
  CHECK(count_coverage(v) == 2);
}

TEST_CASE("sign flip") {
  auto n = negate_for_regression(monthly({6.0, 0.0, std::nullopt}));
  CHECK(*n.values[0] == -6.0);
  CHECK(*n.values[1] == 0.0);
  CHECK_FALSE(n.values[2].has_value());
  CHECK(n.sign == SignConvention::kNegated);
  CHECK_THROWS_AS(negate_for_regression(n), std::logic_error);
}

TEST_CASE("aggregation commutes with the sign flip") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> score(-10.0, 8.3);
  std::vector<std::optional<double>> v(36);
  for (auto& x : v) {
    if (std::bernoulli_distribution(0.8)(rng)) x = score(rng);
  }
  const auto s = monthly(v);
  for (auto f : {Frequency::kQuarterly, Frequency::kAnnual}) {
    for (auto mode : {AggregationMode::kSum, AggregationMode::kFirstMonth}) {
      const auto a = aggregate_period(negate_for_regression(s), f, mode);
      const auto b = negate_for_regression(aggregate_period(s, f, mode));
      REQUIRE(a.values.size() == b.values.size());
      for (std::size_t k = 0; k < a.values.size(); ++k) {
        REQUIRE(a.values[k].has_value() == b.values[k].has_value());
        if (a.values[k]) CHECK(*a.values[k] == doctest::Approx(*b.values[k]).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("inverse hyperbolic sine") {
  CHECK(ihs(0.0) == 0.0);
  CHECK(ihs(1.0) == doctest::Approx(std::log(1.0 + std::sqrt(2.0))).epsilon(1e-15));
  CHECK(ihs(1.0) == doctest::Approx(0.8813735870).epsilon(1e-10));

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int k = 0; k < 1000; ++k) {
    const double x = u(rng);
    const double y = u(rng);
    CHECK(ihs(-x) == -ihs(x));
    if (x < y) CHECK(ihs(x) < ihs(y));
    CHECK(ihs(x) == doctest::Approx(std::log(x + std::sqrt(x * x + 1.0))).epsilon(1e-12));
  }
}

TEST_CASE("pair ids") {
  CHECK(canonical_pair_id("USA", "CHN") == "CHN-USA");
  CHECK(canonical_pair_id("CHN", "USA") == "CHN-USA");
  CHECK(split_pair_id("CHN-USA") == std::pair<std::string, std::string>{"CHN", "USA"});
  CHECK_THROWS_AS(split_pair_id("CHNUSA"), DataError);
}

TEST_CASE("monthly series over the default window") {
  IndexWindow w;
  CHECK(w.months() == kWindowMonths);

  EventPanel events{
      {"AAA-BBB", {1980, 1}, 4.2, 2, 6},
      {"AAA-BBB", {1980, 3}, 0.0, 0, 0},
      {"AAA-BBB", {2024, 12}, -3.0, 1, 3},
      {"AAA-BBB", {1979, 12}, 1.0, 1, 1},  // outside the window
      {"AAA-CCC", {1990, 6}, 0.0, 4, 4},
  };
  const auto series = build_monthly_series(events, w);
  REQUIRE(series.size() == 2);
  const auto& ab = series[0];
  CHECK(ab.pair_id == "AAA-BBB");
  CHECK(ab.values.size() == 540u);
  CHECK(*ab.values[0] == doctest::Approx(0.7));
  CHECK(ab.event_counts[0] == 2);
  CHECK_FALSE(ab.values[2].has_value());
  CHECK(*ab.values[539] == -1.0);
  CHECK(ab.coverage_months == 2);
  CHECK(series[1].coverage_months == 0);

  SUBCASE("duplicated months are rejected") {
    events.push_back({"AAA-BBB", {1980, 1}, 1.0, 1, 1});
    CHECK_THROWS_AS(build_monthly_series(events, w), DataError);
  }
  SUBCASE("pair counts above either counts are rejected") {
    events.push_back({"AAA-DDD", {1981, 1}, 1.0, 5, 1});
    CHECK_THROWS_AS(build_monthly_series(events, w), DataError);
  }
}
