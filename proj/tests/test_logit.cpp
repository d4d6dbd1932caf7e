#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "pdgrav/errors.hpp"
#include "pdgrav/logit.hpp"
#include "pdgrav/synth.hpp"

using namespace pdgrav;

namespace {

std::set<std::string> zero_variance_pairs(const EstimationProblem& p) {
  std::map<int, std::vector<double>> by_pair;
  for (std::size_t r = 0; r < p.pair.size(); ++r) by_pair[p.pair[r]].push_back(p.y(static_cast<Eigen::Index>(r)));
  std::set<std::string> out;
  for (const auto& [pid, ys] : by_pair) {
    const double mean = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
    double ss = 0.0;
    for (double y : ys) ss += (y - mean) * (y - mean);
    if (ss == 0.0) out.insert(p.pair_labels[static_cast<std::size_t>(pid)]);
  }
  return out;
}

// n_pairs pairs observed over `periods`; column x, one pair FE dimension.
EstimationProblem from_rows(const std::vector<int>& pair, const std::vector<int>& period,
                            const std::vector<double>& x, const std::vector<double>& y) {
  EstimationProblem p;
  const auto n = static_cast<Eigen::Index>(y.size());
  p.y.resize(n);
  p.X.resize(n, 1);
  p.names = {"x"};
  FixedEffectDim d;
  d.name = "pair";
  int n_pairs = 0;
  for (int id : pair) n_pairs = std::max(n_pairs, id + 1);
  for (int i = 0; i < n_pairs; ++i) d.labels.push_back("p" + std::to_string(i));
  for (Eigen::Index r = 0; r < n; ++r) {
    p.y(r) = y[static_cast<std::size_t>(r)];
    p.X(r, 0) = x[static_cast<std::size_t>(r)];
  }
  d.ids = pair;
  p.pair = pair;
  p.pair_labels = d.labels;
  p.cluster = pair;
  p.period = period;
  p.domestic.assign(y.size(), 0);
  p.fe.push_back(std::move(d));
  return p;
}

EstimationProblem location_problem(int clusters, int per_cluster, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> pair, period;
  std::vector<double> x, y;
  for (int g = 0; g < clusters; ++g) {
    const double shift = std::normal_distribution<double>(0.0, 1.0)(rng);
    for (int t = 0; t < per_cluster; ++t) {
      pair.push_back(g);
      period.push_back(t);
      x.push_back(0.0);
      y.push_back(shift + std::normal_distribution<double>(0.0, 1.0)(rng));
    }
  }
  return from_rows(pair, period, x, y);
}

Eigen::VectorXd mean_estimator(const EstimationProblem& p) {
  return Eigen::VectorXd::Constant(1, p.y.mean());
}

}  // namespace

TEST_CASE("a pair trading in every period is dropped") {
  auto p = synth::gen_incidental_logit(40, 6, 1.0, 3);
  for (Eigen::Index r = 0; r < 6; ++r) p.y(r) = 1.0;  // pair p0
  const auto est = fit_fe_logit(p);
  const std::set<std::string> dropped(est.dropped_perfectly_classified.begin(),
                                      est.dropped_perfectly_classified.end());
  CHECK(dropped.count("p0") == 1);
  CHECK(dropped == zero_variance_pairs(p));
  for (auto r : est.sample) CHECK(dropped.count(p.pair_labels[static_cast<std::size_t>(p.pair[r])]) == 0);
  CHECK(est.n_obs == static_cast<std::size_t>(p.n_rows()) - 6 * dropped.size());
}

TEST_CASE("fractional outcomes are accepted, values outside [0, 1] are not") {
  auto p = synth::gen_incidental_logit(30, 5, 0.5, 4);
  std::mt19937_64 rng(1);
  for (Eigen::Index r = 0; r < p.n_rows(); ++r) {
    p.y(r) = std::uniform_int_distribution<int>(0, 9)(rng) / 9.0;
  }
  CHECK_NOTHROW(fit_fe_logit(p));
  p.y(0) = 1.5;
  CHECK_THROWS_AS(fit_fe_logit(p), DataError);
}

TEST_CASE("outcome independent of a symmetric regressor") {
  std::mt19937_64 rng(21);
  std::vector<int> pair, period;
  std::vector<double> x, y;
  for (int g = 0; g < 150; ++g) {
    for (int t = 0; t < 6; ++t) {
      pair.push_back(g);
      period.push_back(t);
      x.push_back(t % 2 == 0 ? 1.0 : -1.0);
      y.push_back(std::bernoulli_distribution(0.5)(rng) ? 1.0 : 0.0);
    }
  }
  const auto p = from_rows(pair, period, x, y);
  const auto fit = estimate_logit(p, 200, 5);
  REQUIRE(fit.bootstrap_se.size() == 1);
  CHECK(std::abs(fit.corrected(0)) < 2.0 * fit.bootstrap_se(0));
}

TEST_CASE("matches the explicit-dummy logit MLE") {
  const auto p = synth::gen_incidental_logit(60, 6, 0.8, 9);
  const auto est = fit_fe_logit(p);
  const auto oracle = synth::dummy_oracle_fit(subset_rows(p, est.sample), synth::Family::kBernoulli);
  REQUIRE(oracle.converged);
  CHECK(std::abs(est.coefficients(0) - oracle.coefficients(0)) < 1e-6);
}

TEST_CASE("the oracle flags a perfectly classified pair that the estimator drops") {
  auto p = synth::gen_incidental_logit(20, 6, 0.8, 10);
  for (Eigen::Index r = 0; r < 6; ++r) p.y(r) = 0.0;
  CHECK_FALSE(synth::dummy_oracle_fit(p, synth::Family::kBernoulli).converged);
  CHECK(fit_fe_logit(p).dropped_perfectly_classified.front() == "p0");
}

TEST_CASE("jackknife arithmetic") {
  const Eigen::VectorXd c = spj_combine(Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 1.2),
                                        Eigen::VectorXd::Constant(1, 1.4));
  CHECK(c(0) == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("period split") {
  const auto [a, b] = split_periods({4, 0, 2, 1, 3, 2});
  CHECK(a == std::vector<int>{0, 1, 2});
  CHECK(b == std::vector<int>{3, 4});
  const auto [c, d] = split_periods({7, 8, 9, 10, 11, 12});
  CHECK(c.size() == 3);
  CHECK(d.size() == 3);
  CHECK(d.front() == 10);
}

TEST_CASE("identical halves leave the estimate unchanged") {
  const auto half = synth::gen_incidental_logit(80, 3, 1.0, 12);
  std::vector<int> pair, period;
  std::vector<double> x, y;
  for (int copy = 0; copy < 2; ++copy) {
    for (Eigen::Index r = 0; r < half.n_rows(); ++r) {
      pair.push_back(half.pair[static_cast<std::size_t>(r)]);
      period.push_back(half.period[static_cast<std::size_t>(r)] + 3 * copy);
      x.push_back(half.X(r, 0));
      y.push_back(half.y(r));
    }
  }
  const auto fit = split_panel_jackknife(from_rows(pair, period, x, y));
  CHECK(std::abs(fit.half1(0) - fit.half2(0)) < 1e-8);
  CHECK(std::abs(fit.corrected(0) - fit.uncorrected(0)) < 1e-8);
}

TEST_CASE("jackknife structure") {
  const auto p = synth::gen_incidental_logit(100, 5, 1.0, 13);
  const auto fit = split_panel_jackknife(p);
  CHECK(fit.half1_periods == std::vector<int>{0, 1, 2});
  CHECK(fit.half2_periods == std::vector<int>{3, 4});
  const Eigen::VectorXd identity = 2.0 * fit.uncorrected - 0.5 * (fit.half1 + fit.half2);
  CHECK(fit.corrected(0) == identity(0));
  const auto zero_var = zero_variance_pairs(p);
  CHECK(std::set<std::string>(fit.dropped_perfectly_classified.begin(),
                              fit.dropped_perfectly_classified.end()) == zero_var);

  CHECK_THROWS_AS(split_panel_jackknife(synth::gen_incidental_logit(50, 3, 1.0, 1)), DataError);
}

TEST_CASE("jackknife reduces incidental-parameter bias in most replications") {
  // Short panels with many pairs, where the incidental-parameter bias
  // dominates sampling noise.
  int better = 0;
  const int reps = 200;
  for (int rep = 0; rep < reps; ++rep) {
    const auto p = synth::gen_incidental_logit(1000, 6, 1.0, 5000 + static_cast<std::uint64_t>(rep));
    const auto fit = split_panel_jackknife(p);
    if (std::abs(fit.corrected(0) - 1.0) < std::abs(fit.uncorrected(0) - 1.0)) ++better;
  }
  MESSAGE("corrected closer to the truth in " << better << " of " << reps);
  CHECK(better >= 160);
}

TEST_CASE("bootstrap") {
  SUBCASE("one cluster: every replicate draws the same data") {
    const auto p = location_problem(1, 10, 1);
    const auto b = pair_bootstrap(p, mean_estimator, 2, 3);
    CHECK(b.se(0) == 0.0);
    CHECK(b.replications == 2);
  }
  SUBCASE("location model against the analytic clustered SE") {
    const auto p = location_problem(200, 5, 2);
    const double mean = p.y.mean();
    std::vector<double> sums(200, 0.0);
    for (Eigen::Index r = 0; r < p.n_rows(); ++r) sums[static_cast<std::size_t>(p.cluster[static_cast<std::size_t>(r)])] += p.y(r) - mean;
    double meat = 0.0;
    for (double s : sums) meat += s * s;
    const double analytic = std::sqrt(meat) / static_cast<double>(p.n_rows());
    const auto b = pair_bootstrap(p, mean_estimator, 1000, 7);
    CHECK(std::abs(b.se(0) / analytic - 1.0) < 0.25);
  }
  SUBCASE("same seed, any thread count: identical results") {
    const auto p = synth::gen_incidental_logit(60, 6, 1.0, 4);
    auto est = [](const EstimationProblem& q) { return fit_fe_logit(q).coefficients; };
    const auto a = pair_bootstrap(p, est, 20, 11, 1);
    const auto b = pair_bootstrap(p, est, 20, 11, 1);
    const auto c = pair_bootstrap(p, est, 20, 11, 3);
    CHECK(a.se == b.se);
    CHECK(a.covariance == c.covariance);
    CHECK(pair_bootstrap(p, est, 20, 12, 1).se != a.se);
  }
  SUBCASE("failures") {
    const auto p = location_problem(20, 3, 3);
    std::atomic<int> calls{0};
    auto flaky = [&](const EstimationProblem& q) -> Eigen::VectorXd {
      if (calls++ == 0) throw ConvergenceError("flaky");
      return mean_estimator(q);
    };
    const auto ok = pair_bootstrap(p, flaky, 40, 1, 1);
    CHECK(ok.failures == 1);
    auto broken = [](const EstimationProblem&) -> Eigen::VectorXd { throw ConvergenceError("no"); };
    CHECK_THROWS_AS(pair_bootstrap(p, broken, 40, 1, 1), ConvergenceError);
    CHECK_THROWS_AS(pair_bootstrap(p, mean_estimator, 1, 1, 1), ConfigError);
  }
  SUBCASE("resampled pairs become distinct clusters") {
    const auto p = location_problem(30, 4, 4);
    const auto q = resample_clusters(p, 9);
    CHECK(q.n_rows() == p.n_rows());
    std::set<int> clusters(q.cluster.begin(), q.cluster.end());
    CHECK(clusters.size() == 30);
    CHECK(q.fe[0].n_groups() == 30);
  }
}

TEST_CASE("bootstrapped jackknife is reproducible") {
  const auto p = synth::gen_incidental_logit(80, 6, 1.0, 31);
  const auto a = estimate_logit(p, 30, 77);
  const auto b = estimate_logit(p, 30, 77);
  CHECK(a.bootstrap_se == b.bootstrap_se);
  CHECK(a.corrected == b.corrected);
  CHECK(a.bootstrap_se(0) > 0.0);
}
