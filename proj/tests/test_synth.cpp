#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "doctest.h"
#include "pdgrav/errors.hpp"
#include "pdgrav/synth.hpp"
#include "support.hpp"

using namespace pdgrav;

namespace {

double sd(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

bool same_panel(const GravityPanel& a, const GravityPanel& b) {
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    const auto& x = a.records[k];
    const auto& y = b.records[k];
    if (x.origin != y.origin || x.destination != y.destination || x.period != y.period ||
        x.flow != y.flow || x.pd != y.pd || x.rta != y.rta || x.gattwto_1 != y.gattwto_1 ||
        x.gattwto_2 != y.gattwto_2 || x.polity_i != y.polity_i || x.corruption_j != y.corruption_j) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("panel shape") {
  synth::DgpSpec spec;
  spec.n_countries = 7;
  spec.n_periods = 3;
  const auto sp = synth::gen_panel(spec);
  CHECK(sp.panel.records.size() == 7u * 7u * 3u);
  CHECK(sp.truth.countries.front() == "C01");
  for (const auto& r : sp.panel.records) {
    CHECK(r.flow.has_value());
    CHECK(r.gattwto_1 + r.gattwto_2 <= 1.0);
    if (r.is_domestic()) {
      CHECK(r.gattwto_1 == 0.0);
    } else {
      CHECK(r.pd.has_value());
    }
  }
}

TEST_CASE("same seed, same panel") {
  synth::DgpSpec spec;
  spec.n_countries = 12;
  spec.n_periods = 5;
  spec.seed = 7;
  CHECK(same_panel(synth::gen_panel(spec).panel, synth::gen_panel(spec).panel));
  auto other = spec;
  other.seed = 8;
  CHECK_FALSE(same_panel(synth::gen_panel(spec).panel, synth::gen_panel(other).panel));
}

TEST_CASE("with beta = 0 distance and flows are uncorrelated") {
  synth::DgpSpec spec;
  spec.n_countries = 100;
  spec.n_periods = 1;
  spec.beta = {{"PD", 0.0}};
  spec.seed = 3;
  const auto sp = synth::gen_panel(spec);
  std::vector<double> x, y;
  for (const auto& r : sp.panel.records) {
    if (r.is_domestic()) continue;
    x.push_back(synth::term_value(r, "PD", true));
    y.push_back(*r.flow);
  }
  REQUIRE(x.size() >= 9900);
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
    syy += (y[k] - my) * (y[k] - my);
  }
  CHECK(std::abs(sxy / std::sqrt(sxx * syy)) < 0.05);
}

TEST_CASE("doubling the exporter effect scale doubles its dispersion") {
  synth::DgpSpec spec;
  spec.n_countries = 60;
  spec.n_periods = 1;
  spec.intercept = 4.0;
  spec.importer_fe_scale = 1e-9;
  spec.pair_fe_scale = 1e-9;
  spec.border_fe_scale = 1e-9;
  spec.beta = {};
  auto wide = spec;
  wide.exporter_fe_scale = 2.0 * spec.exporter_fe_scale;

  auto moments = [](const synth::SyntheticPanel& sp) {
    // Log of each exporter's mean international flow, and the true effects.
    std::map<std::string, std::pair<double, int>> flows;
    for (const auto& r : sp.panel.records) {
      if (r.is_domestic()) continue;
      auto& f = flows[r.origin];
      f.first += *r.flow;
      ++f.second;
    }
    std::vector<double> logs;
    for (const auto& [c, f] : flows) logs.push_back(std::log(f.first / f.second));
    std::vector<double> fe;
    for (const auto& row : sp.truth.exporter_fe) fe.push_back(row[0]);
    return std::pair(sd(logs), sd(fe));
  };
  const auto [data_a, truth_a] = moments(synth::gen_panel(spec));
  const auto [data_b, truth_b] = moments(synth::gen_panel(wide));
  CHECK(truth_b / truth_a == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(data_b / data_a == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("generator settings validation") {
  synth::DgpSpec spec;
  spec.pd_ar = 1.0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = {};
  spec.beta = {{"NOT_A_TERM", 1.0}};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = {};
  spec.rta_share = 1.5;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("dummy oracle on an intercept-only Poisson model") {
  EstimationProblem p;
  p.y = Eigen::Vector3d(1, 2, 3);
  p.X = Eigen::MatrixXd(3, 0);
  FixedEffectDim d;
  d.name = "all";
  d.labels = {"g"};
  d.ids = {0, 0, 0};
  p.fe.push_back(d);
  const auto fit = synth::dummy_oracle_fit(p, synth::Family::kPoisson);
  CHECK(fit.converged);
  CHECK(fit.n_columns == 1);
}

TEST_CASE("dummy oracle flags a separable logit") {
  EstimationProblem p;
  p.y = Eigen::Vector4d(0, 0, 1, 1);
  p.X = Eigen::MatrixXd(4, 1);
  p.X << -1, -2, 1, 2;
  p.names = {"x"};
  const auto fit = synth::dummy_oracle_fit(p, synth::Family::kBernoulli);
  CHECK_FALSE(fit.converged);
}

TEST_CASE("dummy oracle refuses oversized expansions") {
  synth::DgpSpec spec;
  spec.n_countries = 80;
  spec.n_periods = 10;
  const auto p = testing::problem_from(synth::gen_panel(spec).panel, testing::four_terms());
  CHECK_THROWS_AS(synth::dummy_oracle_fit(p, synth::Family::kPoisson), ConfigError);
}

TEST_CASE("Kalman oracle limits") {
  const std::vector<std::optional<double>> obs{1.0, 3.0, std::nullopt, 2.0};
  SUBCASE("vanishing observation noise tracks the data") {
    const std::vector<double> r(4, 1e-12);
    const auto k = synth::kalman_oracle(obs, 0.1, r, 0.0, 10.0);
    CHECK(k.mean[0] == doctest::Approx(1.0));
    CHECK(k.mean[1] == doctest::Approx(3.0));
    CHECK(k.mean[2] == doctest::Approx(3.0));
    CHECK(k.mean[3] == doctest::Approx(2.0));
  }
  SUBCASE("a missing month only adds process variance") {
    const std::vector<double> r{0.5, 0.25, 1.0, 0.5};
    const auto k = synth::kalman_oracle(obs, 0.1, r, 0.0, 1.0);
    CHECK(k.mean[2] == k.mean[1]);
    CHECK(k.variance[2] == doctest::Approx(k.variance[1] + 0.1).epsilon(1e-15));
  }
  SUBCASE("no process noise averages the observations with precision weights") {
    const std::vector<double> r{0.5, 0.25, 1.0, 1.0};
    const auto k = synth::kalman_oracle(obs, 0.0, r, 0.0, 1e12);
    const double expected = (1.0 / 0.5 + 3.0 / 0.25 + 2.0 / 1.0) / (2.0 + 4.0 + 1.0);
    CHECK(k.mean[3] == doctest::Approx(expected).epsilon(1e-9));
    CHECK(k.variance[3] == doctest::Approx(1.0 / 7.0).epsilon(1e-9));
  }
}

TEST_CASE("Kalman mixture oracle") {
  const std::vector<std::optional<double>> obs{0.5, 1.5, std::nullopt, -0.25, 0.75};
  const std::vector<double> r{1.0, 0.5, 0.2, 0.25, 1.0};
  SUBCASE("one atom is the point-mass Kalman filter") {
    const std::vector<double> atoms{0.4};
    const auto mix = synth::kalman_mixture_oracle(obs, 0.1, r, atoms);
    const auto k = synth::kalman_oracle(obs, 0.1, r, 0.4, 0.0);
    for (std::size_t t = 0; t < obs.size(); ++t) {
      CHECK(mix.mean[t] == doctest::Approx(k.mean[t]).epsilon(1e-14));
      CHECK(mix.variance[t] == doctest::Approx(k.variance[t]).epsilon(1e-14));
    }
  }
  SUBCASE("two atoms weighted by likelihood") {
    // Atoms -1 and 1 seen through y = 0.5 with unit noise: the likelihood
    // ratio is e, so the mean is (e - 1) / (e + 1) = tanh(1/2).
    const std::vector<double> atoms{-1.0, 1.0};
    const auto mix = synth::kalman_mixture_oracle(obs, 0.1, r, atoms);
    CHECK(mix.mean[0] == doctest::Approx(std::tanh(0.5)).epsilon(1e-14));
    CHECK(mix.variance[0] == doctest::Approx(1.0 - std::tanh(0.5) * std::tanh(0.5)).epsilon(1e-14));
  }
  SUBCASE("many Gaussian atoms approach the Gaussian-prior filter") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> prior(0.3, std::sqrt(0.5));
    std::vector<double> atoms(200000);
    for (double& a : atoms) a = prior(rng);
    const auto mix = synth::kalman_mixture_oracle(obs, 0.1, r, atoms);
    const auto k = synth::kalman_oracle(obs, 0.1, r, 0.3, 0.5);
    for (std::size_t t = 0; t < obs.size(); ++t) {
      CHECK(std::abs(mix.mean[t] - k.mean[t]) < 5e-3);
      CHECK(std::abs(mix.variance[t] - k.variance[t]) < 5e-3);
    }
  }
  SUBCASE("no atoms") {
    CHECK_THROWS_AS(synth::kalman_mixture_oracle(obs, 0.1, r, std::vector<double>{}), DataError);
  }
}

TEST_CASE("incidental logit generator") {
  const auto p = synth::gen_incidental_logit(30, 4, 1.0, 2);
  CHECK(p.n_rows() == 120);
  CHECK(p.fe.size() == 1);
  CHECK_NOTHROW(p.validate());
  for (Eigen::Index r = 0; r < p.n_rows(); ++r) CHECK((p.y(r) == 0.0 || p.y(r) == 1.0));
}
