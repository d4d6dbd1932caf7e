#include <cmath>
#include <random>

#include "doctest.h"
#include "pdgrav/effects.hpp"
#include "pdgrav/errors.hpp"

using namespace pdgrav;

namespace {

CoefficientTable table(std::vector<std::string> names, std::vector<double> beta, Eigen::MatrixXd v) {
  CoefficientTable t;
  t.names = std::move(names);
  t.estimates = Eigen::Map<Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  t.covariance = std::move(v);
  return t;
}

CoefficientTable pd_only(double b, double var) {
  return table({"PD"}, {b}, Eigen::MatrixXd::Constant(1, 1, var));
}

double percent(double b, double sd) { return 100.0 * std::expm1(b * sd); }

}  // namespace

TEST_CASE("one-SD percent effect") {
  const auto base = pd_condition("baseline", {});
  CHECK(one_sd_effect(pd_only(0.0, 0.01), 0.42, base).effect == 0.0);

  const auto e = one_sd_effect(pd_only(-0.059, 0.0001), 0.42, base);
  CHECK(std::abs(e.effect - 100.0 * std::expm1(-0.059 * 0.42)) < 1e-10);
  CHECK(e.effect == doctest::Approx(-2.45).epsilon(0.001));
  CHECK(std::abs(e.effect - -2.288) <= 0.25);
  CHECK(e.unit == "percent");
  CHECK(e.sd_used == 0.42);
}

TEST_CASE("SE at b = 0 is 100 * sd * sqrt(v)") {
  const auto e = one_sd_effect(pd_only(0.0, 0.0004), 0.5, pd_condition("b", {}));
  CHECK(e.se == doctest::Approx(100.0 * 0.5 * 0.02).epsilon(1e-14));
  CHECK(e.ci_low == doctest::Approx(-kNormal975 * e.se));
  CHECK(e.ci_high == doctest::Approx(kNormal975 * e.se));
}

TEST_CASE("member and non-member slopes") {
  Eigen::Matrix3d v;
  v << 0.04, 0.01, -0.005, 0.01, 0.09, 0.002, -0.005, 0.002, 0.01;
  const auto t = table({"PD", "PD_x_GATTWTO_2", "RTA"}, {-0.1, 0.05, 0.3}, v);
  const auto member = one_sd_effect(t, 0.4, pd_condition("member", {{"GATTWTO_2", 1.0}}));
  CHECK(member.b == -0.1 + 0.05);
  CHECK(member.b_variance == doctest::Approx(0.04 + 0.09 + 2 * 0.01).epsilon(1e-14));
  CHECK(member.effect == doctest::Approx(percent(-0.05, 0.4)).epsilon(1e-12));

  const auto non_member = one_sd_effect(t, 0.4, pd_condition("non-member", {}));
  CHECK(non_member.b == -0.1);
  CHECK(non_member.b_variance == 0.04);

  CHECK_THROWS_AS(one_sd_effect(t, 0.4, pd_condition("x", {{"Polity_i", 1.0}})), ConfigError);
  CHECK_THROWS_AS(one_sd_effect(t, 0.0, pd_condition("x", {})), ConfigError);
}

TEST_CASE("delta-method SE matches a finite-difference gradient") {
  Eigen::Matrix2d v;
  v << 0.02, 0.004, 0.004, 0.03;
  const std::vector<double> beta{-0.2, 0.11};
  const auto t = table({"PD", "PD_x_RTA"}, beta, v);
  const auto cond = pd_condition("rta", {{"RTA", 0.7}});
  const double sd = 0.6;
  const auto e = one_sd_effect(t, sd, cond);

  auto effect_at = [&](double b0, double b1) { return percent(b0 + 0.7 * b1, sd); };
  const double h = 1e-6;
  Eigen::Vector2d g((effect_at(beta[0] + h, beta[1]) - effect_at(beta[0] - h, beta[1])) / (2 * h),
                    (effect_at(beta[0], beta[1] + h) - effect_at(beta[0], beta[1] - h)) / (2 * h));
  const double fd_se = std::sqrt(g.dot(v * g));
  CHECK(std::abs(e.se / fd_se - 1.0) < 1e-6);

  const auto p = logit_effect_pp(t, sd, cond, 0.3);
  auto pp_at = [&](double b0, double b1) {
    const double lam = std::log(0.3 / 0.7);
    return 100.0 * (1.0 / (1.0 + std::exp(-(lam + (b0 + 0.7 * b1) * sd))) - 0.3);
  };
  Eigen::Vector2d gp((pp_at(beta[0] + h, beta[1]) - pp_at(beta[0] - h, beta[1])) / (2 * h),
                     (pp_at(beta[0], beta[1] + h) - pp_at(beta[0], beta[1] - h)) / (2 * h));
  CHECK(std::abs(p.se / std::sqrt(gp.dot(v * gp)) - 1.0) < 1e-6);
}

TEST_CASE("percentage-point effects") {
  const auto base = pd_condition("baseline", {});
  CHECK(logit_effect_pp(pd_only(0.0, 0.01), 0.3, base, 0.4).effect == 0.0);

  const auto e = logit_effect_pp(pd_only(0.1, 0.01), 1.0, base, 0.5);
  CHECK(e.effect == doctest::Approx(100.0 * (1.0 / (1.0 + std::exp(-0.1)) - 0.5)).epsilon(1e-13));
  CHECK(e.effect == doctest::Approx(2.4979).epsilon(1e-4));
  CHECK(e.unit == "pp");

  const auto neg = logit_effect_pp(pd_only(-0.1, 0.01), 1.0, base, 0.5);
  CHECK(neg.effect == doctest::Approx(-e.effect).epsilon(1e-14));

  CHECK_THROWS_AS(logit_effect_pp(pd_only(0.1, 0.01), 1.0, base, 0.0), ConfigError);
  CHECK_THROWS_AS(logit_effect_pp(pd_only(0.1, 0.01), 1.0, base, 1.0), ConfigError);
}

TEST_CASE("effects rise with b and share its sign; intervals are ordered") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const auto base = pd_condition("baseline", {});
  for (int k = 0; k < 500; ++k) {
    const double a = u(rng), b = u(rng);
    const double sd = std::uniform_real_distribution<double>(0.05, 2.0)(rng);
    const double p = std::uniform_real_distribution<double>(0.01, 0.99)(rng);
    const auto ea = one_sd_effect(pd_only(a, 0.01), sd, base);
    const auto eb = one_sd_effect(pd_only(b, 0.01), sd, base);
    const auto la = logit_effect_pp(pd_only(a, 0.01), sd, base, p);
    const auto lb = logit_effect_pp(pd_only(b, 0.01), sd, base, p);
    if (a < b) {
      CHECK(ea.effect < eb.effect);
      CHECK(la.effect < lb.effect);
    }
    CHECK((ea.effect > 0) == (a > 0));
    CHECK((la.effect > 0) == (a > 0));
    CHECK(ea.ci_low <= ea.effect);
    CHECK(ea.effect <= ea.ci_high);
    CHECK(la.ci_low <= la.ci_high);
  }
}

TEST_CASE("logistic is stable at extremes") {
  CHECK(logistic(0.0) == 0.5);
  CHECK(logistic(800.0) == 1.0);
  CHECK(logistic(-800.0) >= 0.0);
  CHECK(logistic(-800.0) < 1e-300);
  CHECK(logistic(2.0) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-15));
}

TEST_CASE("regressor SD over international rows") {
  EstimationProblem p;
  p.y = Eigen::VectorXd::Ones(5);
  p.X.resize(5, 1);
  p.X << 1, 2, 3, 4, 100;
  p.names = {"PD"};
  p.domestic = {0, 0, 0, 0, 1};
  // Sample SD of 1, 2, 3, 4.
  CHECK(regressor_sd(p, "PD", {}) == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-14));
  const std::vector<std::size_t> rows{0, 1};
  CHECK(regressor_sd(p, "PD", rows) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
  CHECK_THROWS_AS(regressor_sd(p, "RTA", {}), ConfigError);
  const std::vector<std::size_t> single{0};
  CHECK_THROWS_AS(regressor_sd(p, "PD", single), DataError);
}

TEST_CASE("coefficient tables from fits") {
  LogitFit lf;
  lf.names = {"PD"};
  lf.corrected = Eigen::VectorXd::Constant(1, 0.3);
  lf.uncorrected = Eigen::VectorXd::Constant(1, 0.4);
  const auto t = CoefficientTable::from(lf);
  CHECK(t.estimates(0) == 0.3);
  CHECK(std::isnan(t.covariance(0, 0)));
  lf.bootstrap_covariance = Eigen::MatrixXd::Constant(1, 1, 0.01);
  CHECK(CoefficientTable::from(lf).covariance(0, 0) == 0.01);
}
