#pragma once

// Helpers shared by the test binaries.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pdgrav/estimation_problem.hpp"
#include "pdgrav/panel_builder.hpp"
#include "pdgrav/synth.hpp"

namespace testing {

inline const std::vector<std::string>& four_terms() {
  static const std::vector<std::string> t = {"PD", "RTA", "GATTWTO_2", "PD_x_GATTWTO_2"};
  return t;
}

inline std::map<std::string, double> four_betas() {
  return {{"PD", -0.1}, {"RTA", 0.3}, {"GATTWTO_2", 0.2}, {"PD_x_GATTWTO_2", 0.05}};
}

// Synthetic panel to estimation problem through the panel builder with all
// four fixed-effect dimensions.
inline pdgrav::EstimationProblem problem_from(const pdgrav::GravityPanel& panel,
                                              const std::vector<std::string>& terms,
                                              pdgrav::Outcome outcome = pdgrav::Outcome::kValue) {
  pdgrav::DesignOptions o;
  o.collapse_gattwto1 = true;
  o.terms = terms;
  const auto design = pdgrav::build_interactions(panel, o);
  return pdgrav::make_problem(panel, design, outcome);
}

// Largest |sum_g (y - mu)| / sum_g mu over every group of every dimension.
inline double foc_violation(const pdgrav::EstimationProblem& p, const std::vector<std::size_t>& sample,
                            const Eigen::VectorXd& mu) {
  double worst = 0.0;
  for (const auto& dim : p.fe) {
    std::map<int, std::pair<double, double>> sums;
    for (std::size_t k = 0; k < sample.size(); ++k) {
      auto& s = sums[dim.ids[sample[k]]];
      s.first += p.y(static_cast<Eigen::Index>(sample[k])) - mu(static_cast<Eigen::Index>(k));
      s.second += mu(static_cast<Eigen::Index>(k));
    }
    for (const auto& [g, s] : sums) worst = std::max(worst, std::abs(s.first) / s.second);
  }
  return worst;
}

}  // namespace testing
