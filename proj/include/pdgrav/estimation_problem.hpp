#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pdgrav {

// A categorical fixed-effect dimension. ids[r] in [0, labels.size()).
struct FixedEffectDim {
  std::string name;
  std::vector<int> ids;
  std::vector<std::string> labels;

  int n_groups() const { return static_cast<int>(labels.size()); }
};

// Estimator input: outcome, regressors, fixed-effect labels and the panel
// structure needed for clustering, pair drops and time splits.
struct EstimationProblem {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
  std::vector<std::string> names;
  std::vector<FixedEffectDim> fe;

  // Directed-pair id per row; also the default cluster.
  std::vector<int> pair;
  std::vector<std::string> pair_labels;
  std::vector<int> cluster;
  // Consecutive period index per row.
  std::vector<int> period;
  // 1 for domestic (i == j) rows.
  std::vector<char> domestic;

  // Reference level of the border-period dimension (first period).
  std::string dropped_border_label;

  Eigen::Index n_rows() const { return y.size(); }

  // Throws DataError on shape mismatches or out-of-range ids.
  void validate() const;
};

// Rows `keep` of `problem`, in that order. Group ids are compacted so every
// label in the result is used.
EstimationProblem subset_rows(const EstimationProblem& problem, std::span<const std::size_t> keep);

// Compacts label ids to 0..k-1 in order of first appearance.
std::vector<int> compact_ids(std::span<const int> ids, int* n_groups = nullptr);

}  // namespace pdgrav
