#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pdgrav/estimation_problem.hpp"

namespace pdgrav {

struct AbsorbOptions {
  // Stop when a full sweep changes no element by more than
  // tolerance * max(1, |v|_inf of the input).
  double tolerance = 1e-11;
  int max_sweeps = 100000;
  // Irons-Tuck extrapolation every third sweep.
  bool accelerate = true;
};

struct AbsorbStats {
  int sweeps = 0;
  double last_change = 0.0;
  bool converged = true;
};

// Weighted within-transformation over several fixed-effect dimensions by
// alternating projections: each sweep subtracts the weighted group mean of
// every dimension in turn. The result is the residual of a weighted least
// squares projection onto all group dummies.
class FixedEffectAbsorber {
 public:
  explicit FixedEffectAbsorber(std::vector<FixedEffectDim> dims, AbsorbOptions options = {});

  void set_weights(const Eigen::VectorXd& weights);

  // Replaces v with its residual. Starting from a vector that differs from the
  // target only by a fixed-effect component yields the same residual, which
  // lets IRLS warm-start from the previous iteration.
  AbsorbStats absorb(Eigen::Ref<Eigen::VectorXd> v) const;
  AbsorbStats absorb(Eigen::MatrixXd& m) const;

  const std::vector<FixedEffectDim>& dims() const { return dims_; }
  const AbsorbOptions& options() const { return options_; }

 private:
  void sweep(Eigen::Ref<Eigen::VectorXd> v) const;

  std::vector<FixedEffectDim> dims_;
  AbsorbOptions options_;
  Eigen::VectorXd weights_;
  std::vector<Eigen::VectorXd> group_weight_;  // per dimension
  mutable std::vector<Eigen::VectorXd> scratch_;
};

}  // namespace pdgrav
