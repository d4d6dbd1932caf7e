#include "pdgrav/absorb.hpp"

#include <algorithm>
#include <cmath>

#include "pdgrav/errors.hpp"

namespace pdgrav {

FixedEffectAbsorber::FixedEffectAbsorber(std::vector<FixedEffectDim> dims, AbsorbOptions options)
    : dims_(std::move(dims)), options_(options) {
  scratch_.resize(dims_.size());
  for (std::size_t d = 0; d < dims_.size(); ++d) scratch_[d].resize(dims_[d].n_groups());
}

void FixedEffectAbsorber::set_weights(const Eigen::VectorXd& weights) {
  weights_ = weights;
  group_weight_.assign(dims_.size(), Eigen::VectorXd());
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    const auto& ids = dims_[d].ids;
    if (ids.size() != static_cast<std::size_t>(weights.size())) {
      throw DataError("fixed effect '" + dims_[d].name + "' does not match the weight vector");
    }
    Eigen::VectorXd gw = Eigen::VectorXd::Zero(dims_[d].n_groups());
    for (std::size_t r = 0; r < ids.size(); ++r) gw(ids[r]) += weights(static_cast<Eigen::Index>(r));
    group_weight_[d] = std::move(gw);
  }
}

void FixedEffectAbsorber::sweep(Eigen::Ref<Eigen::VectorXd> v) const {
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    const auto& ids = dims_[d].ids;
    Eigen::VectorXd& sums = scratch_[d];
    sums.setZero();
    for (std::size_t r = 0; r < ids.size(); ++r) {
      const auto i = static_cast<Eigen::Index>(r);
      sums(ids[r]) += weights_(i) * v(i);
    }
    const Eigen::VectorXd& gw = group_weight_[d];
    for (Eigen::Index g = 0; g < sums.size(); ++g) sums(g) = gw(g) > 0.0 ? sums(g) / gw(g) : 0.0;
    for (std::size_t r = 0; r < ids.size(); ++r) v(static_cast<Eigen::Index>(r)) -= sums(ids[r]);
  }
}

AbsorbStats FixedEffectAbsorber::absorb(Eigen::Ref<Eigen::VectorXd> v) const {
  AbsorbStats stats;
  if (dims_.empty()) return stats;
  if (weights_.size() != v.size()) throw DataError("absorber weights not set for this length");

  const double tol = options_.tolerance * std::max(1.0, v.cwiseAbs().maxCoeff());
  Eigen::VectorXd gx(v.size()), ggx(v.size());

  while (stats.sweeps < options_.max_sweeps) {
    gx = v;
    sweep(gx);
    ++stats.sweeps;
    stats.last_change = (gx - v).cwiseAbs().maxCoeff();
    if (stats.last_change <= tol) {
      v = gx;
      return stats;
    }
    if (!options_.accelerate) {
      v = gx;
      continue;
    }

    ggx = gx;
    sweep(ggx);
    ++stats.sweeps;
    stats.last_change = (ggx - gx).cwiseAbs().maxCoeff();
    if (stats.last_change <= tol) {
      v = ggx;
      return stats;
    }

    // Irons-Tuck: extrapolate along the last two differences. Any affine
    // combination of iterates stays in v + span(dummies), so the limit is
    // unchanged.
    const Eigen::VectorXd delta_gx = ggx - gx;
    const Eigen::VectorXd delta2 = ggx - 2.0 * gx + v;
    const double denom = delta2.squaredNorm();
    if (denom > 0.0) {
      const double coef = delta_gx.dot(delta2) / denom;
      v = ggx - coef * delta_gx;
    } else {
      v = ggx;
    }
  }
  stats.converged = false;
  return stats;
}

AbsorbStats FixedEffectAbsorber::absorb(Eigen::MatrixXd& m) const {
  AbsorbStats total;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const AbsorbStats s = absorb(m.col(c));
    total.sweeps = std::max(total.sweeps, s.sweeps);
    total.last_change = std::max(total.last_change, s.last_change);
    total.converged = total.converged && s.converged;
  }
  return total;
}

}  // namespace pdgrav
