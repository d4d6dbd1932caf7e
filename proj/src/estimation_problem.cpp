#include "pdgrav/estimation_problem.hpp"

#include <string>
#include <unordered_map>

#include "pdgrav/errors.hpp"

namespace pdgrav {

void EstimationProblem::validate() const {
  const auto n = static_cast<std::size_t>(y.size());
  if (static_cast<std::size_t>(X.rows()) != n) throw DataError("design rows do not match outcome");
  if (static_cast<std::size_t>(X.cols()) != names.size()) {
    throw DataError("design columns do not match names");
  }
  for (const auto& dim : fe) {
    if (dim.ids.size() != n) throw DataError("fixed effect '" + dim.name + "' has wrong length");
    for (int id : dim.ids) {
      if (id < 0 || id >= dim.n_groups()) {
        throw DataError("fixed effect '" + dim.name + "' id out of range");
      }
    }
  }
  auto check = [&](const auto& v, const char* what) {
    if (!v.empty() && v.size() != n) throw DataError(std::string(what) + " has wrong length");
  };
  check(pair, "pair");
  check(cluster, "cluster");
  check(period, "period");
  check(domestic, "domestic");
  for (int p : pair) {
    if (p < 0 || static_cast<std::size_t>(p) >= pair_labels.size()) {
      throw DataError("pair id out of range");
    }
  }
}

std::vector<int> compact_ids(std::span<const int> ids, int* n_groups) {
  std::unordered_map<int, int> remap;
  std::vector<int> out(ids.size());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    auto [it, inserted] = remap.try_emplace(ids[k], static_cast<int>(remap.size()));
    out[k] = it->second;
  }
  if (n_groups) *n_groups = static_cast<int>(remap.size());
  return out;
}

EstimationProblem subset_rows(const EstimationProblem& problem, std::span<const std::size_t> keep) {
  EstimationProblem out;
  const auto n = static_cast<Eigen::Index>(keep.size());
  out.y.resize(n);
  out.X.resize(n, problem.X.cols());
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto r = static_cast<Eigen::Index>(keep[static_cast<std::size_t>(k)]);
    out.y(k) = problem.y(r);
    out.X.row(k) = problem.X.row(r);
  }
  out.names = problem.names;
  out.dropped_border_label = problem.dropped_border_label;

  auto pick = [&](const auto& v) {
    std::remove_cvref_t<decltype(v)> o;
    if (v.empty()) return o;
    o.reserve(keep.size());
    for (auto r : keep) o.push_back(v[r]);
    return o;
  };

  for (const auto& dim : problem.fe) {
    FixedEffectDim d;
    d.name = dim.name;
    const auto raw = pick(dim.ids);
    std::unordered_map<int, int> remap;
    d.ids.resize(raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k) {
      auto [it, inserted] = remap.try_emplace(raw[k], static_cast<int>(remap.size()));
      if (inserted) d.labels.push_back(dim.labels[static_cast<std::size_t>(raw[k])]);
      d.ids[k] = it->second;
    }
    out.fe.push_back(std::move(d));
  }

  if (!problem.pair.empty()) {
    const auto raw = pick(problem.pair);
    std::unordered_map<int, int> remap;
    out.pair.resize(raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k) {
      auto [it, inserted] = remap.try_emplace(raw[k], static_cast<int>(remap.size()));
      if (inserted) out.pair_labels.push_back(problem.pair_labels[static_cast<std::size_t>(raw[k])]);
      out.pair[k] = it->second;
    }
  }
  if (!problem.cluster.empty()) out.cluster = compact_ids(pick(problem.cluster));
  out.period = pick(problem.period);
  out.domestic = pick(problem.domestic);
  return out;
}

}  // namespace pdgrav
