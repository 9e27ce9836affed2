#pragma once

#include <map>
#include <set>

#include "tcclust/types.hpp"

namespace tcc {

using LabelSet = std::set<Label>;

// Vanilla CRP: existing k weighted by its count, a fresh component by alpha.
inline Categorical crp_predictive(const std::map<Label, std::size_t>& counts, double alpha) {
  require(alpha > 0, "crp_predictive: alpha must be > 0");
  Categorical out;
  for (const auto& [k, n] : counts)
    if (n > 0) out.add(k, static_cast<double>(n));
  out.add(kNewComponent, alpha);
  return out;
}

// Temporally coherent CRP, for a draw with C_i = 1.
//   conflicting k (k != 0) -> 0
//   junk                   -> beta
//   existing k             -> number of its members with C = 1
//   new component          -> alpha
inline Categorical tccrp_predictive(const ModelState& state, const LabelSet& conflict_labels,
                                    const HyperParams& hyper) {
  Categorical out;
  out.add(kJunk, hyper.beta);
  for (const auto& [k, comp] : state.components) {
    if (comp.n == 0) continue;
    const bool masked = conflict_labels.count(k) > 0;
    out.add(k, masked ? 0.0 : static_cast<double>(comp.n_changepoints));
  }
  out.add(kNewComponent, hyper.alpha);
  return out;
}

// Weight a component receives in segment s from the franchise rule when it has no
// changepoint members there: alpha times the number of *other* segments using it.
inline double cross_segment_weight(const SegmentTable& table, std::size_t segment, Label k,
                                   double alpha) {
  std::size_t elsewhere = table.segments_using(k);
  if (table.active(segment, k) && elsewhere > 0) --elsewhere;
  return alpha * static_cast<double>(elsewhere);
}

// Temporally coherent franchise predictive for a draw with C_i = 1 in `segment`.
//   conflicting k                           -> 0
//   junk                                    -> beta
//   k with changepoint members in segment   -> their count
//   k used only in other segments           -> alpha * (segments using k)
//   brand-new component                     -> alpha * gamma
inline Categorical tccrf_predictive(const ModelState& state, std::size_t segment,
                                    const LabelSet& conflict_labels, const HyperParams& hyper) {
  require(state.segments.has_value(), "tccrf_predictive: state has no segment table");
  const SegmentTable& table = *state.segments;
  require(segment < table.members.size(), "tccrf_predictive: segment out of range");
  Categorical out;
  out.add(kJunk, hyper.beta);
  for (const auto& [k, comp] : state.components) {
    if (comp.n == 0) continue;
    double w = 0.0;
    if (conflict_labels.count(k) == 0) {
      const std::size_t local = table.changepoint_count(segment, k);
      w = local > 0 ? static_cast<double>(local)
                    : cross_segment_weight(table, segment, k, hyper.alpha);
    }
    out.add(k, w);
  }
  out.add(kNewComponent, hyper.alpha * hyper.gamma);
  return out;
}

}  // namespace tcc
