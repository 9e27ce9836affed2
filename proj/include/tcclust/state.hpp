#pragma once

#include <span>
#include <sstream>

#include "tcclust/ppf.hpp"
#include "tcclust/types.hpp"

namespace tcc {

// Marks a tracklet that has been pulled out of the counts mid-move.
inline constexpr Label kUnassigned = -2;

inline ModelState make_empty_state(std::size_t n, std::size_t n_segments, bool with_segments) {
  ModelState state;
  state.z.assign(n, kUnassigned);
  state.c.assign(n, 1);
  if (with_segments) state.segments.emplace(n_segments);
  return state;
}

// Opens component `k` (a label reserved earlier) or, by default, the next free label.
inline Label open_component(ModelState& state, Vector phi, std::optional<Label> reserved = std::nullopt) {
  const Label k = reserved ? *reserved : state.next_label++;
  if (k >= state.next_label) state.next_label = k + 1;
  Component comp;
  comp.sum_y.assign(phi.size(), 0.0);
  comp.phi = std::move(phi);
  state.components.emplace(k, std::move(comp));
  return k;
}

// Adds tracklet i with (C, Z) = (c, k) to every count table.
inline void attach(ModelState& state, std::size_t i, Label k, bool c, std::span<const double> y,
                   std::size_t segment) {
  state.z[i] = k;
  state.c[i] = c ? 1 : 0;
  if (k < 1) return;
  auto it = state.components.find(k);
  if (it == state.components.end()) throw InvariantViolation("attach: unknown component");
  Component& comp = it->second;
  ++comp.n;
  if (c) ++comp.n_changepoints;
  for (std::size_t d = 0; d < y.size(); ++d) comp.sum_y[d] += y[d];
  if (state.segments) {
    SegmentTable& table = *state.segments;
    if (table.members[segment][k]++ == 0) ++table.seg_count[k];
    if (c) ++table.changepoints[segment][k];
  }
}

// Removes tracklet i from every count table; z[i] becomes kUnassigned.
inline void detach(ModelState& state, std::size_t i, std::span<const double> y,
                   std::size_t segment) {
  const Label k = state.z[i];
  const bool c = state.c[i] != 0;
  state.z[i] = kUnassigned;
  if (k < 1) return;
  auto it = state.components.find(k);
  if (it == state.components.end() || it->second.n == 0)
    throw InvariantViolation("detach: component count underflow");
  Component& comp = it->second;
  --comp.n;
  if (c) {
    if (comp.n_changepoints == 0) throw InvariantViolation("detach: changepoint count underflow");
    --comp.n_changepoints;
  }
  for (std::size_t d = 0; d < y.size(); ++d) comp.sum_y[d] -= y[d];
  if (comp.n == 0) std::fill(comp.sum_y.begin(), comp.sum_y.end(), 0.0);
  if (state.segments) {
    SegmentTable& table = *state.segments;
    auto m = table.members[segment].find(k);
    if (m == table.members[segment].end()) throw InvariantViolation("detach: segment member underflow");
    if (--m->second == 0) {
      table.members[segment].erase(m);
      if (--table.seg_count[k] == 0) table.seg_count.erase(k);
    }
    if (c) {
      auto cp = table.changepoints[segment].find(k);
      if (cp == table.changepoints[segment].end())
        throw InvariantViolation("detach: segment changepoint underflow");
      if (--cp->second == 0) table.changepoints[segment].erase(cp);
    }
  }
}

inline void collect_garbage(ModelState& state) {
  std::erase_if(state.components, [](const auto& kv) { return kv.second.n == 0; });
}

// Labels held by the conflict set of i, junk excluded.
inline LabelSet conflict_labels(const ModelState& state, const SequenceContext& context,
                                std::size_t i) {
  LabelSet out;
  for (std::size_t j : context.conflicts[i])
    if (state.z[j] >= 1) out.insert(state.z[j]);
  return out;
}

// Rebuilds every count from (z, c) and component means; used to audit incremental counts.
inline ModelState recount(const ModelState& state, const std::vector<TrackletRecord>& records,
                          const SequenceContext& context) {
  ModelState fresh = make_empty_state(state.size(), context.n_segments(), state.segments.has_value());
  fresh.next_label = state.next_label;
  for (const auto& [k, comp] : state.components) {
    Component c;
    c.phi = comp.phi;
    c.sum_y.assign(comp.phi.size(), 0.0);
    fresh.components.emplace(k, std::move(c));
  }
  for (std::size_t i = 0; i < state.size(); ++i)
    attach(fresh, i, state.z[i], state.c[i] != 0, records[i].features, context.segment_of[i]);
  return fresh;
}

// Throws InvariantViolation when incremental counts disagree with a from-scratch recount.
inline void verify_counts(const ModelState& state, const std::vector<TrackletRecord>& records,
                          const SequenceContext& context) {
  const ModelState fresh = recount(state, records, context);
  std::size_t total = 0;
  for (const auto& [k, comp] : state.components) {
    const Component& ref = fresh.components.at(k);
    if (comp.n != ref.n || comp.n_changepoints != ref.n_changepoints) {
      std::ostringstream os;
      os << "count mismatch for component " << k << ": n=" << comp.n << " (expected " << ref.n
         << "), n_zc=" << comp.n_changepoints << " (expected " << ref.n_changepoints << ")";
      throw InvariantViolation(os.str());
    }
    for (std::size_t d = 0; d < comp.sum_y.size(); ++d)
      if (std::abs(comp.sum_y[d] - ref.sum_y[d]) > 1e-6 * (1.0 + std::abs(ref.sum_y[d])))
        throw InvariantViolation("running sum drifted for component " + std::to_string(k));
    total += comp.n;
  }
  if (total + state.n_junk() != state.size()) throw InvariantViolation("component counts do not sum to N");
  if (state.segments) {
    const SegmentTable& a = *state.segments;
    const SegmentTable& b = *fresh.segments;
    if (a.members != b.members || a.changepoints != b.changepoints || a.seg_count != b.seg_count)
      throw InvariantViolation("segment table mismatch");
  }
}

struct ConstraintReport {
  std::size_t conflict_violations = 0;
  std::size_t copy_violations = 0;     // C_i = 0 but Z_i != Z_prev(i), or no predecessor
  std::size_t segment_violations = 0;  // C_i = 0 across a segment boundary (franchise mode)

  bool ok() const { return conflict_violations + copy_violations + segment_violations == 0; }
};

inline ConstraintReport check_constraints(const ModelState& state, const SequenceContext& context,
                                          bool check_segments) {
  ConstraintReport r;
  for (std::size_t i = 0; i < state.size(); ++i) {
    const Label k = state.z[i];
    if (k >= 1)
      for (std::size_t j : context.conflicts[i])
        if (j > i && state.z[j] == k) ++r.conflict_violations;
    if (state.c[i] == 0) {
      const auto p = context.prev[i];
      if (!p || state.z[*p] != k) ++r.copy_violations;
      else if (check_segments && context.segment_of[*p] != context.segment_of[i]) ++r.segment_violations;
    }
  }
  return r;
}

}  // namespace tcc
