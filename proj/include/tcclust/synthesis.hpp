#pragma once

#include <algorithm>
#include <random>
#include <set>

#include "tcclust/context.hpp"
#include "tcclust/dataset_io.hpp"
#include "tcclust/gaussian.hpp"
#include "tcclust/ppf.hpp"
#include "tcclust/state.hpp"

namespace tcc {

using Rng = std::mt19937_64;

// Where and when tracklets appear. Tracklets come in chains of spatio-temporally adjacent
// tracklets (geometric length); chains are separated by short frame gaps and a jump of the
// spatial centre. Segments are separated by gaps wider than the segment threshold.
struct FrameLayout {
  std::size_t tracklet_length = 10;
  double mean_chain_length = 8.0;
  double overlap_rate = 0.05;  // chance of injecting a frame-overlapping tracklet after each one
  std::int64_t max_chain_gap = 30;
  std::int64_t max_intra_gap = 1;
  double frame_width = 640.0;
  double frame_height = 360.0;
  double jitter = 2.0;  // pixels per step within a chain
};

struct SynthesisPlan {
  std::size_t n_tracklets = 1000;
  std::size_t dim = 2;
  std::uint64_t seed = 1;
  FrameLayout layout;
  std::size_t n_segments = 1;
  // 0: unbounded component supply (CRP). K > 0: a fixed pool of K atoms drawn up front and
  // seated with the symmetric finite-Dirichlet predictive n_zc + alpha / K.
  std::size_t n_entities = 0;
  // Minimum Euclidean distance between atoms, enforced by redrawing (0 disables).
  double min_separation = 0.0;

  void validate(const HyperParams& hyper) const {
    require(n_tracklets >= 1, "plan: n_tracklets must be >= 1");
    require(dim >= 1 && dim == hyper.dim(), "plan: dim must be >= 1 and match the hyperparameters");
    require(layout.overlap_rate >= 0 && layout.overlap_rate <= 1, "plan: overlap_rate must lie in [0, 1]");
    require(layout.tracklet_length >= 1, "plan: tracklet_length must be >= 1");
    require(layout.mean_chain_length >= 1, "plan: mean_chain_length must be >= 1");
    require(layout.max_chain_gap >= 1 && layout.max_intra_gap >= 0, "plan: frame gaps out of range");
    require(n_segments >= 1 && n_segments <= n_tracklets, "plan: n_segments must lie in [1, n_tracklets]");
    require(hyper.segment_gap > static_cast<std::int64_t>(layout.tracklet_length) + layout.max_chain_gap +
                                   layout.max_intra_gap,
            "plan: segment_gap must exceed tracklet_length + max_chain_gap + max_intra_gap");
    require(min_separation >= 0, "plan: min_separation must be >= 0");
  }
};

struct GeneratedData {
  Dataset dataset;
  SequenceContext context;
  ModelState truth;
  // Franchise generation only: the IBP activation row drawn for each segment.
  std::vector<std::set<Label>> active_rows;
};

inline std::string truth_label_for(Label k) {
  return k == kJunk ? std::string(kJunkTruthLabel) : "e" + std::to_string(k);
}

// Frame spans and centres only; features are filled in by the generative process.
inline std::vector<TrackletRecord> synthesize_layout(const SynthesisPlan& plan, const HyperParams& hyper,
                                                     Rng& rng) {
  const auto& L = plan.layout;
  const auto R = static_cast<std::int64_t>(L.tracklet_length);
  std::uniform_real_distribution<double> ux(0.0, L.frame_width), uy(0.0, L.frame_height);
  std::geometric_distribution<int> chain_len(1.0 / L.mean_chain_length);
  std::uniform_int_distribution<std::int64_t> chain_gap(1, L.max_chain_gap);
  std::uniform_int_distribution<std::int64_t> intra_gap(0, L.max_intra_gap);
  std::uniform_int_distribution<std::int64_t> seg_extra(1, hyper.segment_gap);
  std::uniform_int_distribution<std::int64_t> overlap_shift(1, std::max<std::int64_t>(1, R - 1));
  std::bernoulli_distribution overlap(L.overlap_rate);
  std::normal_distribution<double> step(0.0, L.jitter);

  const std::size_t N = plan.n_tracklets;
  std::vector<std::size_t> boundaries;  // tracklet counts at which a new segment opens
  for (std::size_t s = 1; s < plan.n_segments; ++s) boundaries.push_back(N * s / plan.n_segments);
  std::size_t next_boundary = 0;

  std::vector<TrackletRecord> out;
  out.reserve(N);
  std::int64_t frame = 0;
  auto emit = [&](std::int64_t start, std::array<double, 2> center) {
    TrackletRecord r;
    r.start_frame = start;
    r.end_frame = start + R - 1;
    r.spatial_center = center;
    out.push_back(std::move(r));
  };

  while (out.size() < N) {
    if (next_boundary < boundaries.size() && out.size() >= boundaries[next_boundary]) {
      frame += hyper.segment_gap + seg_extra(rng);
      ++next_boundary;
    } else if (!out.empty()) {
      frame += chain_gap(rng);
    }
    const std::size_t limit = next_boundary < boundaries.size() ? boundaries[next_boundary] : N;
    std::array<double, 2> center{ux(rng), uy(rng)};
    const int length = 1 + chain_len(rng);
    for (int t = 0; t < length && out.size() < limit; ++t) {
      const std::int64_t start = frame;
      emit(start, center);
      if (R > 1 && out.size() < limit && overlap(rng)) emit(start + overlap_shift(rng), {ux(rng), uy(rng)});
      center[0] += step(rng);
      center[1] += step(rng);
      frame = start + R + intra_gap(rng);
    }
  }
  std::stable_sort(out.begin(), out.end(), record_order);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<std::int64_t>(i);
  return out;
}

struct IbpRow {
  std::vector<Label> existing;  // previously seen components switched on
  std::size_t n_new = 0;        // brand-new components switched on
};

// One row of the Indian buffet process. With s prior rows, the new row is customer s + 1:
// a component used in m earlier rows is switched on with probability m / (s + 1) and
// Poisson(gamma / (s + 1)) new components appear.
inline IbpRow sample_ibp_row(const std::map<Label, std::size_t>& seg_count, std::size_t n_prior_rows,
                             double gamma, Rng& rng) {
  require(gamma >= 0, "sample_ibp_row: gamma must be >= 0");
  const double customer = static_cast<double>(n_prior_rows + 1);
  IbpRow row;
  for (const auto& [k, m] : seg_count) {
    require(m <= n_prior_rows, "sample_ibp_row: usage count exceeds number of prior rows");
    std::bernoulli_distribution on(static_cast<double>(m) / customer);
    if (on(rng)) row.existing.push_back(k);
  }
  if (gamma > 0) {
    std::poisson_distribution<std::size_t> fresh(gamma / customer);
    row.n_new = fresh(rng);
  }
  return row;
}

namespace detail {

inline Label draw(const Categorical& dist, Rng& rng) {
  const double total = dist.total();
  if (!(total > 0)) throw InvariantViolation("draw: no mass to sample from");
  std::uniform_real_distribution<double> u(0.0, total);
  double x = u(rng);
  const auto& sup = dist.support();
  for (const auto& e : sup) {
    if (e.weight <= 0) continue;
    if (x < e.weight) return e.label;
    x -= e.weight;
  }
  for (auto it = sup.rbegin(); it != sup.rend(); ++it)
    if (it->weight > 0) return it->label;
  throw InvariantViolation("draw: unreachable");
}

// Draws an atom from the base measure, redrawing until it keeps its distance from `others`.
inline Vector draw_atom(const HyperParams& hyper, const std::map<Label, Component>& others,
                        double min_separation, Rng& rng) {
  Vector phi;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    phi = sample_gaussian(hyper.mu, hyper.sigma0, rng);
    bool ok = true;
    for (const auto& [k, comp] : others) {
      double d2 = 0;
      for (std::size_t d = 0; d < phi.size(); ++d) d2 += (phi[d] - comp.phi[d]) * (phi[d] - comp.phi[d]);
      if (d2 < min_separation * min_separation) {
        ok = false;
        break;
      }
    }
    if (ok) break;
  }
  return phi;
}

inline Vector emit_features(Label k, const ModelState& state, const HyperParams& hyper, Rng& rng) {
  Vector y;
  if (k == kJunk) {
    Vector var(hyper.dim());
    for (std::size_t d = 0; d < var.size(); ++d) var[d] = hyper.junk_variance(d);
    y = sample_gaussian(hyper.mu, var, rng);
  } else {
    y = sample_gaussian(state.components.at(k).phi, hyper.sigma1, rng);
  }
  quantize_features(y);
  return y;
}

inline LabelSet past_conflict_labels(const ModelState& state, const SequenceContext& ctx, std::size_t i) {
  LabelSet out;
  for (std::size_t j : ctx.conflicts[i]) {
    if (j >= i) break;
    if (state.z[j] >= 1) out.insert(state.z[j]);
  }
  return out;
}

inline void finish(GeneratedData& g, const SynthesisPlan& plan) {
  collect_garbage(g.truth);
  for (std::size_t i = 0; i < g.dataset.records.size(); ++i)
    g.dataset.records[i].truth_label = truth_label_for(g.truth.z[i]);
  g.dataset.dim = plan.dim;
  g.dataset.tracklet_length = plan.layout.tracklet_length;
  g.dataset.frames = g.dataset.records.empty() ? 0 : g.dataset.records.back().end_frame + 1;
  for (const auto& r : g.dataset.records) g.dataset.frames = std::max(g.dataset.frames, r.end_frame + 1);
}

}  // namespace detail

// Forward sampler for the temporally coherent CRP. Returns the dataset, its derived context and
// the realised (Z, C, phi) as truth.
inline GeneratedData generate_tccrp(const SynthesisPlan& plan, const HyperParams& hyper) {
  hyper.validate(true);
  plan.validate(hyper);
  Rng rng(plan.seed);
  GeneratedData g;
  g.dataset.records = synthesize_layout(plan, hyper, rng);
  g.context = build_context(g.dataset.records, hyper);
  const std::size_t N = g.dataset.records.size();
  g.truth = make_empty_state(N, g.context.n_segments(), false);
  ModelState& st = g.truth;

  const std::size_t K = plan.n_entities;
  for (std::size_t k = 0; k < K; ++k)
    open_component(st, detail::draw_atom(hyper, st.components, plan.min_separation, rng));

  for (std::size_t i = 0; i < N; ++i) {
    const auto p = g.context.prev[i];
    bool change = true;
    if (p) {
      std::bernoulli_distribution flip(hyper.kappa_for(g.context.prev_distance[i]));
      change = flip(rng);
    }
    const LabelSet conflicts = detail::past_conflict_labels(st, g.context, i);
    Label k = p ? st.z[*p] : kJunk;
    if (!change && k >= 1 && conflicts.count(k)) change = true;  // copying would break a conflict

    if (change) {
      Categorical dist;
      if (K == 0) {
        dist = tccrp_predictive(st, conflicts, hyper);
      } else {
        dist.add(kJunk, hyper.beta);
        for (const auto& [label, comp] : st.components)
          dist.add(label, conflicts.count(label)
                              ? 0.0
                              : static_cast<double>(comp.n_changepoints) + hyper.alpha / static_cast<double>(K));
      }
      if (!(dist.total() > 0)) dist = Categorical({{kJunk, 1.0}});
      k = detail::draw(dist, rng);
      if (k == kNewComponent) k = open_component(st, detail::draw_atom(hyper, st.components, plan.min_separation, rng));
    }
    const Vector y = detail::emit_features(k, st, hyper, rng);
    g.dataset.records[i].features = y;
    attach(st, i, k, change, y, g.context.segment_of[i]);
  }
  detail::finish(g, plan);
  return g;
}

// Forward sampler for the temporally coherent franchise: IBP activation rows per segment, then
// per-tracklet draws restricted to the segment's active components. Within a segment a
// component already seated at a changepoint gets weight n_szc; the CRP mass alpha is shared by
// the active components not yet seated in the segment.
inline GeneratedData generate_tccrf(const SynthesisPlan& plan, const HyperParams& hyper) {
  hyper.validate(true);
  plan.validate(hyper);
  Rng rng(plan.seed);
  GeneratedData g;
  g.dataset.records = synthesize_layout(plan, hyper, rng);
  g.context = build_context(g.dataset.records, hyper);
  const std::size_t N = g.dataset.records.size();
  const std::size_t M = g.context.n_segments();
  g.truth = make_empty_state(N, M, true);
  ModelState& st = g.truth;

  std::map<Label, std::size_t> row_count;
  for (std::size_t s = 0; s < M; ++s) {
    IbpRow row = sample_ibp_row(row_count, s, hyper.gamma, rng);
    std::set<Label> active(row.existing.begin(), row.existing.end());
    for (std::size_t t = 0; t < row.n_new; ++t) active.insert(st.next_label++);
    for (Label k : active) ++row_count[k];
    g.active_rows.push_back(std::move(active));
  }

  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t s = g.context.segment_of[i];
    const auto p = g.context.prev[i];
    bool change = true;
    if (p && g.context.segment_of[*p] == s) {
      std::bernoulli_distribution flip(hyper.kappa_for(g.context.prev_distance[i]));
      change = flip(rng);
    }
    const LabelSet conflicts = detail::past_conflict_labels(st, g.context, i);
    Label k = p ? st.z[*p] : kJunk;
    if (!change && k >= 1 && conflicts.count(k)) change = true;

    if (change) {
      Categorical dist;
      dist.add(kJunk, hyper.beta);
      std::vector<Label> unseated;
      for (Label a : g.active_rows[s]) {
        if (conflicts.count(a)) continue;
        const std::size_t local = st.segments->changepoint_count(s, a);
        if (local > 0) dist.add(a, static_cast<double>(local));
        else unseated.push_back(a);
      }
      for (Label a : unseated) dist.add(a, hyper.alpha / static_cast<double>(unseated.size()));
      if (!(dist.total() > 0)) dist = Categorical({{kJunk, 1.0}});
      k = detail::draw(dist, rng);
      if (k >= 1 && !st.components.count(k))
        open_component(st, detail::draw_atom(hyper, st.components, plan.min_separation, rng), k);
    }
    const Vector y = detail::emit_features(k, st, hyper, rng);
    g.dataset.records[i].features = y;
    attach(st, i, k, change, y, s);
  }
  detail::finish(g, plan);
  return g;
}

}  // namespace tcc
