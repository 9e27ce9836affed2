#pragma once

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "tcclust/types.hpp"

namespace tcc {

struct ClusterSummary {
  Label k = 0;
  std::size_t size = 0;
  std::string majority_label;  // most frequent entity label; empty if every member is junk
  std::size_t majority_count = 0;
  double purity_fraction = 0.0;
  std::size_t junk_count = 0;
  bool is_pure = false;
  bool is_mostly_junk = false;
};

// Truth labels in tracklet order; kJunkTruthLabel marks false tracklets.
using TruthLabels = std::vector<std::string>;

inline TruthLabels truth_labels_of(const std::vector<TrackletRecord>& records) {
  TruthLabels out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (!r.truth_label) throw DataError("evaluation: tracklet id " + std::to_string(r.id) + " has no truth label");
    out.push_back(*r.truth_label);
  }
  return out;
}

namespace detail {
inline bool at_least(std::size_t part, std::size_t whole, double fraction) {
  return static_cast<double>(part) >= fraction * static_cast<double>(whole) - 1e-12;
}
}  // namespace detail

// Every cluster k >= 1 with at least min_cluster_size members, ordered by label. Mostly-junk
// clusters are kept in the list but flagged; use `significant_only` to drop them.
inline std::vector<ClusterSummary> summarize_clusters(std::span<const Label> z, const TruthLabels& truth,
                                                      const HyperParams& hyper) {
  require(z.size() == truth.size(), "evaluation: assignment and truth lengths differ");
  std::map<Label, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < z.size(); ++i)
    if (z[i] >= 1) members[z[i]].push_back(i);
  std::vector<ClusterSummary> out;
  for (const auto& [k, idx] : members) {
    if (idx.size() < hyper.min_cluster_size) continue;
    ClusterSummary cs;
    cs.k = k;
    cs.size = idx.size();
    std::map<std::string, std::size_t> votes;
    for (std::size_t i : idx) {
      if (truth[i] == kJunkTruthLabel) ++cs.junk_count;
      else ++votes[truth[i]];
    }
    for (const auto& [label, count] : votes)
      if (count > cs.majority_count) {
        cs.majority_count = count;
        cs.majority_label = label;
      }
    cs.purity_fraction = static_cast<double>(cs.majority_count) / static_cast<double>(cs.size);
    cs.is_pure = cs.majority_count > 0 && detail::at_least(cs.majority_count, cs.size, hyper.purity_threshold);
    cs.is_mostly_junk = detail::at_least(cs.junk_count, cs.size, hyper.purity_threshold);
    out.push_back(std::move(cs));
  }
  return out;
}

inline std::vector<ClusterSummary> significant_clusters(std::span<const Label> z, const TruthLabels& truth,
                                                        const HyperParams& hyper) {
  auto all = summarize_clusters(z, truth, hyper);
  std::erase_if(all, [](const ClusterSummary& c) { return c.is_mostly_junk; });
  return all;
}

struct PurityCoverage {
  std::optional<double> purity;  // absent with zero significant clusters
  std::size_t n_significant = 0;
  std::size_t n_pure = 0;
  std::size_t entity_coverage = 0;
  double tracklet_coverage = 0.0;
};

inline PurityCoverage purity_and_coverage(const std::vector<ClusterSummary>& clusters, std::size_t n_tracklets) {
  require(n_tracklets >= 1, "purity_and_coverage: need at least one tracklet");
  PurityCoverage r;
  r.n_significant = clusters.size();
  std::set<std::string> entities;
  std::size_t covered = 0;
  for (const auto& c : clusters) {
    if (!c.is_pure) continue;
    ++r.n_pure;
    entities.insert(c.majority_label);
    covered += c.size;
  }
  if (r.n_significant > 0) r.purity = static_cast<double>(r.n_pure) / static_cast<double>(r.n_significant);
  r.entity_coverage = entities.size();
  r.tracklet_coverage = static_cast<double>(covered) / static_cast<double>(n_tracklets);
  return r;
}

struct OutlierMetrics {
  std::optional<double> precision;
  std::size_t recall_star = 0;
  std::size_t n_rejected = 0;
};

inline OutlierMetrics outlier_metrics(std::span<const Label> z, const TruthLabels& truth) {
  require(z.size() == truth.size(), "outlier_metrics: assignment and truth lengths differ");
  OutlierMetrics m;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i] != kJunk) continue;
    ++m.n_rejected;
    if (truth[i] == kJunkTruthLabel) ++m.recall_star;
  }
  if (m.n_rejected > 0) m.precision = static_cast<double>(m.recall_star) / static_cast<double>(m.n_rejected);
  return m;
}

// Ground-truth tracks: tracklets joined to their predecessor when both carry the same entity
// label and the predecessor is close. Junk tracklets form no tracks.
inline std::vector<std::vector<std::size_t>> truth_tracks(const TruthLabels& truth, const SequenceContext& ctx,
                                                          const HyperParams& hyper) {
  require(truth.size() == ctx.size(), "truth_tracks: truth and context lengths differ");
  const std::size_t n = truth.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = ctx.prev[i];
    if (!p || truth[i] == kJunkTruthLabel || truth[*p] != truth[i]) continue;
    if (ctx.prev_distance[i] > hyper.thres) continue;
    parent[find(i)] = find(*p);
  }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i)
    if (truth[i] != kJunkTruthLabel) groups[find(i)].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [root, g] : groups) out.push_back(std::move(g));
  return out;
}

struct LinkingFraction {
  std::optional<double> all;              // every track, singletons count as linked
  std::optional<double> excl_singletons;  // tracks with at least two tracklets
  std::size_t n_tracks = 0;
  std::size_t n_multi = 0;
};

inline LinkingFraction linking_fraction(std::span<const Label> z, const std::vector<std::vector<std::size_t>>& tracks) {
  LinkingFraction r;
  std::size_t linked = 0, linked_multi = 0;
  for (const auto& t : tracks) {
    if (t.empty()) continue;
    const bool whole = std::all_of(t.begin(), t.end(), [&](std::size_t i) { return z[i] == z[t.front()]; });
    ++r.n_tracks;
    linked += whole;
    if (t.size() > 1) {
      ++r.n_multi;
      linked_multi += whole;
    }
  }
  if (r.n_tracks) r.all = static_cast<double>(linked) / static_cast<double>(r.n_tracks);
  if (r.n_multi) r.excl_singletons = static_cast<double>(linked_multi) / static_cast<double>(r.n_multi);
  return r;
}

struct Summarization {
  std::optional<double> conciseness;
  std::optional<double> representativeness;
};

inline Summarization summarization_metrics(std::size_t entity_coverage, double tracklet_coverage,
                                           std::size_t n_significant) {
  Summarization s;
  if (n_significant == 0) return s;
  const double m = static_cast<double>(n_significant);
  s.conciseness = static_cast<double>(entity_coverage) / m;
  s.representativeness = tracklet_coverage / m;
  return s;
}

struct TemporalSegment {
  std::int64_t first_frame = 0;
  std::int64_t last_frame = 0;
  std::vector<Label> labels;  // sorted cluster labels present on every frame of the segment
  bool significant = false;

  std::int64_t length() const { return last_frame - first_frame + 1; }
};

// Cuts [first_frame, last_frame] wherever the set of labels present on a frame changes.
// Label 0 is ignored.
inline std::vector<TemporalSegment> temporal_segments(std::span<const Label> z,
                                                      const std::vector<TrackletRecord>& records,
                                                      std::int64_t first_frame, std::int64_t last_frame,
                                                      std::size_t min_segment_frames) {
  require(z.size() == records.size(), "temporal_segments: assignment and record counts differ");
  require(first_frame <= last_frame, "temporal_segments: empty frame range");
  // (frame, +1/-1, label) events; removals land on end + 1.
  std::map<std::int64_t, std::vector<std::pair<int, Label>>> events;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i] < 1) continue;
    const std::int64_t a = std::max(first_frame, records[i].start_frame);
    const std::int64_t b = std::min(last_frame, records[i].end_frame);
    if (a > b) continue;
    events[a].push_back({+1, z[i]});
    events[b + 1].push_back({-1, z[i]});
  }
  std::map<Label, std::size_t> live;
  auto current = [&] {
    std::vector<Label> v;
    for (const auto& [k, n] : live) v.push_back(k);
    return v;
  };
  std::vector<TemporalSegment> out;
  TemporalSegment seg{first_frame, first_frame, {}, false};
  auto it = events.begin();
  auto apply_until = [&](std::int64_t f) {
    while (it != events.end() && it->first <= f) {
      for (const auto& [delta, k] : it->second) {
        if (delta > 0) ++live[k];
        else if (--live[k] == 0) live.erase(k);
      }
      ++it;
    }
  };
  apply_until(first_frame);
  seg.labels = current();
  std::int64_t f = first_frame;
  while (true) {
    // next frame at which the set may change
    const std::int64_t next = it == events.end() ? last_frame + 1 : std::min(it->first, last_frame + 1);
    f = next;
    if (f > last_frame) break;
    apply_until(f);
    auto labels = current();
    if (labels != seg.labels) {
      seg.last_frame = f - 1;
      out.push_back(seg);
      seg = TemporalSegment{f, f, std::move(labels), false};
    }
  }
  seg.last_frame = last_frame;
  out.push_back(seg);
  for (auto& s : out)
    s.significant = !s.labels.empty() && s.length() >= static_cast<std::int64_t>(min_segment_frames);
  return out;
}

struct ShotMetrics {
  std::vector<TemporalSegment> segments;
  std::size_t n_significant_segments = 0;
  std::size_t n_true_shots = 0;
  std::size_t shot_coverage = 0;
  double frame_coverage = 0.0;
  std::optional<double> shot_conciseness;
  std::optional<double> shot_representativeness;
};

// Shot-based summary quality. True shots are cut from the truth labels by the same rule;
// a true shot is covered when some significant segment lies inside it.
inline ShotMetrics shot_segmentation(std::span<const Label> z, const std::vector<TrackletRecord>& records,
                                     const TruthLabels& truth, std::int64_t first_frame, std::int64_t last_frame,
                                     const HyperParams& hyper) {
  ShotMetrics m;
  m.segments = temporal_segments(z, records, first_frame, last_frame, hyper.min_segment_frames);
  std::int64_t covered = 0;
  for (const auto& s : m.segments)
    if (s.significant) {
      ++m.n_significant_segments;
      covered += s.length();
    }
  m.frame_coverage = static_cast<double>(covered) / static_cast<double>(last_frame - first_frame + 1);

  if (!truth.empty()) {
    require(truth.size() == records.size(), "shot_segmentation: truth and record counts differ");
    std::map<std::string, Label> ids;
    std::vector<Label> tz(truth.size(), kJunk);
    for (std::size_t i = 0; i < truth.size(); ++i)
      if (truth[i] != kJunkTruthLabel) tz[i] = ids.emplace(truth[i], static_cast<Label>(ids.size() + 1)).first->second;
    const auto shots = temporal_segments(tz, records, first_frame, last_frame, 1);
    for (const auto& shot : shots) {
      if (shot.labels.empty()) continue;
      ++m.n_true_shots;
      const bool hit = std::any_of(m.segments.begin(), m.segments.end(), [&](const TemporalSegment& s) {
        return s.significant && s.first_frame >= shot.first_frame && s.last_frame <= shot.last_frame;
      });
      m.shot_coverage += hit;
    }
  }
  if (m.n_significant_segments > 0) {
    const double n = static_cast<double>(m.n_significant_segments);
    m.shot_conciseness = static_cast<double>(m.shot_coverage) / n;
    m.shot_representativeness = m.frame_coverage / n;
  }
  return m;
}

struct EvalReport {
  std::size_t n_tracklets = 0;
  std::size_t n_clusters = 0;  // non-empty entity clusters, any size
  std::vector<ClusterSummary> significant;
  std::size_t n_mostly_junk = 0;
  PurityCoverage purity;
  OutlierMetrics outliers;
  LinkingFraction linking;
  Summarization summary;
  ShotMetrics shots;
};

inline EvalReport evaluate(std::span<const Label> z, const std::vector<TrackletRecord>& records,
                           const SequenceContext& ctx, const TruthLabels& truth, const HyperParams& hyper,
                           std::optional<std::pair<std::int64_t, std::int64_t>> frame_range = std::nullopt) {
  require(z.size() == records.size() && truth.size() == records.size(), "evaluate: length mismatch");
  require(!records.empty(), "evaluate: empty dataset");
  EvalReport r;
  r.n_tracklets = z.size();
  r.n_clusters = std::set<Label>(z.begin(), z.end()).size() - (std::count(z.begin(), z.end(), kJunk) > 0);
  const auto all = summarize_clusters(z, truth, hyper);
  for (const auto& c : all) {
    if (c.is_mostly_junk) ++r.n_mostly_junk;
    else r.significant.push_back(c);
  }
  r.purity = purity_and_coverage(r.significant, z.size());
  r.outliers = outlier_metrics(z, truth);
  r.linking = linking_fraction(z, truth_tracks(truth, ctx, hyper));
  r.summary = summarization_metrics(r.purity.entity_coverage, r.purity.tracklet_coverage, r.purity.n_significant);
  std::int64_t lo = records.front().start_frame, hi = records.front().end_frame;
  for (const auto& rec : records) {
    lo = std::min(lo, rec.start_frame);
    hi = std::max(hi, rec.end_frame);
  }
  if (frame_range) std::tie(lo, hi) = *frame_range;
  r.shots = shot_segmentation(z, records, truth, lo, hi, hyper);
  return r;
}

}  // namespace tcc
