#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <span>

#include "tcclust/types.hpp"

namespace tcc {

inline bool record_order(const TrackletRecord& a, const TrackletRecord& b) {
  if (a.start_frame != b.start_frame) return a.start_frame < b.start_frame;
  if (a.end_frame != b.end_frame) return a.end_frame < b.end_frame;
  return a.id < b.id;
}

inline bool is_sorted_records(std::span<const TrackletRecord> records) {
  return std::is_sorted(records.begin(), records.end(), record_order);
}

// Frame gap plus weighted centre displacement (pixels) when both centres exist.
inline double predecessor_distance(const TrackletRecord& prev, const TrackletRecord& cur,
                                   double pixel_weight) {
  double d = static_cast<double>(cur.start_frame - prev.end_frame);
  if (prev.spatial_center && cur.spatial_center) {
    const double dx = (*cur.spatial_center)[0] - (*prev.spatial_center)[0];
    const double dy = (*cur.spatial_center)[1] - (*prev.spatial_center)[1];
    d += pixel_weight * std::hypot(dx, dy);
  }
  return d;
}

// Derives prev/next, conflict sets, changepoints and segment indices.
// prev(i) is the highest-index j whose span ends strictly before i starts, so prev(i) never
// conflicts with i.
inline SequenceContext build_context(std::span<const TrackletRecord> records, const HyperParams& hyper) {
  require(is_sorted_records(records), "build_context: records must be sorted by (start, end, id)");
  const std::size_t n = records.size();
  SequenceContext ctx;
  ctx.prev.assign(n, std::nullopt);
  ctx.next.assign(n, std::nullopt);
  ctx.children.assign(n, {});
  ctx.conflicts.assign(n, {});
  ctx.segment_of.assign(n, 0);
  ctx.prev_distance.assign(n, std::numeric_limits<double>::infinity());

  using Open = std::pair<std::int64_t, std::size_t>;  // (end_frame, index)
  std::priority_queue<Open, std::vector<Open>, std::greater<>> open;
  std::optional<std::size_t> latest_closed;

  for (std::size_t i = 0; i < n; ++i) {
    const auto& rec = records[i];
    require(rec.start_frame >= 0 && rec.start_frame <= rec.end_frame,
            "build_context: invalid frame span for tracklet " + std::to_string(rec.id));
    while (!open.empty() && open.top().first < rec.start_frame) {
      const std::size_t j = open.top().second;
      open.pop();
      if (!latest_closed || j > *latest_closed) latest_closed = j;
    }
    if (latest_closed) {
      const std::size_t p = *latest_closed;
      ctx.prev[i] = p;
      ctx.children[p].push_back(i);
      ctx.prev_distance[i] = rec.prev_distance.value_or(
          predecessor_distance(records[p], rec, hyper.distance_pixel_weight));
    }
    for (std::size_t j = i + 1; j < n && records[j].start_frame <= rec.end_frame; ++j) {
      ctx.conflicts[i].push_back(j);
      ctx.conflicts[j].push_back(i);
    }
    open.emplace(rec.end_frame, i);
    if (i > 0) {
      const bool cut = rec.start_frame - records[i - 1].start_frame > hyper.segment_gap;
      if (cut) ctx.changepoints.push_back(i);
      ctx.segment_of[i] = ctx.segment_of[i - 1] + (cut ? 1 : 0);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::sort(ctx.conflicts[i].begin(), ctx.conflicts[i].end());
    if (!ctx.children[i].empty()) ctx.next[i] = ctx.children[i].front();
  }
  return ctx;
}

struct Detection {
  std::int64_t frame = 0;
  // Bounding box: top-left corner plus size, pixels.
  double x = 0, y = 0, width = 0, height = 0;
  Vector features;

  std::array<double, 2> center() const { return {x + 0.5 * width, y + 0.5 * height}; }
};

struct AggregationOptions {
  std::size_t tracklet_length = 10;
  // Linking radius as a fraction of the earlier box's width.
  double locality = 0.5;
};

// Links detections frame to frame by box-centre proximity and cuts every chain into
// consecutive blocks of R detections; the leftover tail of each chain is dropped.
inline std::vector<TrackletRecord> aggregate_detections(std::span<const Detection> detections,
                                                        const AggregationOptions& opts = {}) {
  require(opts.tracklet_length >= 1, "aggregate_detections: R must be >= 1");
  for (std::size_t i = 1; i < detections.size(); ++i)
    if (detections[i].frame < detections[i - 1].frame)
      throw DataError("aggregate_detections: detections not sorted by frame (index " +
                      std::to_string(i) + ")");

  std::vector<std::vector<std::size_t>> chains;
  std::vector<std::size_t> live;  // chain indices whose last detection is in the previous frame
  std::size_t pos = 0;
  while (pos < detections.size()) {
    const std::int64_t frame = detections[pos].frame;
    std::size_t end = pos;
    while (end < detections.size() && detections[end].frame == frame) ++end;

    std::vector<std::size_t> next_live;
    std::vector<bool> taken(end - pos, false);
    for (std::size_t ci : live) {
      const Detection& last = detections[chains[ci].back()];
      if (last.frame != frame - 1) continue;
      const auto lc = last.center();
      const double radius = opts.locality * last.width;
      std::optional<std::size_t> best;
      double best_dist = std::numeric_limits<double>::infinity();
      for (std::size_t j = pos; j < end; ++j) {
        if (taken[j - pos]) continue;
        const auto c = detections[j].center();
        const double dist = std::hypot(c[0] - lc[0], c[1] - lc[1]);
        if (dist <= radius && dist < best_dist) {
          best = j;
          best_dist = dist;
        }
      }
      if (best) {
        taken[*best - pos] = true;
        chains[ci].push_back(*best);
        next_live.push_back(ci);
      }
    }
    for (std::size_t j = pos; j < end; ++j) {
      if (taken[j - pos]) continue;
      chains.push_back({j});
      next_live.push_back(chains.size() - 1);
    }
    live = std::move(next_live);
    pos = end;
  }

  const std::size_t R = opts.tracklet_length;
  std::vector<TrackletRecord> out;
  for (const auto& chain : chains) {
    for (std::size_t b = 0; b + R <= chain.size(); b += R) {
      TrackletRecord rec;
      const Detection& first = detections[chain[b]];
      rec.start_frame = first.frame;
      rec.end_frame = detections[chain[b + R - 1]].frame;
      rec.features.assign(first.features.size(), 0.0);
      std::array<double, 2> center{0.0, 0.0};
      for (std::size_t t = b; t < b + R; ++t) {
        const Detection& det = detections[chain[t]];
        require(det.features.size() == rec.features.size(), "aggregate_detections: dimension mismatch");
        for (std::size_t d = 0; d < det.features.size(); ++d) rec.features[d] += det.features[d];
        const auto c = det.center();
        center[0] += c[0];
        center[1] += c[1];
      }
      for (double& v : rec.features) v /= static_cast<double>(R);
      center[0] /= static_cast<double>(R);
      center[1] /= static_cast<double>(R);
      rec.spatial_center = center;
      out.push_back(std::move(rec));
    }
  }
  std::stable_sort(out.begin(), out.end(), record_order);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<std::int64_t>(i);
  return out;
}

}  // namespace tcc
