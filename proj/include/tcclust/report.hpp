#pragma once

#include <ostream>

#include <json.hpp>

#include "tcclust/dataset_io.hpp"
#include "tcclust/evaluation.hpp"

namespace tcc {

namespace detail {

inline nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

inline std::string opt_text(const std::optional<double>& v) { return v ? format_double(*v, 10) : "NA"; }

inline std::string labels_text(const std::vector<Label>& labels) {
  std::string s;
  for (std::size_t j = 0; j < labels.size(); ++j) s += (j ? "," : "") + std::to_string(labels[j]);
  return s.empty() ? "-" : s;
}

}  // namespace detail

// Which sections to serialize; `summarize` keeps only the summarization metrics and segments.
struct ReportOptions {
  bool entity_metrics = true;
  bool segment_dump = false;
};

// Flat "key value" lines; absent values print as NA.
inline void write_report_kv(const EvalReport& r, std::ostream& os, const ReportOptions& opt = {}) {
  using detail::opt_text;
  auto kv = [&](const std::string& k, const auto& v) { os << k << ' ' << v << '\n'; };
  kv("n_tracklets", r.n_tracklets);
  if (opt.entity_metrics) {
    kv("n_clusters", r.n_clusters);
    kv("n_significant_clusters", r.purity.n_significant);
    kv("n_mostly_junk_clusters", r.n_mostly_junk);
    kv("n_pure_clusters", r.purity.n_pure);
    kv("purity", opt_text(r.purity.purity));
    kv("entity_coverage", r.purity.entity_coverage);
    kv("tracklet_coverage", opt_text(r.purity.tracklet_coverage));
    kv("outlier_precision", opt_text(r.outliers.precision));
    kv("outlier_recall_star", r.outliers.recall_star);
    kv("outlier_rejected", r.outliers.n_rejected);
    kv("linking_fraction", opt_text(r.linking.all));
    kv("linking_fraction_excl_singletons", opt_text(r.linking.excl_singletons));
    kv("n_truth_tracks", r.linking.n_tracks);
  }
  kv("conciseness", opt_text(r.summary.conciseness));
  kv("representativeness", opt_text(r.summary.representativeness));
  kv("representativeness_x100",
     opt_text(r.summary.representativeness ? std::optional(*r.summary.representativeness * 100) : std::nullopt));
  kv("n_temporal_segments", r.shots.segments.size());
  kv("n_significant_segments", r.shots.n_significant_segments);
  kv("n_true_shots", r.shots.n_true_shots);
  kv("shot_coverage", r.shots.shot_coverage);
  kv("frame_coverage", opt_text(r.shots.frame_coverage));
  kv("shot_conciseness", opt_text(r.shots.shot_conciseness));
  kv("shot_representativeness", opt_text(r.shots.shot_representativeness));
  if (opt.entity_metrics)
    for (const auto& c : r.significant)
      os << "cluster " << c.k << ' ' << c.size << ' ' << (c.majority_label.empty() ? "-" : c.majority_label) << ' '
         << opt_text(c.purity_fraction) << ' ' << (c.is_pure ? "pure" : "impure") << '\n';
  if (opt.segment_dump)
    for (const auto& s : r.shots.segments)
      if (s.significant)
        os << "segment " << s.first_frame << ' ' << s.last_frame << ' ' << detail::labels_text(s.labels) << '\n';
}

inline nlohmann::json report_json(const EvalReport& r, const ReportOptions& opt = {}) {
  using detail::opt_json;
  nlohmann::json j;
  j["n_tracklets"] = r.n_tracklets;
  if (opt.entity_metrics) {
    j["n_clusters"] = r.n_clusters;
    j["n_mostly_junk_clusters"] = r.n_mostly_junk;
    j["purity"] = opt_json(r.purity.purity);
    j["n_significant_clusters"] = r.purity.n_significant;
    j["n_pure_clusters"] = r.purity.n_pure;
    j["entity_coverage"] = r.purity.entity_coverage;
    j["tracklet_coverage"] = r.purity.tracklet_coverage;
    j["outlier_precision"] = opt_json(r.outliers.precision);
    j["outlier_recall_star"] = r.outliers.recall_star;
    j["outlier_rejected"] = r.outliers.n_rejected;
    j["linking_fraction"] = opt_json(r.linking.all);
    j["linking_fraction_excl_singletons"] = opt_json(r.linking.excl_singletons);
    j["n_truth_tracks"] = r.linking.n_tracks;
    auto& clusters = j["significant_clusters"] = nlohmann::json::array();
    for (const auto& c : r.significant)
      clusters.push_back({{"k", c.k},
                          {"size", c.size},
                          {"majority_label", c.majority_label},
                          {"purity_fraction", c.purity_fraction},
                          {"is_pure", c.is_pure},
                          {"is_mostly_junk", c.is_mostly_junk}});
  }
  j["entity_summary"] = {{"conciseness", opt_json(r.summary.conciseness)},
                         {"representativeness", opt_json(r.summary.representativeness)},
                         {"representativeness_x100", r.summary.representativeness
                                                         ? nlohmann::json(*r.summary.representativeness * 100)
                                                         : nlohmann::json()}};
  j["shot_summary"] = {{"n_temporal_segments", r.shots.segments.size()},
                       {"n_significant_segments", r.shots.n_significant_segments},
                       {"n_true_shots", r.shots.n_true_shots},
                       {"shot_coverage", r.shots.shot_coverage},
                       {"frame_coverage", r.shots.frame_coverage},
                       {"shot_conciseness", opt_json(r.shots.shot_conciseness)},
                       {"shot_representativeness", opt_json(r.shots.shot_representativeness)}};
  if (opt.segment_dump) {
    auto& segs = j["significant_segments"] = nlohmann::json::array();
    for (const auto& s : r.shots.segments)
      if (s.significant) segs.push_back({{"first_frame", s.first_frame}, {"last_frame", s.last_frame}, {"labels", s.labels}});
  }
  return j;
}

}  // namespace tcc
