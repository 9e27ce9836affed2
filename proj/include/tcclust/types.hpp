#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tcclust/error.hpp"

namespace tcc {

using Vector = std::vector<double>;

// Component labels: 0 is the junk sink, k >= 1 are entities.
using Label = int;
inline constexpr Label kJunk = 0;
inline constexpr Label kNewComponent = -1;

// Truth label reserved for false (non-entity) tracklets.
inline constexpr std::string_view kJunkTruthLabel = "junk";

enum class Mode { tccrp, tccrf, crp_baseline };

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::tccrp: return "tccrp";
    case Mode::tccrf: return "tccrf";
    case Mode::crp_baseline: return "crp-baseline";
  }
  return "?";
}

inline std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "tccrp") return Mode::tccrp;
  if (s == "tccrf") return Mode::tccrf;
  if (s == "crp-baseline" || s == "crp") return Mode::crp_baseline;
  return std::nullopt;
}

struct TrackletRecord {
  std::int64_t id = 0;
  Vector features;
  std::int64_t start_frame = 0;
  std::int64_t end_frame = 0;
  std::optional<std::array<double, 2>> spatial_center;
  // Overrides the derived predecessor distance when present.
  std::optional<double> prev_distance;
  std::optional<std::string> truth_label;

  std::int64_t length() const { return end_frame - start_frame + 1; }
  bool is_junk_truth() const { return truth_label && *truth_label == kJunkTruthLabel; }

  friend bool operator==(const TrackletRecord&, const TrackletRecord&) = default;
};

struct SequenceContext {
  std::vector<std::optional<std::size_t>> prev;
  std::vector<std::optional<std::size_t>> next;
  // Every j with prev(j) == i, ascending; next(i) is the first of them.
  std::vector<std::vector<std::size_t>> children;
  std::vector<std::vector<std::size_t>> conflicts;
  std::vector<std::size_t> changepoints;
  std::vector<std::size_t> segment_of;
  std::vector<double> prev_distance;

  std::size_t size() const { return prev.size(); }
  std::size_t n_segments() const { return segment_of.empty() ? 0 : segment_of.back() + 1; }
};

struct HyperParams {
  Vector mu;
  Vector sigma0;  // prior variance of component means, per dimension
  Vector sigma1;  // emission variance, per dimension
  double c = 5.0;  // junk variance is c * sigma1
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  double kappa1 = 0.001;
  double kappa2 = 0.1;
  double thres = 5.0;
  std::int64_t segment_gap = 100;
  double distance_pixel_weight = 0.1;
  std::size_t min_cluster_size = 10;
  double purity_threshold = 0.7;
  std::size_t min_segment_frames = 100;

  std::size_t dim() const { return mu.size(); }

  double junk_variance(std::size_t d) const { return c * sigma1[d]; }

  double kappa_for(double prev_distance) const {
    return prev_distance <= thres ? kappa1 : kappa2;
  }

  static HyperParams isotropic(std::size_t d, double mu, double var0, double var1) {
    HyperParams h;
    h.mu.assign(d, mu);
    h.sigma0.assign(d, var0);
    h.sigma1.assign(d, var1);
    return h;
  }

  // Generation tolerates the degenerate corners (kappa in {0, 1}, beta = 0, gamma = 0).
  void validate(bool allow_degenerate = false) const {
    require(!mu.empty(), "hyper: dimension must be >= 1");
    require(sigma0.size() == mu.size() && sigma1.size() == mu.size(),
            "hyper: mu, sigma0 and sigma1 must share one dimension");
    for (std::size_t d = 0; d < mu.size(); ++d) {
      require(std::isfinite(mu[d]), "hyper: mu must be finite");
      require(sigma0[d] > 0 && std::isfinite(sigma0[d]), "hyper: sigma0 entries must be > 0");
      require(sigma1[d] > 0 && std::isfinite(sigma1[d]), "hyper: sigma1 entries must be > 0");
    }
    require(c > 1.0, "hyper: c must be > 1");
    require(alpha > 0, "hyper: alpha must be > 0");
    if (allow_degenerate) {
      require(beta >= 0 && gamma >= 0, "hyper: beta, gamma must be >= 0");
      require(kappa1 >= 0 && kappa1 <= 1 && kappa2 >= 0 && kappa2 <= 1,
              "hyper: kappa1, kappa2 must lie in [0, 1]");
    } else {
      require(beta > 0 && gamma > 0, "hyper: beta, gamma must be > 0");
      require(kappa1 > 0 && kappa1 < 1 && kappa2 > 0 && kappa2 < 1,
              "hyper: kappa1, kappa2 must lie in (0, 1)");
    }
    require(kappa1 <= kappa2, "hyper: kappa1 must not exceed kappa2");
    require(thres > 0, "hyper: thres must be > 0");
    require(segment_gap > 0, "hyper: segment_gap must be > 0");
    require(distance_pixel_weight >= 0, "hyper: distance_pixel_weight must be >= 0");
    require(purity_threshold > 0 && purity_threshold <= 1, "hyper: purity_threshold must lie in (0, 1]");
  }
};

struct Component {
  Vector phi;
  Vector sum_y;
  std::size_t n = 0;               // assigned tracklets
  std::size_t n_changepoints = 0;  // assigned tracklets with C = 1
};

// Per-segment bookkeeping for the franchise model. B_s is the key set of members[s].
struct SegmentTable {
  std::vector<std::map<Label, std::size_t>> members;
  std::vector<std::map<Label, std::size_t>> changepoints;
  std::map<Label, std::size_t> seg_count;  // segments in which k is active

  explicit SegmentTable(std::size_t n_segments = 0)
      : members(n_segments), changepoints(n_segments) {}

  bool active(std::size_t s, Label k) const { return members[s].count(k) > 0; }

  std::size_t changepoint_count(std::size_t s, Label k) const {
    auto it = changepoints[s].find(k);
    return it == changepoints[s].end() ? 0 : it->second;
  }

  std::size_t segments_using(Label k) const {
    auto it = seg_count.find(k);
    return it == seg_count.end() ? 0 : it->second;
  }
};

struct ModelState {
  std::vector<Label> z;
  std::vector<std::uint8_t> c;
  std::map<Label, Component> components;
  std::optional<SegmentTable> segments;
  Label next_label = 1;

  std::size_t size() const { return z.size(); }

  std::size_t n_junk() const {
    std::size_t n = 0;
    for (Label k : z) n += (k == kJunk);
    return n;
  }

  std::size_t n_active_components() const {
    std::size_t n = 0;
    for (const auto& [k, comp] : components) n += (comp.n > 0);
    return n;
  }
};

class Categorical {
 public:
  struct Entry {
    Label label;
    double weight;
  };

  Categorical() = default;
  explicit Categorical(std::vector<Entry> support) : support_(std::move(support)) {}

  void add(Label label, double weight) { support_.push_back({label, weight}); }

  const std::vector<Entry>& support() const { return support_; }

  double total() const {
    double t = 0;
    for (const auto& e : support_) t += e.weight;
    return t;
  }

  // Unnormalized weight of a label; 0 when absent.
  double weight(Label label) const {
    for (const auto& e : support_)
      if (e.label == label) return e.weight;
    return 0.0;
  }

  double probability(Label label) const { return weight(label) / total(); }

  bool contains(Label label) const {
    for (const auto& e : support_)
      if (e.label == label) return true;
    return false;
  }

  Categorical normalized() const {
    const double t = total();
    if (!(t > 0) || !std::isfinite(t)) throw ContractViolation("categorical: no positive finite mass");
    Categorical out;
    for (const auto& e : support_) out.add(e.label, e.weight / t);
    return out;
  }

 private:
  std::vector<Entry> support_;
};

}  // namespace tcc
