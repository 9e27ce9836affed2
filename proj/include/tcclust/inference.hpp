#pragma once

#include <algorithm>
#include <chrono>
#include <functional>
#include <random>
#include <thread>

#include "tcclust/context.hpp"
#include "tcclust/dataset_io.hpp"
#include "tcclust/gaussian.hpp"
#include "tcclust/ppf.hpp"
#include "tcclust/state.hpp"

namespace tcc {

using Rng = std::mt19937_64;

struct FitConfig {
  std::size_t n_sweeps = 200;
  std::size_t burn_in = 50;
  std::uint64_t seed = 1;
  Mode mode = Mode::tccrp;
  bool online = false;
  std::size_t online_samples_per_point = 15;
  bool hyper_update_enabled = false;
  // Recount and constraint-check after every sweep; throws InvariantViolation on drift.
  bool audit = false;
  bool record_timing = false;
  HyperParams hyper;

  void validate() const {
    hyper.validate();
    require(n_sweeps >= 1, "fit: n_sweeps must be >= 1");
    require(burn_in < n_sweeps, "fit: burn_in must be < n_sweeps");
    require(online_samples_per_point >= 1, "fit: online_samples_per_point must be >= 1");
  }
};

struct Atom {
  Label k;
  std::size_t n;
  Vector phi;
};

struct FitResult {
  ModelState state;
  HyperParams hyper;  // after any hyperparameter updates
  std::vector<double> trace;
  std::vector<double> sweep_seconds;  // empty unless timing was requested
  std::vector<Atom> atoms() const {
    std::vector<Atom> out;
    for (const auto& [k, comp] : state.components)
      if (comp.n > 0) out.push_back({k, comp.n, comp.phi});
    return out;
  }
};

// One admissible value of (C_i, Z_i) with its unnormalized log weight.
struct Candidate {
  bool c;
  Label k;  // kNewComponent for a fresh component
  double log_weight;
};

namespace detail {

inline bool uses_segments(Mode m) { return m == Mode::tccrf; }

inline double log_or_neg_inf(double x) {
  return x > 0 ? std::log(x) : -std::numeric_limits<double>::infinity();
}

// Prior seating mass for a C = 1 draw onto existing component k, counts taken over j != i.
// When k has no changepoint member left (only reachable while i is pinned by a child
// copying its label) the seat costs what opening k afresh would.
inline double seat_weight(const ModelState& state, Label k, std::size_t segment, Mode mode,
                          const HyperParams& hyper) {
  const Component& comp = state.components.at(k);
  switch (mode) {
    case Mode::crp_baseline:
      return comp.n > 0 ? static_cast<double>(comp.n) : hyper.alpha;
    case Mode::tccrp:
      return comp.n_changepoints > 0 ? static_cast<double>(comp.n_changepoints) : hyper.alpha;
    case Mode::tccrf: {
      const SegmentTable& table = *state.segments;
      const std::size_t local = table.changepoint_count(segment, k);
      if (local > 0) return static_cast<double>(local);
      const double elsewhere = cross_segment_weight(table, segment, k, hyper.alpha);
      return elsewhere > 0 ? elsewhere : hyper.alpha * hyper.gamma;
    }
  }
  return 0.0;
}

inline double new_weight(Mode mode, const HyperParams& hyper) {
  return mode == Mode::tccrf ? hyper.alpha * hyper.gamma : hyper.alpha;
}

}  // namespace detail

// Whether C_i is free to be 0 under the model: i needs a predecessor, and in franchise mode
// that predecessor must sit in the same segment.
inline bool may_copy(std::size_t i, const SequenceContext& ctx, Mode mode) {
  if (mode == Mode::crp_baseline) return false;
  const auto p = ctx.prev[i];
  if (!p) return false;
  return !detail::uses_segments(mode) || ctx.segment_of[*p] == ctx.segment_of[i];
}

// Label i is forced to keep because some successor copies it (C_j = 0, prev(j) = i).
inline std::optional<Label> pinned_label(const ModelState& state, const SequenceContext& ctx, std::size_t i) {
  for (std::size_t j : ctx.children[i])
    if (state.c[j] == 0 && state.z[j] != kUnassigned) return state.z[j];
  return std::nullopt;
}

// Enumerates the admissible (C_i, Z_i) for a detached tracklet i. Log weights are
// p(C_i) * p(Z_i | Z_-i, C_i) * p(Y_i | Z_i); a fresh component uses the prior predictive.
inline std::vector<Candidate> blocked_candidates(const ModelState& state, std::size_t i,
                                                 std::span<const double> y, const SequenceContext& ctx,
                                                 const HyperParams& hyper, Mode mode,
                                                 std::optional<Label> pin) {
  std::vector<Candidate> out;
  const std::size_t s = ctx.segment_of[i];
  const bool baseline = mode == Mode::crp_baseline;
  const LabelSet conflicts = baseline ? LabelSet{} : conflict_labels(state, ctx, i);
  const bool copy_ok = may_copy(i, ctx, mode);
  const double kappa = copy_ok ? hyper.kappa_for(ctx.prev_distance[i]) : 1.0;
  const double log_change = std::log(kappa);

  auto loglik = [&](Label k) {
    return k == kJunk ? log_junk_likelihood(y, hyper) : log_gaussian(y, state.components.at(k).phi, hyper.sigma1);
  };
  auto allowed = [&](Label k) { return (!pin || *pin == k) && (k == kJunk || !conflicts.count(k)); };

  if (copy_ok) {
    const Label kp = state.z[*ctx.prev[i]];
    if (kp != kUnassigned && allowed(kp)) out.push_back({false, kp, std::log1p(-kappa) + loglik(kp)});
  }
  if (!baseline && allowed(kJunk)) out.push_back({true, kJunk, log_change + std::log(hyper.beta) + loglik(kJunk)});
  for (const auto& [k, comp] : state.components) {
    if (!allowed(k)) continue;
    if (comp.n == 0 && pin != k) continue;
    const double w = detail::seat_weight(state, k, s, mode, hyper);
    out.push_back({true, k, log_change + std::log(w) + loglik(k)});
  }
  if (!pin)
    out.push_back({true, kNewComponent,
                   log_change + std::log(detail::new_weight(mode, hyper)) + marginal_likelihood_new(y, hyper)});
  return out;
}

inline std::size_t sample_log_weights(const std::vector<Candidate>& cands, Rng& rng) {
  if (cands.empty()) throw InvariantViolation("blocked move: no admissible (C, Z) value");
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& c : cands) hi = std::max(hi, c.log_weight);
  if (!std::isfinite(hi)) throw InvariantViolation("blocked move: every candidate has zero weight");
  std::vector<double> w(cands.size());
  double total = 0;
  for (std::size_t j = 0; j < cands.size(); ++j) total += (w[j] = std::exp(cands[j].log_weight - hi));
  std::uniform_real_distribution<double> u(0.0, total);
  double x = u(rng);
  for (std::size_t j = 0; j < cands.size(); ++j) {
    if (x < w[j]) return j;
    x -= w[j];
  }
  return cands.size() - 1;
}

// Seats i at the chosen candidate, opening a fresh component whose mean is drawn from its
// one-point posterior (or set to the posterior mean when `mean_only`).
inline void apply_candidate(ModelState& state, std::size_t i, std::span<const double> y,
                            const Candidate& cand, std::size_t segment, const HyperParams& hyper, Rng& rng,
                            bool mean_only = false) {
  Label k = cand.k;
  if (k == kNewComponent) {
    const Vector sum(y.begin(), y.end());
    const GaussianPosterior post = component_posterior(1, sum, hyper);
    k = open_component(state, mean_only ? post.mean : sample_gaussian(post.mean, post.var, rng));
  }
  attach(state, i, k, cand.c, y, segment);
}

// Jointly resamples (C_i, Z_i) given everything else. Used for every mode; in franchise mode
// seating on a component absent from the segment is the joint (B_sk = 1, Z_i = k) move and
// B_sk switches off when the segment loses its last k member.
inline void blocked_resample_cz(ModelState& state, std::size_t i, const std::vector<TrackletRecord>& records,
                                const SequenceContext& ctx, const HyperParams& hyper, Mode mode, Rng& rng) {
  const auto& y = records[i].features;
  const std::size_t s = ctx.segment_of[i];
  if (state.z[i] != kUnassigned) detach(state, i, y, s);
  const auto pin = mode == Mode::crp_baseline ? std::nullopt : pinned_label(state, ctx, i);
  const auto cands = blocked_candidates(state, i, y, ctx, hyper, mode, pin);
  apply_candidate(state, i, y, cands[sample_log_weights(cands, rng)], s, hyper, rng);
}

inline void tccrf_resample_bz(ModelState& state, std::size_t i, const std::vector<TrackletRecord>& records,
                              const SequenceContext& ctx, const HyperParams& hyper, Rng& rng) {
  require(state.segments.has_value(), "tccrf_resample_bz: state has no segment table");
  blocked_resample_cz(state, i, records, ctx, hyper, Mode::tccrf, rng);
}

// Draws phi_k from its conjugate posterior given the assigned tracklets.
inline void resample_component(ModelState& state, Label k, const HyperParams& hyper, Rng& rng) {
  Component& comp = state.components.at(k);
  const GaussianPosterior post = component_posterior(comp.n, comp.sum_y, hyper);
  comp.phi = sample_gaussian(post.mean, post.var, rng);
}

// mu <- mean of the active atoms, sigma0 <- their per-dimension population variance (floored).
inline HyperParams update_hyperparameters(const ModelState& state, HyperParams hyper) {
  constexpr double kFloor = 1e-6;
  std::vector<const Vector*> phis;
  for (const auto& [k, comp] : state.components)
    if (comp.n > 0) phis.push_back(&comp.phi);
  if (phis.size() < 2) return hyper;
  const double m = static_cast<double>(phis.size());
  for (std::size_t d = 0; d < hyper.dim(); ++d) {
    double mean = 0;
    for (const Vector* p : phis) mean += (*p)[d];
    mean /= m;
    double var = 0;
    for (const Vector* p : phis) var += ((*p)[d] - mean) * ((*p)[d] - mean);
    hyper.mu[d] = mean;
    hyper.sigma0[d] = std::max(var / m, kFloor);
  }
  return hyper;
}

// Unnormalized log p(C, Z, phi, Y) scored from scratch out of (z, c, phi) alone; independent
// of the incremental counts the sampler keeps.
inline double joint_log_probability(const ModelState& state, const std::vector<TrackletRecord>& records,
                                    const SequenceContext& ctx, const HyperParams& hyper, Mode mode) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  const std::size_t n = state.size();
  double lp = 0.0;
  std::map<Label, std::size_t> n_all, n_cp;
  std::map<std::pair<std::size_t, Label>, std::size_t> n_seg_cp;
  std::size_t junk_draws = 0;

  for (std::size_t i = 0; i < n; ++i) {
    const Label k = state.z[i];
    const bool c = state.c[i] != 0;
    if (k < 0) return kNegInf;
    if (k >= 1 && !state.components.count(k)) return kNegInf;
    if (mode == Mode::crp_baseline) {
      if (k == kJunk || !c) return kNegInf;
      ++n_all[k];
      continue;
    }
    if (k >= 1)
      for (std::size_t j : ctx.conflicts[i])
        if (state.z[j] == k) return kNegInf;
    if (may_copy(i, ctx, mode)) {
      const double kappa = hyper.kappa_for(ctx.prev_distance[i]);
      lp += c ? std::log(kappa) : std::log1p(-kappa);
    } else if (!c) {
      return kNegInf;
    }
    if (!c) {
      if (state.z[*ctx.prev[i]] != k) return kNegInf;
      if (k >= 1) ++n_all[k];
      continue;
    }
    if (k == kJunk) {
      ++junk_draws;
      continue;
    }
    ++n_all[k];
    ++n_cp[k];
    ++n_seg_cp[{ctx.segment_of[i], k}];
  }

  const double log_alpha = std::log(hyper.alpha);
  if (mode == Mode::crp_baseline) {
    for (const auto& [k, m] : n_all) lp += log_alpha + std::lgamma(static_cast<double>(m));
  } else {
    lp += static_cast<double>(junk_draws) * detail::log_or_neg_inf(hyper.beta);
    for (const auto& [k, m] : n_all)
      if (!n_cp.count(k)) return kNegInf;  // members but nobody ever drew it
    if (mode == Mode::tccrp) {
      for (const auto& [k, m] : n_cp) lp += log_alpha + std::lgamma(static_cast<double>(m));
    } else {
      std::map<Label, std::size_t> segments_with;
      for (const auto& [key, m] : n_seg_cp) {
        lp += log_alpha + std::lgamma(static_cast<double>(m));
        ++segments_with[key.second];
      }
      for (const auto& [k, m] : segments_with) lp += std::log(hyper.gamma) + std::lgamma(static_cast<double>(m));
    }
  }

  for (const auto& [k, comp] : state.components)
    if (n_all.count(k)) lp += log_gaussian(comp.phi, hyper.mu, hyper.sigma0);
  for (std::size_t i = 0; i < n; ++i) {
    const Label k = state.z[i];
    lp += k == kJunk ? log_junk_likelihood(records[i].features, hyper)
                     : log_gaussian(records[i].features, state.components.at(k).phi, hyper.sigma1);
  }
  return lp;
}

// Called after every sweep with (sweep index, state); lets tests audit every sampled state.
using SweepObserver = std::function<void(std::size_t, const ModelState&)>;

namespace detail {

inline void check_inputs(const std::vector<TrackletRecord>& records, const SequenceContext& ctx,
                         const HyperParams& hyper) {
  if (records.empty()) throw DataError("fit: empty dataset");
  if (ctx.size() != records.size()) throw DataError("fit: context does not match the dataset");
  for (const auto& r : records)
    if (r.features.size() != hyper.dim())
      throw DataError("fit: dimension mismatch at tracklet id " + std::to_string(r.id) + " (expected " +
                      std::to_string(hyper.dim()) + ", got " + std::to_string(r.features.size()) + ")");
}

inline void audit_state(const ModelState& state, const std::vector<TrackletRecord>& records,
                        const SequenceContext& ctx, Mode mode) {
  verify_counts(state, records, ctx);
  if (mode == Mode::crp_baseline) return;
  const ConstraintReport r = check_constraints(state, ctx, uses_segments(mode));
  if (!r.ok())
    throw InvariantViolation("constraint violated: conflicts=" + std::to_string(r.conflict_violations) +
                             " copies=" + std::to_string(r.copy_violations) +
                             " segments=" + std::to_string(r.segment_violations));
}

// Rebuilds running sums from scratch so floating-point drift cannot accumulate.
inline void refresh_sums(ModelState& state, const std::vector<TrackletRecord>& records) {
  for (auto& [k, comp] : state.components) std::fill(comp.sum_y.begin(), comp.sum_y.end(), 0.0);
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (state.z[i] < 1) continue;
    Vector& sum = state.components.at(state.z[i]).sum_y;
    for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += records[i].features[d];
  }
}

}  // namespace detail

// Collapsed blocked Gibbs sampler. Starts from a sequential pass of the same blocked move over
// an empty state, then runs n_sweeps full sweeps. During the seeding pass each touched atom sits
// at its posterior mean; a single draw from a one-point posterior lands far from the entity in
// high dimension and the pass would then seed duplicates that sweeps merge only slowly.
inline FitResult fit(const std::vector<TrackletRecord>& records, const SequenceContext& ctx,
                     const FitConfig& config, const SweepObserver& observer = {}) {
  config.validate();
  detail::check_inputs(records, ctx, config.hyper);
  const Mode mode = config.mode;
  Rng rng(config.seed);
  FitResult result;
  result.hyper = config.hyper;
  HyperParams& hyper = result.hyper;
  const std::size_t n = records.size();
  ModelState& state = result.state;
  state = make_empty_state(n, ctx.n_segments(), detail::uses_segments(mode));

  for (std::size_t i = 0; i < n; ++i) {
    blocked_resample_cz(state, i, records, ctx, hyper, mode, rng);
    if (const Label k = state.z[i]; k >= 1) {
      Component& comp = state.components.at(k);
      comp.phi = component_posterior(comp.n, comp.sum_y, hyper).mean;
    }
  }
  collect_garbage(state);

  for (std::size_t sweep = 0; sweep < config.n_sweeps; ++sweep) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < n; ++i) blocked_resample_cz(state, i, records, ctx, hyper, mode, rng);
    collect_garbage(state);
    detail::refresh_sums(state, records);
    for (auto& [k, comp] : state.components) resample_component(state, k, hyper, rng);
    if (config.hyper_update_enabled && sweep >= config.burn_in) hyper = update_hyperparameters(state, hyper);
    if (config.audit) detail::audit_state(state, records, ctx, mode);
    result.trace.push_back(joint_log_probability(state, records, ctx, hyper, mode));
    if (config.record_timing)
      result.sweep_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    if (observer) observer(sweep, state);
  }
  return result;
}

// Runs independent chains with seeds seed, seed + 1, ... on separate threads.
inline std::vector<FitResult> fit_chains(const std::vector<TrackletRecord>& records, const SequenceContext& ctx,
                                         const FitConfig& config, std::size_t n_chains) {
  require(n_chains >= 1, "fit_chains: need at least one chain");
  std::vector<FitResult> results(n_chains);
  std::vector<std::exception_ptr> errors(n_chains);
  std::vector<std::thread> workers;
  for (std::size_t c = 0; c < n_chains; ++c)
    workers.emplace_back([&, c] {
      try {
        FitConfig cfg = config;
        cfg.seed = config.seed + c;
        results[c] = fit(records, ctx, cfg);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

// Derives prev, conflicts and segments one record at a time, matching build_context for every
// record seen so far except that successors and future conflicts are unknown.
class IncrementalContext {
 public:
  explicit IncrementalContext(HyperParams hyper) : hyper_(std::move(hyper)) {}

  // Registers the next record; returns its index.
  std::size_t push(const TrackletRecord& rec) {
    if (!seen_.empty() && !record_order(last_, rec))
      throw DataError("online: record id " + std::to_string(rec.id) + " arrives out of order");
    require(rec.start_frame >= 0 && rec.start_frame <= rec.end_frame,
            "online: invalid frame span for tracklet " + std::to_string(rec.id));
    const std::size_t i = ctx_.prev.size();
    while (!open_.empty() && open_.top().first < rec.start_frame) {
      const std::size_t j = open_.top().second;
      open_.pop();
      if (!latest_closed_ || j > *latest_closed_) {
        latest_closed_ = j;
        latest_closed_rec_ = window_.at(j);
      }
    }
    std::erase_if(window_, [&](const auto& kv) { return kv.second.end_frame < rec.start_frame && kv.first != latest_closed_; });

    ctx_.prev.push_back(std::nullopt);
    ctx_.next.push_back(std::nullopt);
    ctx_.children.emplace_back();
    ctx_.conflicts.emplace_back();
    ctx_.prev_distance.push_back(std::numeric_limits<double>::infinity());
    if (latest_closed_) {
      ctx_.prev[i] = *latest_closed_;
      ctx_.prev_distance[i] =
          rec.prev_distance.value_or(predecessor_distance(latest_closed_rec_, rec, hyper_.distance_pixel_weight));
    }
    for (const auto& [j, r] : window_)
      if (r.end_frame >= rec.start_frame) ctx_.conflicts[i].push_back(j);
    std::size_t seg = 0;
    if (!seen_.empty()) {
      const bool cut = rec.start_frame - last_.start_frame > hyper_.segment_gap;
      seg = ctx_.segment_of.back() + (cut ? 1 : 0);
      if (cut) ctx_.changepoints.push_back(i);
    }
    ctx_.segment_of.push_back(seg);
    TrackletRecord slim = rec;
    slim.features.clear();
    window_.emplace(i, slim);
    open_.emplace(rec.end_frame, i);
    last_ = slim;
    seen_.push_back(true);
    return i;
  }

  const SequenceContext& context() const { return ctx_; }

 private:
  HyperParams hyper_;
  SequenceContext ctx_;
  using Open = std::pair<std::int64_t, std::size_t>;
  std::priority_queue<Open, std::vector<Open>, std::greater<>> open_;
  std::map<std::size_t, TrackletRecord> window_;  // records that may still overlap newcomers
  std::optional<std::size_t> latest_closed_;
  TrackletRecord latest_closed_rec_;
  TrackletRecord last_;
  std::vector<bool> seen_;
};

// Single forward pass. Each record draws several (C, Z) samples from its conditional given
// the past and keeps the most frequent; atoms track their posterior means. Past labels are
// never revisited.
class OnlineClusterer {
 public:
  explicit OnlineClusterer(const FitConfig& config)
      : config_(config), rng_(config.seed), incremental_(config.hyper) {
    config_.validate();
    state_ = make_empty_state(0, 0, detail::uses_segments(config_.mode));
  }

  std::pair<bool, Label> push(const TrackletRecord& rec) {
    const HyperParams& hyper = config_.hyper;
    if (rec.features.size() != hyper.dim())
      throw DataError("online: dimension mismatch at tracklet id " + std::to_string(rec.id));
    const std::size_t i = incremental_.push(rec);
    const SequenceContext& ctx = incremental_.context();
    const std::size_t s = ctx.segment_of[i];
    state_.z.push_back(kUnassigned);
    state_.c.push_back(1);
    if (state_.segments && state_.segments->members.size() <= s) {
      state_.segments->members.resize(s + 1);
      state_.segments->changepoints.resize(s + 1);
    }
    const auto cands = blocked_candidates(state_, i, rec.features, ctx, hyper, config_.mode, std::nullopt);
    std::vector<std::size_t> votes(cands.size(), 0);
    for (std::size_t t = 0; t < config_.online_samples_per_point; ++t) ++votes[sample_log_weights(cands, rng_)];
    std::size_t best = 0;
    for (std::size_t j = 1; j < cands.size(); ++j)
      if (votes[j] > votes[best] || (votes[j] == votes[best] && votes[j] > 0 && prefer(cands[j], cands[best])))
        best = j;
    apply_candidate(state_, i, rec.features, cands[best], s, hyper, rng_, true);
    const Label k = state_.z[i];
    if (k >= 1) {
      Component& comp = state_.components.at(k);
      comp.phi = component_posterior(comp.n, comp.sum_y, hyper).mean;
    }
    return {state_.c[i] != 0, k};
  }

  const ModelState& state() const { return state_; }
  const SequenceContext& context() const { return incremental_.context(); }

 private:
  // Tie-break toward the lowest label; a fresh component ranks last, copy before redraw.
  static bool prefer(const Candidate& a, const Candidate& b) {
    auto rank = [](Label k) { return k == kNewComponent ? std::numeric_limits<Label>::max() : k; };
    if (rank(a.k) != rank(b.k)) return rank(a.k) < rank(b.k);
    return !a.c && b.c;
  }

  FitConfig config_;
  Rng rng_;
  IncrementalContext incremental_;
  ModelState state_;
};

inline FitResult fit_online(const std::vector<TrackletRecord>& records, const FitConfig& config) {
  if (records.empty()) throw DataError("fit: empty dataset");
  OnlineClusterer online(config);
  for (const auto& r : records) online.push(r);
  FitResult result;
  result.state = online.state();
  result.hyper = config.hyper;
  result.trace.assign(1, joint_log_probability(result.state, records, online.context(), config.hyper, config.mode));
  return result;
}

}  // namespace tcc
