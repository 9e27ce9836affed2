#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

#include "tcclust/tcclust.hpp"

using namespace tcc;

namespace {

HyperParams base_hyper(std::size_t d = 2) {
  auto h = HyperParams::isotropic(d, 0, 25, 1);
  h.segment_gap = 100;
  return h;
}

SynthesisPlan base_plan(std::size_t n, std::uint64_t seed) {
  SynthesisPlan p;
  p.n_tracklets = n;
  p.dim = 2;
  p.seed = seed;
  return p;
}

std::size_t distinct_components(const ModelState& st) {
  std::set<Label> ks;
  for (Label k : st.z)
    if (k >= 1) ks.insert(k);
  return ks.size();
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); }

double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / double(v.size() - 1);
}

}  // namespace

TEST(GenerateTccrp, KappaZeroGivesOneLabelPerChain) {
  auto h = base_hyper();
  h.kappa1 = 0.0;
  h.thres = 1e9;  // every predecessor counts as close
  auto plan = base_plan(300, 4);
  plan.layout.overlap_rate = 0.0;
  const auto g = generate_tccrp(plan, h);
  for (std::size_t i = 0; i < g.truth.size(); ++i) {
    if (g.context.prev[i]) {
      EXPECT_EQ(g.truth.c[i], 0);
      EXPECT_EQ(g.truth.z[i], g.truth.z[*g.context.prev[i]]);
    } else {
      EXPECT_EQ(g.truth.c[i], 1);
    }
  }
}

TEST(GenerateTccrp, DeterministicPerSeed) {
  const auto h = base_hyper();
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    const auto a = generate_tccrp(base_plan(200, seed), h);
    const auto b = generate_tccrp(base_plan(200, seed), h);
    std::stringstream sa, sb;
    write_dataset(a.dataset, sa);
    write_dataset(b.dataset, sb);
    EXPECT_EQ(sa.str(), sb.str());
    EXPECT_EQ(a.truth.z, b.truth.z);
    EXPECT_EQ(a.truth.c, b.truth.c);
  }
  std::stringstream s1, s2;
  write_dataset(generate_tccrp(base_plan(200, 1), h).dataset, s1);
  write_dataset(generate_tccrp(base_plan(200, 2), h).dataset, s2);
  EXPECT_NE(s1.str(), s2.str());
}

// kappa = 1 and beta = 0 turn the sampler into a plain CRP; compare the number of tables
// with sum_i alpha / (alpha + i - 1).
TEST(GenerateTccrp, CrpTableCountMatchesClosedForm) {
  auto h = base_hyper();
  h.kappa1 = h.kappa2 = 1.0;
  h.beta = 0.0;
  h.alpha = 1.0;
  const int N = 50, runs = 1000;
  double expected = 0;
  for (int i = 1; i <= N; ++i) expected += h.alpha / (h.alpha + i - 1);
  EXPECT_NEAR(expected, 4.499, 1e-3);
  std::vector<double> counts;
  for (int r = 0; r < runs; ++r) {
    auto plan = base_plan(N, 1000 + r);
    plan.layout.overlap_rate = 0.0;
    plan.layout.tracklet_length = 1;  // no two tracklets ever share a frame
    counts.push_back(double(distinct_components(generate_tccrp(plan, h).truth)));
  }
  const double se = std::sqrt(variance(counts) / runs);
  EXPECT_LT(std::abs(mean(counts) - expected), 3 * se) << "mean " << mean(counts) << " se " << se;
}

TEST(GenerateTccrp, NoConflictingPairSharesALabel) {
  auto h = base_hyper();
  h.kappa1 = 0.05;
  h.kappa2 = 0.5;
  for (int r = 0; r < 10000; ++r) {
    auto plan = base_plan(30, 50000 + r);
    plan.layout.overlap_rate = 0.3;
    plan.layout.mean_chain_length = 3;
    const auto g = r % 2 ? generate_tccrp(plan, h) : generate_tccrf(plan, h);
    const auto rep = check_constraints(g.truth, g.context, r % 2 == 0);
    ASSERT_TRUE(rep.ok()) << "seed " << plan.seed;
  }
}

TEST(GenerateTccrp, TruthSatisfiesStateInvariants) {
  auto h = base_hyper();
  h.kappa2 = 0.4;
  for (int r = 0; r < 20; ++r) {
    auto plan = base_plan(400, 7 + r);
    plan.n_segments = 1 + r % 4;
    const auto g = r % 2 ? generate_tccrp(plan, h) : generate_tccrf(plan, h);
    EXPECT_NO_THROW(verify_counts(g.truth, g.dataset.records, g.context));
    EXPECT_TRUE(check_constraints(g.truth, g.context, r % 2 == 0).ok());
    for (std::size_t i = 0; i < g.truth.size(); ++i) {
      EXPECT_EQ(g.dataset.records[i].truth_label, truth_label_for(g.truth.z[i]));
      const auto& comp = g.truth.components;
      if (g.truth.z[i] >= 1) { EXPECT_TRUE(comp.count(g.truth.z[i])); }
    }
    for (const auto& [k, comp] : g.truth.components) {
      EXPECT_GT(comp.n, 0u);
      EXPECT_LE(comp.n_changepoints, comp.n);
    }
  }
}

// Fraction of C = 1 among close and far predecessors converges to kappa1 and kappa2.
TEST(GenerateTccrp, ChangeRatesMatchKappa) {
  auto h = base_hyper();
  h.kappa1 = 0.05;
  h.kappa2 = 0.4;
  std::size_t close_n = 0, close_c = 0, far_n = 0, far_c = 0;
  for (int r = 0; r < 10; ++r) {
    auto plan = base_plan(2000, 300 + r);
    plan.layout.overlap_rate = 0.0;  // conflict repair would bias the rate upward
    const auto g = generate_tccrp(plan, h);
    for (std::size_t i = 0; i < g.truth.size(); ++i) {
      if (!g.context.prev[i]) continue;
      if (g.context.prev_distance[i] <= h.thres) {
        ++close_n;
        close_c += g.truth.c[i];
      } else {
        ++far_n;
        far_c += g.truth.c[i];
      }
    }
  }
  auto within = [](std::size_t hits, std::size_t n, double p) {
    const double se = std::sqrt(p * (1 - p) / double(n));
    return std::abs(double(hits) / double(n) - p) < 4 * se;
  };
  EXPECT_GT(close_n, 1000u);
  EXPECT_GT(far_n, 1000u);
  EXPECT_TRUE(within(close_c, close_n, h.kappa1)) << double(close_c) / double(close_n);
  EXPECT_TRUE(within(far_c, far_n, h.kappa2)) << double(far_c) / double(far_n);
}

TEST(GenerateTccrp, FinitePoolUsesOnlyPoolAtoms) {
  auto h = base_hyper();
  h.kappa2 = 0.5;
  auto plan = base_plan(1000, 3);
  plan.n_entities = 6;
  plan.min_separation = 10;
  const auto g = generate_tccrp(plan, h);
  for (Label k : g.truth.z) EXPECT_LE(k, 6);
  for (const auto& [a, ca] : g.truth.components)
    for (const auto& [b, cb] : g.truth.components) {
      if (a >= b) continue;
      double d2 = 0;
      for (std::size_t d = 0; d < ca.phi.size(); ++d) d2 += (ca.phi[d] - cb.phi[d]) * (ca.phi[d] - cb.phi[d]);
      EXPECT_GE(std::sqrt(d2), 10.0);
    }
}

TEST(GenerateTccrp, FeaturesAreFloatRepresentable) {
  const auto g = generate_tccrp(base_plan(50, 8), base_hyper());
  for (const auto& r : g.dataset.records)
    for (double v : r.features) EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
}

TEST(GenerateTccrp, RejectsBadPlans) {
  auto plan = base_plan(0, 1);
  EXPECT_THROW(generate_tccrp(plan, base_hyper()), ContractViolation);
  plan = base_plan(10, 1);
  plan.layout.overlap_rate = 1.5;
  EXPECT_THROW(generate_tccrp(plan, base_hyper()), ContractViolation);
  plan = base_plan(10, 1);
  plan.dim = 3;
  EXPECT_THROW(generate_tccrp(plan, base_hyper()), ContractViolation);
}

TEST(SampleIbpRow, FirstRowIsPoissonGamma) {
  Rng rng(1);
  const double gamma = 2.5;
  double total = 0;
  const int runs = 20000;
  for (int r = 0; r < runs; ++r) {
    const auto row = sample_ibp_row({}, 0, gamma, rng);
    EXPECT_TRUE(row.existing.empty());
    total += double(row.n_new);
  }
  EXPECT_NEAR(total / runs, gamma, 4 * std::sqrt(gamma / runs));
}

// Standard sequential IBP: customer s + 1 takes a dish used by m earlier customers with
// probability m / (s + 1) and Poisson(gamma / (s + 1)) new dishes.
TEST(SampleIbpRow, ExistingDishProbability) {
  Rng rng(2);
  int on = 0;
  double fresh = 0;
  const int runs = 40000;
  for (int r = 0; r < runs; ++r) {
    const auto row = sample_ibp_row({{1, 3}}, 3, 2.0, rng);
    on += !row.existing.empty();
    fresh += double(row.n_new);
  }
  const double p = 3.0 / 4.0;
  EXPECT_NEAR(double(on) / runs, p, 4 * std::sqrt(p * (1 - p) / runs));
  EXPECT_NEAR(fresh / runs, 0.5, 4 * std::sqrt(0.5 / runs));
}

TEST(SampleIbpRow, ZeroGammaNeverInnovates) {
  Rng rng(3);
  for (int r = 0; r < 1000; ++r) EXPECT_EQ(sample_ibp_row({{1, 1}, {2, 2}}, 4, 0.0, rng).n_new, 0u);
  EXPECT_THROW(sample_ibp_row({{1, 5}}, 3, 1.0, rng), ContractViolation);
}

TEST(GenerateTccrf, SegmentBoundariesForceChange) {
  auto h = base_hyper();
  h.kappa1 = 0.0;
  h.kappa2 = 0.0;
  auto plan = base_plan(400, 5);
  plan.n_segments = 8;
  const auto g = generate_tccrf(plan, h);
  EXPECT_EQ(g.context.n_segments(), 8u);
  for (std::size_t i : g.context.changepoints) EXPECT_EQ(g.truth.c[i], 1);
  for (std::size_t i = 0; i < g.truth.size(); ++i) {
    const auto p = g.context.prev[i];
    if (p && g.context.segment_of[*p] != g.context.segment_of[i]) { EXPECT_EQ(g.truth.c[i], 1); }
  }
}

TEST(GenerateTccrf, LabelsStayInsideActiveRows) {
  auto h = base_hyper();
  h.gamma = 2.0;
  h.kappa2 = 0.5;
  for (int r = 0; r < 30; ++r) {
    auto plan = base_plan(300, 900 + r);
    plan.n_segments = 6;
    const auto g = generate_tccrf(plan, h);
    ASSERT_EQ(g.active_rows.size(), 6u);
    for (std::size_t i = 0; i < g.truth.size(); ++i) {
      const Label k = g.truth.z[i];
      if (k >= 1) { EXPECT_TRUE(g.active_rows[g.context.segment_of[i]].count(k)); }
    }
  }
}

// With one segment and a huge gamma the active row is effectively unbounded, so the
// franchise sampler should match the TC-CRP sampler in distribution.
TEST(GenerateTccrf, SingleSegmentLargeGammaMatchesTccrp) {
  auto h = base_hyper();
  h.gamma = 5000;
  h.alpha = 1.5;
  h.kappa2 = 0.5;
  std::vector<double> a, b;
  for (int r = 0; r < 500; ++r) {
    auto plan = base_plan(80, 7000 + r);
    a.push_back(double(distinct_components(generate_tccrp(plan, h).truth)));
    plan.seed += 100000;
    b.push_back(double(distinct_components(generate_tccrf(plan, h).truth)));
  }
  const double t = (mean(a) - mean(b)) / std::sqrt(variance(a) / a.size() + variance(b) / b.size());
  EXPECT_LT(std::abs(t), 3.5) << mean(a) << " vs " << mean(b);
}
