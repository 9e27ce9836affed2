#include <gtest/gtest.h>

#include <random>

#include "tcclust/tcclust.hpp"

using namespace tcc;

namespace {

// State whose components carry the given (n, n_changepoints) counts; phi unused here.
ModelState counts_state(const std::map<Label, std::pair<std::size_t, std::size_t>>& counts) {
  ModelState st;
  for (const auto& [k, nc] : counts) {
    Component c;
    c.phi = {0.0};
    c.sum_y = {0.0};
    c.n = nc.first;
    c.n_changepoints = nc.second;
    st.components[k] = c;
    st.next_label = std::max(st.next_label, k + 1);
  }
  return st;
}

double scalar_log_normal(double y, double m, double v) {
  return std::log(1.0 / std::sqrt(2 * M_PI * v)) - (y - m) * (y - m) / (2 * v);
}

}  // namespace

TEST(LogGaussian, HandValues) {
  const Vector a{0}, b{0}, one{1};
  EXPECT_NEAR(log_gaussian(a, b, one), -0.5 * std::log(2 * M_PI), 1e-12);
  EXPECT_NEAR(log_gaussian(Vector{1, 1}, Vector{0, 0}, Vector{1, 1}), -std::log(2 * M_PI) - 1.0, 1e-12);
  EXPECT_NEAR(log_gaussian(Vector{2}, Vector{0}, Vector{4}), -0.5 * std::log(8 * M_PI) - 0.5, 1e-12);
  EXPECT_NEAR(log_gaussian(Vector{1, 1}, Vector{0, 0}, Vector{1, 1}), -2.8378771, 1e-7);
  EXPECT_NEAR(log_gaussian(Vector{2}, Vector{0}, Vector{4}), -2.1120857, 1e-7);
}

TEST(LogGaussian, ContractErrors) {
  EXPECT_THROW(log_gaussian(Vector{0, 1}, Vector{0}, Vector{1}), ContractViolation);
  EXPECT_THROW(log_gaussian(Vector{0}, Vector{0}, Vector{0}), ContractViolation);
  EXPECT_THROW(log_gaussian(Vector{0}, Vector{0}, Vector{-1}), ContractViolation);
}

TEST(LogGaussian, MatchesPerDimensionSum) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-5, 5), v(0.05, 9);
  std::uniform_int_distribution<int> dim(1, 10);
  for (int t = 0; t < 1000; ++t) {
    const int d = dim(rng);
    Vector y(d), m(d), s(d);
    double ref = 0;
    for (int j = 0; j < d; ++j) {
      y[j] = u(rng);
      m[j] = u(rng);
      s[j] = v(rng);
      ref += scalar_log_normal(y[j], m[j], s[j]);
    }
    EXPECT_NEAR(log_gaussian(y, m, s), ref, 1e-12 * std::max(1.0, std::abs(ref)));
  }
}

TEST(CrpPredictive, Examples) {
  auto p = crp_predictive({{1, 3}, {2, 1}}, 1.0).normalized();
  EXPECT_NEAR(p.weight(1), 0.6, 1e-12);
  EXPECT_NEAR(p.weight(2), 0.2, 1e-12);
  EXPECT_NEAR(p.weight(kNewComponent), 0.2, 1e-12);
  EXPECT_FALSE(p.contains(kJunk));

  p = crp_predictive({}, 2.0).normalized();
  EXPECT_EQ(p.support().size(), 1u);
  EXPECT_DOUBLE_EQ(p.weight(kNewComponent), 1.0);

  p = crp_predictive({{1, 5}}, 5.0).normalized();
  EXPECT_NEAR(p.weight(1), 0.5, 1e-12);
  EXPECT_NEAR(p.weight(kNewComponent), 0.5, 1e-12);
  EXPECT_THROW(crp_predictive({}, 0.0), ContractViolation);
}

TEST(TccrpPredictive, Examples) {
  auto h = HyperParams::isotropic(1, 0, 1, 1);
  h.alpha = 1;
  h.beta = 0.5;
  auto st = counts_state({{1, {5, 3}}, {2, {1, 1}}});
  auto p = tccrp_predictive(st, {2}, h);
  EXPECT_NEAR(p.total(), 4.5, 1e-12);
  auto q = p.normalized();
  EXPECT_NEAR(q.weight(kJunk), 1.0 / 9, 1e-12);
  EXPECT_NEAR(q.weight(1), 6.0 / 9, 1e-12);
  EXPECT_EQ(q.weight(2), 0.0);
  EXPECT_TRUE(q.contains(2));
  EXPECT_NEAR(q.weight(kNewComponent), 2.0 / 9, 1e-12);

  st = ModelState{};
  h.beta = 1;
  q = tccrp_predictive(st, {}, h).normalized();
  EXPECT_NEAR(q.weight(kJunk), 0.5, 1e-12);
  EXPECT_NEAR(q.weight(kNewComponent), 0.5, 1e-12);

  h.alpha = 2;
  h.beta = 2;
  st = counts_state({{1, {4, 4}}});
  q = tccrp_predictive(st, {1}, h).normalized();
  EXPECT_NEAR(q.weight(kJunk), 0.5, 1e-12);
  EXPECT_EQ(q.weight(1), 0.0);
  EXPECT_NEAR(q.weight(kNewComponent), 0.5, 1e-12);
}

TEST(TccrpPredictive, OnlyChangepointCountsEnter) {
  auto h = HyperParams::isotropic(1, 0, 1, 1);
  auto st = counts_state({{1, {50, 1}}, {2, {1, 1}}});
  auto p = tccrp_predictive(st, {}, h);
  EXPECT_EQ(p.weight(1), p.weight(2));
}

TEST(TccrpPredictive, JunkNeverMasked) {
  auto h = HyperParams::isotropic(1, 0, 1, 1);
  h.beta = 0.7;
  auto p = tccrp_predictive(counts_state({{1, {2, 2}}}), {0, 1}, h);
  EXPECT_DOUBLE_EQ(p.weight(kJunk), 0.7);
}

namespace {

// Segment table where component k is active (one changepoint member each) in the listed
// segments, with extra changepoint counts on top.
ModelState franchise_state(std::size_t n_segments, const std::map<Label, std::vector<std::size_t>>& active,
                           const std::map<std::pair<std::size_t, Label>, std::size_t>& szc) {
  ModelState st;
  st.segments.emplace(n_segments);
  for (const auto& [k, segs] : active) {
    Component c;
    c.phi = {0.0};
    c.sum_y = {0.0};
    for (std::size_t s : segs) {
      const auto it = szc.find({s, k});
      const std::size_t m = it == szc.end() ? 1 : it->second;
      st.segments->members[s][k] = m;
      st.segments->changepoints[s][k] = m;
      c.n += m;
      c.n_changepoints += m;
    }
    st.segments->seg_count[k] = segs.size();
    st.components[k] = c;
  }
  return st;
}

}  // namespace

TEST(TccrfPredictive, Examples) {
  auto h = HyperParams::isotropic(1, 0, 1, 1);
  h.alpha = h.beta = h.gamma = 1;
  auto st = franchise_state(4, {{1, {2}}, {5, {0, 1, 3}}}, {{{2, 1}, 2}});
  auto p = tccrf_predictive(st, 2, {}, h);
  EXPECT_DOUBLE_EQ(p.weight(kJunk), 1);
  EXPECT_DOUBLE_EQ(p.weight(1), 2);
  EXPECT_DOUBLE_EQ(p.weight(5), 3);
  EXPECT_DOUBLE_EQ(p.weight(kNewComponent), 1);
  EXPECT_DOUBLE_EQ(p.total(), 7);

  ModelState empty;
  empty.segments.emplace(1);
  h.beta = 2;
  auto q = tccrf_predictive(empty, 0, {}, h).normalized();
  EXPECT_NEAR(q.weight(kJunk), 2.0 / 3, 1e-12);
  EXPECT_NEAR(q.weight(kNewComponent), 1.0 / 3, 1e-12);

  st = franchise_state(2, {{3, {1}}}, {{{1, 3}, 5}});
  EXPECT_EQ(tccrf_predictive(st, 1, {3}, h).weight(3), 0.0);
}

TEST(TccrfPredictive, NewMassIsAlphaTimesGamma) {
  auto h = HyperParams::isotropic(1, 0, 1, 1);
  h.alpha = 2.5;
  h.gamma = 0.4;
  ModelState st;
  st.segments.emplace(1);
  EXPECT_DOUBLE_EQ(tccrf_predictive(st, 0, {}, h).weight(kNewComponent), 1.0);
}

TEST(TccrfPredictive, RequiresSegmentTable) {
  auto h = HyperParams::isotropic(1, 0, 1, 1);
  EXPECT_THROW(tccrf_predictive(ModelState{}, 0, {}, h), ContractViolation);
}

// Random count tables: normalization and absolute masking of conflicting components.
TEST(PpfProperties, NormalizationAndConflictZeroing) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> nk(0, 8), cnt(0, 20), seg(1, 5);
  std::uniform_real_distribution<double> pos(0.05, 5);
  std::bernoulli_distribution coin(0.3);
  for (int t = 0; t < 10000; ++t) {
    auto h = HyperParams::isotropic(1, 0, 1, 1);
    h.alpha = pos(rng);
    h.beta = pos(rng);
    h.gamma = pos(rng);
    const int K = nk(rng);
    const std::size_t S = static_cast<std::size_t>(seg(rng));
    std::map<Label, std::vector<std::size_t>> active;
    std::map<std::pair<std::size_t, Label>, std::size_t> szc;
    LabelSet conflicts;
    for (Label k = 1; k <= K; ++k) {
      for (std::size_t s = 0; s < S; ++s)
        if (coin(rng)) {
          active[k].push_back(s);
          szc[{s, k}] = 1 + static_cast<std::size_t>(cnt(rng));
        }
      if (active[k].empty()) active[k].push_back(0);
      if (coin(rng)) conflicts.insert(k);
    }
    if (coin(rng)) conflicts.insert(kJunk);
    auto st = franchise_state(S, active, szc);
    const std::size_t s = static_cast<std::size_t>(t) % S;
    for (const Categorical& p : {tccrp_predictive(st, conflicts, h), tccrf_predictive(st, s, conflicts, h)}) {
      const auto q = p.normalized();
      EXPECT_NEAR(q.total(), 1.0, 1e-12);
      for (Label k : conflicts)
        if (k != kJunk) { ASSERT_EQ(q.weight(k), 0.0); }
      EXPECT_GT(q.weight(kJunk), 0.0);
      for (const auto& e : q.support()) ASSERT_TRUE(std::isfinite(e.weight) && e.weight >= 0);
    }
  }
}

TEST(PpfProperties, ReducesToCrpWhenEveryDrawIsAChange) {
  auto h = HyperParams::isotropic(1, 0, 1, 1);
  h.alpha = 1.7;
  h.beta = 1e-300;
  std::map<Label, std::size_t> counts{{1, 4}, {2, 7}, {4, 1}};
  std::map<Label, std::pair<std::size_t, std::size_t>> nc;
  for (const auto& [k, n] : counts) nc[k] = {n, n};
  const auto tc = tccrp_predictive(counts_state(nc), {}, h).normalized();
  const auto crp = crp_predictive(counts, h.alpha).normalized();
  for (const auto& e : crp.support()) EXPECT_NEAR(tc.weight(e.label), e.weight, 1e-12);
}

TEST(PpfProperties, RelabelingEquivariance) {
  auto h = HyperParams::isotropic(1, 0, 1, 1);
  h.alpha = 0.8;
  h.beta = 0.3;
  const auto a = tccrp_predictive(counts_state({{1, {3, 2}}, {2, {9, 5}}, {3, {1, 1}}}), {3}, h);
  const auto b = tccrp_predictive(counts_state({{7, {3, 2}}, {4, {9, 5}}, {9, {1, 1}}}), {9}, h);
  const std::map<Label, Label> perm{{1, 7}, {2, 4}, {3, 9}, {kJunk, kJunk}, {kNewComponent, kNewComponent}};
  for (const auto& e : a.support()) EXPECT_DOUBLE_EQ(b.weight(perm.at(e.label)), e.weight);
}

TEST(Categorical, RejectsZeroMass) {
  Categorical c({{1, 0.0}, {2, 0.0}});
  EXPECT_THROW(c.normalized(), ContractViolation);
}

TEST(HyperParams, Validation) {
  auto h = HyperParams::isotropic(3, 0, 1, 1);
  EXPECT_NO_THROW(h.validate());
  auto bad = h;
  bad.sigma1[1] = 0;
  EXPECT_THROW(bad.validate(), ContractViolation);
  bad = h;
  bad.c = 1.0;
  EXPECT_THROW(bad.validate(), ContractViolation);
  bad = h;
  bad.kappa1 = 0.5;
  bad.kappa2 = 0.1;
  EXPECT_THROW(bad.validate(), ContractViolation);
  bad = h;
  bad.beta = 0;
  EXPECT_THROW(bad.validate(), ContractViolation);
  EXPECT_NO_THROW(bad.validate(true));
  bad.mu.push_back(0);
  EXPECT_THROW(bad.validate(), ContractViolation);
}

TEST(Mode, ParseRoundTrip) {
  for (Mode m : {Mode::tccrp, Mode::tccrf, Mode::crp_baseline}) EXPECT_EQ(parse_mode(to_string(m)), m);
  EXPECT_FALSE(parse_mode("hdp").has_value());
}
