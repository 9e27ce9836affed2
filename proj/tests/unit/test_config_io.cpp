#include <gtest/gtest.h>

#include <sstream>

#include "tcclust/tcclust.hpp"

using namespace tcc;

TEST(Config, DefaultsRoundTrip) {
  RunConfig cfg;
  std::ostringstream os;
  write_config(cfg, os);
  std::istringstream is(os.str());
  RunConfig back = parse_config(is);
  std::ostringstream again;
  write_config(back, again);
  EXPECT_EQ(os.str(), again.str());
  expand_dimensions(back);
  EXPECT_EQ(back.fit.hyper.mu, cfg.fit.hyper.mu);
  EXPECT_NO_THROW(back.validate());
}

TEST(Config, EveryKeyIsEmitted) {
  std::ostringstream os;
  write_config(RunConfig{}, os);
  for (const auto& k : detail::config_keys()) EXPECT_NE(os.str().find("\n" + k.name + " = "), std::string::npos) << k.name;
}

TEST(Config, ParsesValuesAndComments) {
  std::istringstream is(
      "# comment\n"
      "mode = tccrf   # trailing comment\n"
      "dim = 3\n"
      "sigma1 = 1,2,3\n"
      "alpha = 2.5\n"
      "hyper_update = true\n"
      "\n"
      "segments = 4\n");
  RunConfig cfg = parse_config(is);
  expand_dimensions(cfg);
  EXPECT_EQ(cfg.fit.mode, Mode::tccrf);
  EXPECT_EQ(cfg.plan.dim, 3u);
  EXPECT_EQ(cfg.fit.hyper.sigma1, (Vector{1, 2, 3}));
  EXPECT_EQ(cfg.fit.hyper.mu, (Vector{0, 0, 0}));
  EXPECT_DOUBLE_EQ(cfg.fit.hyper.alpha, 2.5);
  EXPECT_TRUE(cfg.fit.hyper_update_enabled);
  EXPECT_EQ(cfg.plan.n_segments, 4u);
}

TEST(Config, NonIsotropicVectorsRoundTrip) {
  RunConfig cfg;
  set_config_value(cfg, "dim", "2");
  set_config_value(cfg, "mu", "0.1,-3");
  std::ostringstream os;
  write_config(cfg, os);
  std::istringstream is(os.str());
  EXPECT_EQ(parse_config(is).fit.hyper.mu, (Vector{0.1, -3}));
}

TEST(Config, ErrorsNameTheLineAndKey) {
  std::istringstream unknown("alpha = 1\nfoo = 2\n");
  try {
    parse_config(unknown, "run.cfg");
    FAIL();
  } catch (const ContractViolation& e) {
    EXPECT_NE(std::string(e.what()).find("run.cfg:2"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("unknown key 'foo'"), std::string::npos) << e.what();
  }
  std::istringstream bad("alpha = two\n");
  EXPECT_THROW(parse_config(bad), ContractViolation);
  std::istringstream noeq("alpha 2\n");
  EXPECT_THROW(parse_config(noeq), ContractViolation);
  std::istringstream mode("mode = hdp\n");
  EXPECT_THROW(parse_config(mode), ContractViolation);
  std::istringstream neg("n_sweeps = -3\n");
  EXPECT_THROW(parse_config(neg), ContractViolation);
}

TEST(Config, ValidationCatchesBadValues) {
  RunConfig cfg;
  set_config_value(cfg, "kappa1", "0.5");
  set_config_value(cfg, "kappa2", "0.1");
  expand_dimensions(cfg);
  EXPECT_THROW(cfg.validate(), ContractViolation);
  RunConfig wrong_dim;
  set_config_value(wrong_dim, "dim", "3");
  set_config_value(wrong_dim, "mu", "1,2");
  EXPECT_THROW(expand_dimensions(wrong_dim), ContractViolation);
  RunConfig burn;
  set_config_value(burn, "burn_in", "500");
  expand_dimensions(burn);
  EXPECT_THROW(burn.validate(), ContractViolation);
}

namespace {

ResultFile sample_result() {
  ResultFile r;
  r.mode = Mode::tccrf;
  r.dim = 2;
  r.ids = {3, 5, 9};
  r.z = {1, 0, 2};
  r.c = {1, 1, 0};
  r.atoms = {{1, 1, {0.1, 1.0 / 3.0}}, {2, 1, {-7.25, 1e-300}}};
  return r;
}

}  // namespace

TEST(ResultFile, RoundTripIsExact) {
  const ResultFile r = sample_result();
  std::ostringstream os;
  write_result(r, os);
  std::istringstream is(os.str());
  const ResultFile back = read_result(is);
  EXPECT_EQ(back.mode, r.mode);
  EXPECT_EQ(back.ids, r.ids);
  EXPECT_EQ(back.z, r.z);
  EXPECT_EQ(back.c, r.c);
  ASSERT_EQ(back.atoms.size(), 2u);
  EXPECT_EQ(back.atoms[0].phi, r.atoms[0].phi);
  EXPECT_EQ(back.atoms[1].phi, r.atoms[1].phi);
  std::ostringstream again;
  write_result(back, again);
  EXPECT_EQ(os.str(), again.str());
}

TEST(ResultFile, MalformedInputsAreParseErrors) {
  std::ostringstream os;
  write_result(sample_result(), os);
  const std::string good = os.str();
  auto parse = [](const std::string& s) {
    std::istringstream is(s);
    return read_result(is);
  };
  EXPECT_THROW(parse("garbage\n"), ParseError);
  EXPECT_THROW(parse(good.substr(0, good.size() / 2)), ParseError);
  std::string bad_c = good;
  bad_c.replace(bad_c.find("9 2 0"), 5, "9 2 7");
  EXPECT_THROW(parse(bad_c), ParseError);
  try {
    parse(good.substr(0, good.find("atoms")));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 8"), std::string::npos) << e.what();
  }
}

TEST(ResultFile, AlignReportsFirstOffendingId) {
  const ResultFile r = sample_result();
  std::vector<TrackletRecord> rs(3);
  rs[0].id = 3;
  rs[1].id = 5;
  rs[2].id = 9;
  EXPECT_EQ(align_result(r, rs), r.z);
  rs[1].id = 6;
  try {
    align_result(r, rs);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("result has 5, dataset has 6"), std::string::npos) << e.what();
  }
  rs[1].id = 5;
  rs.pop_back();
  try {
    align_result(r, rs);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("first unmatched id 9"), std::string::npos) << e.what();
  }
}

TEST(Report, KeyValueAndJsonAgree) {
  auto h = HyperParams::isotropic(2, 0, 25, 1);
  SynthesisPlan plan;
  plan.n_tracklets = 300;
  plan.seed = 5;
  const auto g = generate_tccrp(plan, h);
  const auto rep = evaluate(g.truth.z, g.dataset.records, g.context, truth_labels_of(g.dataset.records), h);
  std::ostringstream kv;
  write_report_kv(rep, kv);
  const auto js = report_json(rep);
  EXPECT_NE(kv.str().find("purity 1\n"), std::string::npos) << kv.str();
  EXPECT_DOUBLE_EQ(js["purity"].get<double>(), 1.0);
  EXPECT_EQ(js["entity_coverage"].get<std::size_t>(), rep.purity.entity_coverage);
  EXPECT_TRUE(js["shot_summary"].contains("shot_coverage"));
  EXPECT_TRUE(js["entity_summary"].contains("conciseness"));
}

TEST(TraceCsv, HeaderAndRows) {
  FitResult r;
  r.trace = {-10.5, -9.25};
  std::ostringstream os;
  write_trace_csv(r, os);
  EXPECT_EQ(os.str(), "sweep,log_prob\n0,-10.5\n1,-9.25\n");
}
