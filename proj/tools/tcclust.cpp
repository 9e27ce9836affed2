// tcclust: generate, fit and evaluate temporally coherent tracklet clusterings.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "tcclust/tcclust.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value

  void add_to(CLI::App* app) {
    app->add_option("-c,--config", config_path, "configuration file (see init-config)");
    app->add_option("-s,--set", overrides, "override a config key, e.g. --set alpha=2")->allow_extra_args(false);
  }

  tcc::RunConfig load() const {
    tcc::RunConfig cfg = config_path.empty() ? tcc::RunConfig{} : tcc::load_config(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw tcc::ContractViolation("--set expects key=value, got '" + kv + "'");
      tcc::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
  }
};

void finalize(tcc::RunConfig& cfg) {
  tcc::expand_dimensions(cfg);
  cfg.validate();
}

// The dataset fixes d; isotropic (scalar-valued) mu / sigma entries stretch to it.
void adopt_dimension(tcc::RunConfig& cfg, std::size_t dim) {
  cfg.plan.dim = dim;
  for (tcc::Vector* v : {&cfg.fit.hyper.mu, &cfg.fit.hyper.sigma0, &cfg.fit.hyper.sigma1})
    if (v->size() != dim && std::all_of(v->begin(), v->end(), [&](double x) { return x == v->front(); }))
      v->assign(dim, v->front());
  tcc::expand_dimensions(cfg);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw tcc::DataError("cannot open '" + path + "' for writing");
  return os;
}

int run_generate(Common& common, const std::string& out, const std::string& mode, std::optional<std::size_t> n,
                 std::optional<std::size_t> dim, std::optional<std::uint64_t> seed,
                 std::optional<std::size_t> segments, std::optional<std::size_t> entities, bool binary) {
  tcc::RunConfig cfg = common.load();
  if (!mode.empty()) tcc::set_config_value(cfg, "mode", mode);
  if (n) cfg.plan.n_tracklets = *n;
  if (dim) cfg.plan.dim = *dim;
  if (seed) cfg.plan.seed = *seed;
  if (segments) cfg.plan.n_segments = *segments;
  if (entities) cfg.plan.n_entities = *entities;
  adopt_dimension(cfg, cfg.plan.dim);
  // Generation tolerates degenerate corners (beta = 0 for junk-free data, kappa in {0, 1}).
  cfg.fit.hyper.validate(true);
  cfg.plan.validate(cfg.fit.hyper);
  tcc::GeneratedData g = cfg.fit.mode == tcc::Mode::tccrf ? tcc::generate_tccrf(cfg.plan, cfg.fit.hyper)
                                                          : tcc::generate_tccrp(cfg.plan, cfg.fit.hyper);
  g.dataset.encoding = binary ? tcc::Encoding::binary : tcc::Encoding::text;
  tcc::write_dataset(g.dataset, out);
  auto truth_os = open_out(out + ".truth");
  tcc::write_result(tcc::make_result(g.dataset.records, g.truth, cfg.fit.mode, cfg.plan.dim), truth_os);
  std::cout << "tracklets " << g.dataset.records.size() << '\n'
            << "components " << g.truth.n_active_components() << '\n'
            << "junk " << g.truth.n_junk() << '\n'
            << "segments " << g.context.n_segments() << '\n';
  return kOk;
}

std::string chain_path(const std::string& path, std::size_t chain, std::size_t n_chains) {
  return n_chains == 1 ? path : path + ".chain" + std::to_string(chain);
}

int run_fit(Common& common, const std::string& data_path, const std::string& out, const std::string& trace,
            const std::string& mode, bool online, std::optional<std::size_t> chains,
            std::optional<std::uint64_t> seed, std::optional<std::size_t> sweeps, bool timing, bool audit) {
  tcc::RunConfig cfg = common.load();
  if (!mode.empty()) tcc::set_config_value(cfg, "mode", mode);
  if (online) cfg.fit.online = true;
  if (chains) cfg.chains = *chains;
  if (seed) cfg.plan.seed = *seed;
  if (sweeps) {
    cfg.fit.n_sweeps = *sweeps;
    cfg.fit.burn_in = std::min(cfg.fit.burn_in, *sweeps - (*sweeps > 0 ? 1 : 0));
  }
  cfg.fit.seed = cfg.plan.seed;
  cfg.fit.record_timing = timing;
  cfg.fit.audit = audit;
  const tcc::Dataset data = tcc::read_dataset(data_path);
  if (data.records.empty()) throw tcc::DataError("dataset '" + data_path + "' has no records");
  adopt_dimension(cfg, data.dim);
  finalize(cfg);
  const tcc::SequenceContext ctx = tcc::build_context(data.records, cfg.fit.hyper);

  std::vector<tcc::FitResult> results;
  if (cfg.fit.online) {
    for (std::size_t c = 0; c < cfg.chains; ++c) {
      tcc::FitConfig f = cfg.fit;
      f.seed += c;
      results.push_back(tcc::fit_online(data.records, f));
    }
  } else {
    results = tcc::fit_chains(data.records, ctx, cfg.fit, cfg.chains);
  }
  for (std::size_t c = 0; c < results.size(); ++c) {
    const auto& r = results[c];
    auto os = open_out(chain_path(out, c, results.size()));
    tcc::write_result(tcc::make_result(data.records, r.state, cfg.fit.mode, data.dim), os);
    if (!trace.empty()) {
      auto ts = open_out(chain_path(trace, c, results.size()));
      tcc::write_trace_csv(r, ts);
    }
    std::cout << "chain " << c << " components " << r.state.n_active_components() << " junk " << r.state.n_junk()
              << " log_prob " << tcc::detail::format_double(r.trace.back(), 10) << '\n';
  }
  return kOk;
}

int run_eval(Common& common, const std::string& result_path, const std::string& data_path, const std::string& out,
             const std::string& json_out, bool summarize_only) {
  tcc::RunConfig cfg = common.load();
  const tcc::ResultFile result = tcc::read_result(result_path);
  tcc::Dataset data = tcc::read_dataset(data_path);
  if (!data.has_truth())
    throw tcc::DataError("dataset '" + data_path + "' carries no truth labels; evaluation needs them");
  adopt_dimension(cfg, data.dim);
  cfg.fit.hyper.validate(true);
  const auto z = tcc::align_result(result, data.records);
  const auto ctx = tcc::build_context(data.records, cfg.fit.hyper);
  std::optional<std::pair<std::int64_t, std::int64_t>> range;
  if (data.frames > 0) {
    std::int64_t hi = data.frames - 1;
    for (const auto& r : data.records) hi = std::max(hi, r.end_frame);
    range = std::pair<std::int64_t, std::int64_t>{0, hi};
  }
  const tcc::EvalReport report =
      tcc::evaluate(z, data.records, ctx, tcc::truth_labels_of(data.records), cfg.fit.hyper, range);
  tcc::ReportOptions opt;
  opt.entity_metrics = !summarize_only;
  opt.segment_dump = summarize_only;
  if (out.empty() || out == "-") {
    tcc::write_report_kv(report, std::cout, opt);
  } else {
    auto os = open_out(out);
    tcc::write_report_kv(report, os, opt);
  }
  if (!json_out.empty()) {
    auto os = open_out(json_out);
    os << tcc::report_json(report, opt).dump(2) << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporally coherent tracklet clustering (TC-CRP / TC-CRF)"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "tcclust 1.0.0");

  auto* init = app.add_subcommand("init-config", "print a configuration file with every default");
  std::string init_out;
  init->add_option("-o,--out", init_out, "write to this file instead of stdout");

  Common gen_common, fit_common, eval_common, sum_common;

  auto* gen = app.add_subcommand("generate", "sample a synthetic dataset and its ground truth");
  gen_common.add_to(gen);
  std::string gen_out, gen_mode;
  std::optional<std::size_t> gen_n, gen_dim, gen_segments, gen_entities;
  std::optional<std::uint64_t> gen_seed;
  bool gen_binary = false;
  gen->add_option("-o,--out", gen_out, "dataset path; ground truth goes to <path>.truth")->required();
  gen->add_option("--mode", gen_mode, "tccrp or tccrf");
  gen->add_option("--n", gen_n, "number of tracklets");
  gen->add_option("--dim", gen_dim, "feature dimension");
  gen->add_option("--seed", gen_seed, "random seed");
  gen->add_option("--segments", gen_segments, "number of temporal segments");
  gen->add_option("--entities", gen_entities, "fixed atom pool size (0 = unbounded)");
  gen->add_flag("--binary", gen_binary, "binary feature encoding");

  auto* fit = app.add_subcommand("fit", "cluster a dataset");
  fit_common.add_to(fit);
  std::string fit_data, fit_out, fit_trace, fit_mode;
  bool fit_online = false, fit_timing = false, fit_audit = false;
  std::optional<std::size_t> fit_chains, fit_sweeps;
  std::optional<std::uint64_t> fit_seed;
  fit->add_option("dataset", fit_data, "dataset file")->required();
  fit->add_option("-o,--out", fit_out, "result file")->required();
  fit->add_option("--trace", fit_trace, "write the per-sweep log-probability trace as CSV");
  fit->add_option("--mode", fit_mode, "tccrp, tccrf or crp-baseline");
  fit->add_flag("--online", fit_online, "single-pass online inference");
  fit->add_option("--chains", fit_chains, "independent chains (run in parallel)");
  fit->add_option("--seed", fit_seed, "random seed");
  fit->add_option("--sweeps", fit_sweeps, "Gibbs sweeps");
  fit->add_flag("--timing", fit_timing, "add wall-clock seconds per sweep to the trace");
  fit->add_flag("--audit", fit_audit, "recount and constraint-check after every sweep");

  auto* ev = app.add_subcommand("eval", "score a result against the dataset's truth labels");
  eval_common.add_to(ev);
  std::string ev_result, ev_data, ev_out, ev_json;
  ev->add_option("result", ev_result, "result file (from fit, or a .truth sidecar)")->required();
  ev->add_option("dataset", ev_data, "dataset with truth labels")->required();
  ev->add_option("-o,--out", ev_out, "key-value report path (default stdout)");
  ev->add_option("--json", ev_json, "also write the report as JSON");

  auto* sum = app.add_subcommand("summarize", "summarization metrics plus the significant temporal segments");
  sum_common.add_to(sum);
  std::string sum_result, sum_data, sum_out, sum_json;
  sum->add_option("result", sum_result, "result file")->required();
  sum->add_option("dataset", sum_data, "dataset with truth labels")->required();
  sum->add_option("-o,--out", sum_out, "key-value report path (default stdout)");
  sum->add_option("--json", sum_json, "also write the report as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*init) {
      tcc::RunConfig cfg;
      if (init_out.empty()) {
        tcc::write_config(cfg, std::cout);
      } else {
        auto os = open_out(init_out);
        tcc::write_config(cfg, os);
      }
      return kOk;
    }
    if (*gen)
      return run_generate(gen_common, gen_out, gen_mode, gen_n, gen_dim, gen_seed, gen_segments, gen_entities,
                          gen_binary);
    if (*fit)
      return run_fit(fit_common, fit_data, fit_out, fit_trace, fit_mode, fit_online, fit_chains, fit_seed, fit_sweeps,
                     fit_timing, fit_audit);
    if (*ev) return run_eval(eval_common, ev_result, ev_data, ev_out, ev_json, false);
    if (*sum) return run_eval(sum_common, sum_result, sum_data, sum_out, sum_json, true);
  } catch (const tcc::ContractViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const tcc::InvariantViolation& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  } catch (const tcc::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}
