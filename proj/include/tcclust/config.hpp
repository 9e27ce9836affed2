#pragma once

#include <fstream>
#include <functional>
#include <sstream>

#include "tcclust/inference.hpp"
#include "tcclust/synthesis.hpp"

namespace tcc {

// Everything a CLI run needs. Persisted as "key = value" lines; '#' starts a comment.
struct RunConfig {
  FitConfig fit;
  SynthesisPlan plan;
  std::size_t chains = 1;
  // Linking radius for detection aggregation, as a fraction of box width.
  double locality = 0.5;

  RunConfig() {
    fit.hyper = HyperParams::isotropic(plan.dim, 0.0, 25.0, 1.0);
  }

  void validate() const {
    fit.validate();
    plan.validate(fit.hyper);
    require(chains >= 1, "config: chains must be >= 1");
    require(locality > 0, "config: locality must be > 0");
  }
};

namespace detail {

inline std::string join_vector(const Vector& v) {
  // Isotropic vectors collapse to one scalar.
  if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); })) return format_double(v.front(), 17);
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i], 17);
  return s;
}

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

inline double to_real(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(x))
    throw ContractViolation("config: '" + key + "' expects a real number, got '" + v + "'");
  return x;
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
    throw ContractViolation("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  return x;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ContractViolation("config: '" + key + "' expects true or false, got '" + v + "'");
}

inline Vector to_vector(const std::string& key, const std::string& v) {
  Vector out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_real(key, item));
  if (out.empty()) throw ContractViolation("config: '" + key + "' needs at least one value");
  return out;
}

inline const std::vector<ConfigKey>& config_keys() {
  using C = RunConfig;
  auto real = [](const char* name, const char* help, auto member) {
    return ConfigKey{name, help, [member](const C& c) { return format_double(member(const_cast<C&>(c)), 17); },
                     [member, name](C& c, const std::string& v) { member(c) = to_real(name, v); }};
  };
  auto uint = [](const char* name, const char* help, auto member) {
    return ConfigKey{name, help, [member](const C& c) { return std::to_string(member(const_cast<C&>(c))); },
                     [member, name](C& c, const std::string& v) {
                       member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(to_uint(name, v));
                     }};
  };
  auto flag = [](const char* name, const char* help, auto member) {
    return ConfigKey{name, help, [member](const C& c) { return std::string(member(const_cast<C&>(c)) ? "true" : "false"); },
                     [member, name](C& c, const std::string& v) { member(c) = to_bool(name, v); }};
  };
  auto vec = [](const char* name, const char* help, auto member) {
    return ConfigKey{name, help, [member](const C& c) { return join_vector(member(const_cast<C&>(c))); },
                     [member, name](C& c, const std::string& v) { member(c) = to_vector(name, v); }};
  };
  static const std::vector<ConfigKey> keys = {
      ConfigKey{"mode", "tccrp | tccrf | crp-baseline",
                [](const C& c) { return std::string(to_string(c.fit.mode)); },
                [](C& c, const std::string& v) {
                  const auto m = parse_mode(v);
                  if (!m) throw ContractViolation("config: 'mode' must be tccrp, tccrf or crp-baseline, got '" + v + "'");
                  c.fit.mode = *m;
                }},
      uint("seed", "random seed shared by generate and fit", [](C& c) -> auto& { return c.plan.seed; }),
      uint("dim", "feature dimension d", [](C& c) -> auto& { return c.plan.dim; }),
      vec("mu", "prior mean of atoms (scalar or d comma-separated values)", [](C& c) -> auto& { return c.fit.hyper.mu; }),
      vec("sigma0", "prior variance of atoms, per dimension", [](C& c) -> auto& { return c.fit.hyper.sigma0; }),
      vec("sigma1", "emission variance, per dimension", [](C& c) -> auto& { return c.fit.hyper.sigma1; }),
      real("c", "junk variance multiplier (> 1)", [](C& c) -> auto& { return c.fit.hyper.c; }),
      real("alpha", "CRP concentration", [](C& c) -> auto& { return c.fit.hyper.alpha; }),
      real("beta", "junk component weight", [](C& c) -> auto& { return c.fit.hyper.beta; }),
      real("gamma", "IBP concentration", [](C& c) -> auto& { return c.fit.hyper.gamma; }),
      real("kappa1", "change probability for close predecessors", [](C& c) -> auto& { return c.fit.hyper.kappa1; }),
      real("kappa2", "change probability for distant predecessors", [](C& c) -> auto& { return c.fit.hyper.kappa2; }),
      real("thres", "predecessor distance threshold", [](C& c) -> auto& { return c.fit.hyper.thres; }),
      uint("segment_gap", "start-frame gap that opens a new segment", [](C& c) -> auto& { return c.fit.hyper.segment_gap; }),
      real("distance_pixel_weight", "weight of centre displacement (pixels) in predecessor distance",
           [](C& c) -> auto& { return c.fit.hyper.distance_pixel_weight; }),
      uint("min_cluster_size", "smallest significant cluster", [](C& c) -> auto& { return c.fit.hyper.min_cluster_size; }),
      real("purity_threshold", "majority fraction for a pure cluster", [](C& c) -> auto& { return c.fit.hyper.purity_threshold; }),
      uint("min_segment_frames", "shortest significant temporal segment",
           [](C& c) -> auto& { return c.fit.hyper.min_segment_frames; }),
      uint("n_sweeps", "Gibbs sweeps", [](C& c) -> auto& { return c.fit.n_sweeps; }),
      uint("burn_in", "sweeps before hyperparameter updates start", [](C& c) -> auto& { return c.fit.burn_in; }),
      flag("online", "single-pass online inference", [](C& c) -> auto& { return c.fit.online; }),
      uint("online_samples", "samples per record in online mode", [](C& c) -> auto& { return c.fit.online_samples_per_point; }),
      flag("hyper_update", "re-estimate mu and sigma0 after burn-in", [](C& c) -> auto& { return c.fit.hyper_update_enabled; }),
      uint("chains", "independent chains run in parallel", [](C& c) -> auto& { return c.chains; }),
      uint("n_tracklets", "generate: number of tracklets", [](C& c) -> auto& { return c.plan.n_tracklets; }),
      uint("segments", "generate: number of temporal segments", [](C& c) -> auto& { return c.plan.n_segments; }),
      uint("entities", "generate: fixed atom pool size (0 = unbounded)", [](C& c) -> auto& { return c.plan.n_entities; }),
      real("min_separation", "generate: minimum distance between atoms", [](C& c) -> auto& { return c.plan.min_separation; }),
      uint("tracklet_length", "frames per tracklet (R)", [](C& c) -> auto& { return c.plan.layout.tracklet_length; }),
      real("mean_chain_length", "generate: mean tracklets per chain", [](C& c) -> auto& { return c.plan.layout.mean_chain_length; }),
      real("overlap_rate", "generate: frame-overlap injection rate", [](C& c) -> auto& { return c.plan.layout.overlap_rate; }),
      uint("max_chain_gap", "generate: largest frame gap between chains", [](C& c) -> auto& { return c.plan.layout.max_chain_gap; }),
      real("locality", "aggregation: linking radius as a fraction of box width", [](C& c) -> auto& { return c.locality; }),
  };
  return keys;
}

inline std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

// Applies one key; throws ContractViolation naming the key on unknown keys or bad values.
inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : detail::config_keys())
    if (k.name == key) {
      k.set(cfg, value);
      return;
    }
  throw ContractViolation("config: unknown key '" + key + "'");
}

// Stretches constant (isotropic) mu / sigma entries to the configured dimension.
inline void expand_dimensions(RunConfig& cfg) {
  const std::size_t d = cfg.plan.dim;
  require(d >= 1, "config: dim must be >= 1");
  for (Vector* v : {&cfg.fit.hyper.mu, &cfg.fit.hyper.sigma0, &cfg.fit.hyper.sigma1}) {
    const bool constant = !v->empty() && std::all_of(v->begin(), v->end(), [&](double x) { return x == v->front(); });
    if (constant && v->size() != d) v->assign(d, v->front());
    require(v->size() == d, "config: mu, sigma0 and sigma1 need 1 or " + std::to_string(d) + " values");
  }
}

inline RunConfig parse_config(std::istream& is, const std::string& source = "config") {
  RunConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ContractViolation(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    try {
      set_config_value(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    } catch (const ContractViolation& e) {
      throw ContractViolation(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ContractViolation("cannot open config file '" + path + "'");
  return parse_config(is, path);
}

inline void write_config(const RunConfig& cfg, std::ostream& os) {
  os << "# tcclust run configuration\n";
  for (const auto& k : detail::config_keys()) os << "# " << k.help << '\n' << k.name << " = " << k.get(cfg) << '\n';
}

}  // namespace tcc
