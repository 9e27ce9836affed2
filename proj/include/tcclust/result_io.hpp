#pragma once

#include <fstream>
#include <sstream>

#include "tcclust/dataset_io.hpp"
#include "tcclust/inference.hpp"

namespace tcc {

inline constexpr std::string_view kResultMagic = "#tcclust-result v1";

// A fitted (or true) labelling keyed by tracklet id, plus the atoms it uses.
struct ResultFile {
  Mode mode = Mode::tccrp;
  std::size_t dim = 0;
  std::vector<std::int64_t> ids;
  std::vector<Label> z;
  std::vector<std::uint8_t> c;
  std::vector<Atom> atoms;
};

inline ResultFile make_result(const std::vector<TrackletRecord>& records, const ModelState& state, Mode mode,
                              std::size_t dim) {
  require(records.size() == state.size(), "make_result: record and state sizes differ");
  ResultFile r;
  r.mode = mode;
  r.dim = dim;
  for (std::size_t i = 0; i < records.size(); ++i) {
    r.ids.push_back(records[i].id);
    r.z.push_back(state.z[i]);
    r.c.push_back(state.c[i]);
  }
  for (const auto& [k, comp] : state.components)
    if (comp.n > 0) r.atoms.push_back({k, comp.n, comp.phi});
  return r;
}

inline void write_result(const ResultFile& r, std::ostream& os) {
  os << kResultMagic << '\n';
  os << "mode " << to_string(r.mode) << '\n';
  os << "dim " << r.dim << '\n';
  os << "assignments " << r.ids.size() << '\n';
  for (std::size_t i = 0; i < r.ids.size(); ++i) os << r.ids[i] << ' ' << r.z[i] << ' ' << int(r.c[i]) << '\n';
  os << "atoms " << r.atoms.size() << '\n';
  for (const auto& a : r.atoms) {
    os << a.k << ' ' << a.n;
    for (double v : a.phi) os << ' ' << detail::format_double(v, 17);
    os << '\n';
  }
  os << "end\n";
}

inline ResultFile read_result(std::istream& is) {
  ResultFile r;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) -> void {
    throw ParseError("line " + std::to_string(lineno), what);
  };
  auto next = [&]() -> std::vector<std::string_view> {
    if (!std::getline(is, line)) {
      ++lineno;
      fail("unexpected end of result file");
    }
    ++lineno;
    return detail::split_ws(line);
  };
  auto num = [&](std::string_view s, auto& out) {
    std::istringstream ss{std::string(s)};
    if (!(ss >> out) || !ss.eof()) fail("malformed number '" + std::string(s) + "'");
  };
  if (!std::getline(is, line) || line != kResultMagic) {
    lineno = 1;
    fail("not a tcclust result file");
  }
  ++lineno;
  auto t = next();
  if (t.size() != 2 || t[0] != "mode") fail("expected 'mode'");
  const auto m = parse_mode(t[1]);
  if (!m) fail("unknown mode '" + std::string(t[1]) + "'");
  r.mode = *m;
  t = next();
  if (t.size() != 2 || t[0] != "dim") fail("expected 'dim'");
  num(t[1], r.dim);
  t = next();
  if (t.size() != 2 || t[0] != "assignments") fail("expected 'assignments'");
  std::size_t n = 0;
  num(t[1], n);
  for (std::size_t i = 0; i < n; ++i) {
    t = next();
    if (t.size() != 3) fail("assignment line needs 'id z c'");
    std::int64_t id;
    Label z;
    int c;
    num(t[0], id);
    num(t[1], z);
    num(t[2], c);
    if (z < 0 || (c != 0 && c != 1)) fail("assignment out of range");
    r.ids.push_back(id);
    r.z.push_back(z);
    r.c.push_back(static_cast<std::uint8_t>(c));
  }
  t = next();
  if (t.size() != 2 || t[0] != "atoms") fail("expected 'atoms'");
  num(t[1], n);
  for (std::size_t a = 0; a < n; ++a) {
    t = next();
    if (t.size() != r.dim + 2) fail("atom line needs 'k n' plus " + std::to_string(r.dim) + " values");
    Atom atom;
    num(t[0], atom.k);
    num(t[1], atom.n);
    atom.phi.resize(r.dim);
    for (std::size_t d = 0; d < r.dim; ++d) num(t[d + 2], atom.phi[d]);
    r.atoms.push_back(std::move(atom));
  }
  t = next();
  if (t.size() != 1 || t[0] != "end") fail("expected 'end'");
  return r;
}

inline void write_result(const ResultFile& r, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  write_result(r, os);
  if (!os) throw DataError("write to '" + path + "' failed");
}

inline ResultFile read_result(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path + "'");
  return read_result(is);
}

// Labels of `result` in dataset order; throws naming the first id that does not line up.
inline std::vector<Label> align_result(const ResultFile& result, const std::vector<TrackletRecord>& records) {
  const std::size_t n = std::min(result.ids.size(), records.size());
  for (std::size_t i = 0; i < n; ++i)
    if (result.ids[i] != records[i].id)
      throw DataError("id mismatch at position " + std::to_string(i) + ": result has " +
                      std::to_string(result.ids[i]) + ", dataset has " + std::to_string(records[i].id));
  if (result.ids.size() != records.size()) {
    const std::int64_t first = result.ids.size() > n ? result.ids[n] : records[n].id;
    throw DataError("id mismatch: result has " + std::to_string(result.ids.size()) + " tracklets, dataset has " +
                    std::to_string(records.size()) + "; first unmatched id " + std::to_string(first));
  }
  return result.z;
}

inline void write_trace_csv(const FitResult& fit, std::ostream& os) {
  const bool timing = !fit.sweep_seconds.empty();
  os << "sweep,log_prob" << (timing ? ",seconds" : "") << '\n';
  for (std::size_t s = 0; s < fit.trace.size(); ++s) {
    os << s << ',' << detail::format_double(fit.trace[s], 17);
    if (timing) os << ',' << detail::format_double(fit.sweep_seconds[s], 6);
    os << '\n';
  }
}

}  // namespace tcc
