// Copyright 2026 The oqw-hitting Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "oqw/common.hpp"
#include "oqw/density.hpp"

namespace oqw {

// All site indices below are 0-based. Documents and reports use 1-based
// indices; conversion happens only in the parser, serializer and report
// formatting.

struct CoherentEdge {
  int a = 0;
  int b = 0;
  double rabi = 0.0;  // Omega_ab, real and symmetric
  friend bool operator==(const CoherentEdge&, const CoherentEdge&) = default;
};

struct IncoherentEdge {
  int from = 0;
  int to = 0;
  double rate = 0.0;  // k_{to,from}
  friend bool operator==(const IncoherentEdge&, const IncoherentEdge&) = default;
};

struct DephasingLoop {
  int site = 0;
  double rate = 0.0;  // q_site
  friend bool operator==(const DephasingLoop&, const DephasingLoop&) = default;
};

/// Initial state: either a basis site or an explicit density matrix. The
/// site shorthand is remembered so serialization round-trips.
struct InitialState {
  std::optional<int> site;
  DensityMatrix rho;

  static InitialState at_site(int dim, int s) { return {s, DensityMatrix::basis(dim, s)}; }
  static InitialState from_matrix(DensityMatrix r) { return {std::nullopt, std::move(r)}; }

  friend bool operator==(const InitialState& x, const InitialState& y) {
    return x.site == y.site && x.rho == y.rho;
  }
};

/// Immutable description of an open quantum walk.
///
/// The constructor enforces the structural invariants (index ranges,
/// non-negative rates, uniqueness of edges, a valid initial state) and
/// throws ParseError with a document-style path on violation. Whether the
/// graph suits the jump analysis is a separate question answered by
/// validate().
class GraphSpec {
 public:
  GraphSpec(int num_sites, std::vector<double> site_energies, std::vector<CoherentEdge> coherent,
            std::vector<IncoherentEdge> incoherent, std::vector<DephasingLoop> dephasing,
            InitialState initial, int final_site)
      : n_(num_sites),
        energies_(std::move(site_energies)),
        coherent_(std::move(coherent)),
        incoherent_(std::move(incoherent)),
        dephasing_(std::move(dephasing)),
        initial_(std::move(initial)),
        final_(final_site) {
    check();
  }

  int num_sites() const { return n_; }
  int final_site() const { return final_; }
  const std::vector<double>& site_energies() const { return energies_; }
  const std::vector<CoherentEdge>& coherent_edges() const { return coherent_; }
  const std::vector<IncoherentEdge>& incoherent_edges() const { return incoherent_; }
  const std::vector<DephasingLoop>& dephasing_loops() const { return dephasing_; }
  const InitialState& initial_state() const { return initial_; }
  const DensityMatrix& initial_density() const { return initial_.rho; }

  /// Copy with a different initial state (dimension must match).
  GraphSpec with_initial(InitialState s) const {
    return GraphSpec(n_, energies_, coherent_, incoherent_, dephasing_, std::move(s), final_);
  }

  friend bool operator==(const GraphSpec&, const GraphSpec&) = default;

 private:
  static std::string path(const char* field, std::size_t i) {
    return std::string(field) + "[" + std::to_string(i) + "]";
  }

  void fail(const std::string& where, const std::string& what) const {
    throw ParseError(where + ": " + what);
  }

  void check_site(const std::string& where, int s) const {
    if (s < 0 || s >= n_) {
      fail(where, "site index " + std::to_string(s + 1) + " out of range 1.." + std::to_string(n_));
    }
  }

  void check_rate(const std::string& where, double r) const {
    if (!std::isfinite(r)) fail(where, "rate must be finite");
    if (r < 0.0) fail(where, "negative rate");
  }

  void check() const {
    if (n_ < 2) fail("num_sites", "at least 2 sites required");
    if (static_cast<int>(energies_.size()) != n_) {
      fail("site_energies", "expected " + std::to_string(n_) + " entries, got " +
                                std::to_string(energies_.size()));
    }
    for (std::size_t i = 0; i < energies_.size(); ++i) {
      if (!std::isfinite(energies_[i])) fail(path("site_energies", i), "must be finite");
    }
    std::set<std::pair<int, int>> seen;
    for (std::size_t i = 0; i < coherent_.size(); ++i) {
      const auto& e = coherent_[i];
      const auto where = path("coherent_edges", i);
      check_site(where + ".a", e.a);
      check_site(where + ".b", e.b);
      if (e.a == e.b) fail(where, "coherent edge joins a site to itself");
      if (!std::isfinite(e.rabi)) fail(where + ".rabi", "must be finite");
      if (!seen.insert(std::minmax(e.a, e.b)).second) fail(where, "duplicate edge");
    }
    seen.clear();
    for (std::size_t i = 0; i < incoherent_.size(); ++i) {
      const auto& e = incoherent_[i];
      const auto where = path("incoherent_edges", i);
      check_site(where + ".from", e.from);
      check_site(where + ".to", e.to);
      if (e.from == e.to) fail(where, "incoherent edge joins a site to itself (use dephasing)");
      check_rate(where + ".rate", e.rate);
      if (!seen.insert({e.from, e.to}).second) fail(where, "duplicate edge");
    }
    std::set<int> loops;
    for (std::size_t i = 0; i < dephasing_.size(); ++i) {
      const auto& d = dephasing_[i];
      const auto where = path("dephasing", i);
      check_site(where + ".site", d.site);
      check_rate(where + ".rate", d.rate);
      if (!loops.insert(d.site).second) fail(where, "duplicate edge");
    }
    check_site("final_site", final_);
    if (initial_.rho.dim() != n_) fail("initial_state", "dimension does not match num_sites");
    if (initial_.site) check_site("initial_state.index", *initial_.site);
  }

  int n_;
  std::vector<double> energies_;
  std::vector<CoherentEdge> coherent_;
  std::vector<IncoherentEdge> incoherent_;
  std::vector<DephasingLoop> dephasing_;
  InitialState initial_;
  int final_;
};

// ---------------------------------------------------------------------------
// Document format

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key,
                                     const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing key '" + key + "'");
  return *it;
}

inline double as_real(const nlohmann::json& v, const std::string& where) {
  if (v.is_object() || v.is_array()) {
    throw ParseError(where + ": complex or structured values are not supported, expected a real number");
  }
  if (!v.is_number()) throw ParseError(where + ": expected a number");
  return v.get<double>();
}

// 1-based in the document, 0-based on return.
inline int as_site(const nlohmann::json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ParseError(where + ": expected an integer site index");
  const auto i = v.get<long long>();
  if (i < -1000000 || i > 1000000) throw ParseError(where + ": site index out of range");
  return static_cast<int>(i) - 1;
}

inline const nlohmann::json& as_array(const nlohmann::json& v, const std::string& where) {
  if (!v.is_array()) throw ParseError(where + ": expected an array");
  return v;
}

inline CMatrix parse_real_matrix(const nlohmann::json& v, int n, const std::string& where) {
  as_array(v, where);
  if (static_cast<int>(v.size()) != n) {
    throw ParseError(where + ": expected " + std::to_string(n) + " rows");
  }
  CMatrix m(n, n);
  for (int r = 0; r < n; ++r) {
    const auto rw = where + "[" + std::to_string(r) + "]";
    as_array(v[r], rw);
    if (static_cast<int>(v[r].size()) != n) {
      throw ParseError(rw + ": expected " + std::to_string(n) + " columns");
    }
    for (int c = 0; c < n; ++c) m(r, c) = as_real(v[r][c], rw + "[" + std::to_string(c) + "]");
  }
  return m;
}

}  // namespace detail

/// Parses a graph-spec JSON document.
///
/// Keys: num_sites (required), site_energies (default all zero),
/// coherent_edges [{a,b,rabi}], incoherent_edges [{from,to,rate}],
/// dephasing [{site,rate}], initial_state ({"kind":"site","index":i} or
/// {"kind":"matrix","re":[[..]],"im":[[..]]}, default site 1), final_site
/// (default num_sites). Indices are 1-based.
inline GraphSpec parse_graph(const std::string& text) {
  using detail::as_array;
  using detail::as_real;
  using detail::as_site;
  using detail::require;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("document: malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("document: expected a JSON object");

  const auto& ns = require(doc, "num_sites", "document");
  if (!ns.is_number_integer()) throw ParseError("num_sites: expected an integer");
  const long long n_ll = ns.get<long long>();
  if (n_ll < 2 || n_ll > 4096) throw ParseError("num_sites: must be between 2 and 4096");
  const int n = static_cast<int>(n_ll);

  std::vector<double> energies(n, 0.0);
  if (auto it = doc.find("site_energies"); it != doc.end()) {
    as_array(*it, "site_energies");
    if (static_cast<int>(it->size()) != n) {
      throw ParseError("site_energies: expected " + std::to_string(n) + " entries");
    }
    for (int i = 0; i < n; ++i) {
      energies[i] = as_real((*it)[i], "site_energies[" + std::to_string(i) + "]");
    }
  }

  auto parse_list = [&](const char* key, auto&& fn) {
    auto it = doc.find(key);
    if (it == doc.end()) return;
    as_array(*it, key);
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto where = std::string(key) + "[" + std::to_string(i) + "]";
      if (!(*it)[i].is_object()) throw ParseError(where + ": expected an object");
      fn((*it)[i], where);
    }
  };

  std::vector<CoherentEdge> coherent;
  parse_list("coherent_edges", [&](const nlohmann::json& e, const std::string& w) {
    coherent.push_back({as_site(require(e, "a", w), w + ".a"), as_site(require(e, "b", w), w + ".b"),
                        as_real(require(e, "rabi", w), w + ".rabi")});
  });
  std::vector<IncoherentEdge> incoherent;
  parse_list("incoherent_edges", [&](const nlohmann::json& e, const std::string& w) {
    incoherent.push_back({as_site(require(e, "from", w), w + ".from"),
                          as_site(require(e, "to", w), w + ".to"),
                          as_real(require(e, "rate", w), w + ".rate")});
  });
  std::vector<DephasingLoop> dephasing;
  parse_list("dephasing", [&](const nlohmann::json& e, const std::string& w) {
    dephasing.push_back(
        {as_site(require(e, "site", w), w + ".site"), as_real(require(e, "rate", w), w + ".rate")});
  });

  int final_site = n - 1;
  if (auto it = doc.find("final_site"); it != doc.end()) final_site = as_site(*it, "final_site");

  InitialState initial = InitialState::at_site(n, 0);
  if (auto it = doc.find("initial_state"); it != doc.end()) {
    const auto& s = *it;
    if (!s.is_object()) throw ParseError("initial_state: expected an object");
    const auto& kind = require(s, "kind", "initial_state");
    if (!kind.is_string()) throw ParseError("initial_state.kind: expected a string");
    if (kind == "site") {
      const int idx = as_site(require(s, "index", "initial_state"), "initial_state.index");
      if (idx < 0 || idx >= n) {
        throw ParseError("initial_state.index: site index " + std::to_string(idx + 1) +
                         " out of range 1.." + std::to_string(n));
      }
      initial = InitialState::at_site(n, idx);
    } else if (kind == "matrix") {
      CMatrix m = detail::parse_real_matrix(require(s, "re", "initial_state"), n, "initial_state.re");
      if (auto im = s.find("im"); im != s.end()) {
        m += Complex(0, 1) * detail::parse_real_matrix(*im, n, "initial_state.im");
      }
      try {
        initial = InitialState::from_matrix(DensityMatrix::validated(m));
      } catch (const std::invalid_argument& e) {
        throw ParseError(std::string("initial_state: ") + e.what());
      }
    } else {
      throw ParseError("initial_state.kind: expected \"site\" or \"matrix\"");
    }
  }

  return GraphSpec(n, std::move(energies), std::move(coherent), std::move(incoherent),
                   std::move(dephasing), std::move(initial), final_site);
}

inline nlohmann::json to_json(const GraphSpec& g) {
  nlohmann::json doc;
  doc["num_sites"] = g.num_sites();
  doc["site_energies"] = g.site_energies();
  doc["coherent_edges"] = nlohmann::json::array();
  for (const auto& e : g.coherent_edges()) {
    doc["coherent_edges"].push_back({{"a", e.a + 1}, {"b", e.b + 1}, {"rabi", e.rabi}});
  }
  doc["incoherent_edges"] = nlohmann::json::array();
  for (const auto& e : g.incoherent_edges()) {
    doc["incoherent_edges"].push_back({{"from", e.from + 1}, {"to", e.to + 1}, {"rate", e.rate}});
  }
  doc["dephasing"] = nlohmann::json::array();
  for (const auto& d : g.dephasing_loops()) {
    doc["dephasing"].push_back({{"site", d.site + 1}, {"rate", d.rate}});
  }
  const auto& init = g.initial_state();
  if (init.site) {
    doc["initial_state"] = {{"kind", "site"}, {"index", *init.site + 1}};
  } else {
    const auto& m = init.rho.matrix();
    nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
    for (int r = 0; r < m.rows(); ++r) {
      std::vector<double> rr, ii;
      for (int c = 0; c < m.cols(); ++c) {
        rr.push_back(m(r, c).real());
        ii.push_back(m(r, c).imag());
      }
      re.push_back(rr);
      im.push_back(ii);
    }
    doc["initial_state"] = {{"kind", "matrix"}, {"re", re}, {"im", im}};
  }
  doc["final_site"] = g.final_site() + 1;
  return doc;
}

/// Canonical document text (sorted keys, round-trip number formatting).
inline std::string serialize_graph(const GraphSpec& g, int indent = 2) {
  return to_json(g).dump(indent);
}

inline GraphSpec load_graph_file(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw std::ios_base::failure("cannot open graph file '" + file + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_graph(ss.str());
}

/// 64-bit FNV-1a of the compact canonical serialization, as 16 hex digits.
inline std::string fingerprint(const GraphSpec& g) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : to_json(g).dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// ---------------------------------------------------------------------------
// Diagnosis

struct ValidationReport {
  std::vector<CoherentEdge> coherent_final_edges;  // coherent edges touching the final site
  double initial_final_population = 0.0;            // <psi_f|rho_i|psi_f>
  bool final_unreachable = false;                   // no incoherent in-edge with positive rate

  bool clean() const { return coherent_final_edges.empty(); }
  bool initial_state_off_final() const { return std::abs(initial_final_population) <= 1e-12; }

  std::vector<std::string> messages() const {
    std::vector<std::string> out;
    for (const auto& e : coherent_final_edges) {
      out.push_back("violation: coherent edge " + std::to_string(e.a + 1) + "<->" +
                    std::to_string(e.b + 1) +
                    " touches the final site (jumps cannot detect it); remedy: extend the graph "
                    "with a fictitious site (nplus1)");
    }
    if (!initial_state_off_final()) {
      std::ostringstream os;
      os << std::setprecision(17) << "note: initial state has population "
         << initial_final_population
         << " on the final site (discrete-walk comparison requires zero)";
      out.push_back(os.str());
    }
    if (final_unreachable) {
      out.push_back(
          "warning: no incoherent edge enters the final site; the hitting density is identically "
          "zero");
    }
    return out;
  }
};

inline ValidationReport validate(const GraphSpec& g) {
  ValidationReport r;
  const int f = g.final_site();
  for (const auto& e : g.coherent_edges()) {
    if (e.a == f || e.b == f) r.coherent_final_edges.push_back(e);
  }
  r.initial_final_population = g.initial_density().population(f);
  r.final_unreachable = true;
  for (const auto& e : g.incoherent_edges()) {
    if (e.to == f && e.rate > 0.0) r.final_unreachable = false;
  }
  return r;
}

/// Adds a fictitious site N+1 fed by an incoherent edge from the old final
/// site with rate v; the new site becomes the final site. Existing edges are
/// untouched and the initial state is zero padded.
inline GraphSpec extend_with_fictitious(const GraphSpec& g, double v) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument("fictitious-site rate v must be positive and finite");
  }
  const int n = g.num_sites();
  auto energies = g.site_energies();
  energies.push_back(0.0);
  auto incoherent = g.incoherent_edges();
  incoherent.push_back({g.final_site(), n, v});
  const auto& init = g.initial_state();
  InitialState ext = init.site ? InitialState::at_site(n + 1, *init.site)
                               : InitialState::from_matrix(init.rho.embedded(n + 1));
  return GraphSpec(n + 1, std::move(energies), g.coherent_edges(), std::move(incoherent),
                   g.dephasing_loops(), std::move(ext), n);
}

}  // namespace oqw
