#pragma once
// Versioned, bit-stable persistence.
//
// Every artifact is a single JSON document {schema, payload, provenance}.
// Serialization is fully canonical: insertion-ordered keys, LF newlines,
// C-locale decimal floats printed with 17 significant digits (%.16e), so a
// reload re-serializes byte-for-byte and content hashes are stable across
// platforms. The provenance carries an FNV-1a 64 hash of the canonical
// payload text; manifests reference artifacts by that hash. Timestamps are
// empty in serial (reproducible) mode and only filled on request.
//
// Canonical array order follows construction order, which for vertices is
// ascending class id and for edges ascending (min,max) pre-quotient key;
// faces keep construction order and store their sorted class triple, since
// distinct coarse faces can share one triple.
//
// Surfaces are persisted as their generating parameters plus a full derived
// snapshot: the construction is deterministic long-double arithmetic, so the
// loader rebuilds from (genus, refinement) and cross-checks the snapshot
// bit-for-bit rather than trusting stored geometry.

#include "dec.hpp"
#include "extract.hpp"
#include "harmonic.hpp"
#include "spacetime.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string_view>

namespace hitchlab::store {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Canonical text encoding.

inline std::string format_double(double x) {
  if (!std::isfinite(x)) throw invariant_error("store: non-finite float cannot be serialized");
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.16e", x);
  return std::string(buf);
}

namespace detail {

inline void emit_string(const std::string& s, std::string& out) {
  out += '"';
  for (const char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  out += '"';
}

inline bool inline_array(const ordered_json& a) {
  if (a.size() > 12) return false;
  for (const auto& v : a)
    if (v.is_structured()) return false;
  return true;
}

inline void emit(const ordered_json& j, std::string& out, int depth) {
  const std::string pad(static_cast<size_t>(2 * depth), ' ');
  const std::string pad1(static_cast<size_t>(2 * (depth + 1)), ' ');
  switch (j.type()) {
    case ordered_json::value_t::null: out += "null"; break;
    case ordered_json::value_t::boolean: out += j.get<bool>() ? "true" : "false"; break;
    case ordered_json::value_t::number_integer:
      out += std::to_string(j.get<long long>());
      break;
    case ordered_json::value_t::number_unsigned:
      out += std::to_string(j.get<unsigned long long>());
      break;
    case ordered_json::value_t::number_float: out += format_double(j.get<double>()); break;
    case ordered_json::value_t::string: emit_string(j.get<std::string>(), out); break;
    case ordered_json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        break;
      }
      if (inline_array(j)) {
        out += '[';
        bool first = true;
        for (const auto& v : j) {
          if (!first) out += ", ";
          first = false;
          emit(v, out, depth + 1);
        }
        out += ']';
        break;
      }
      out += "[\n";
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ",\n";
        first = false;
        out += pad1;
        emit(v, out, depth + 1);
      }
      out += '\n';
      out += pad;
      out += ']';
      break;
    }
    case ordered_json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        break;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad1;
        emit_string(it.key(), out);
        out += ": ";
        emit(it.value(), out, depth + 1);
      }
      out += '\n';
      out += pad;
      out += '}';
      break;
    }
    default: throw invariant_error("store: unsupported JSON value type");
  }
}

}  // namespace detail

inline std::string canonical_dump(const ordered_json& j) {
  std::string out;
  detail::emit(j, out, 0);
  return out;
}

inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// Documents.

struct SaveOptions {
  bool stamp = false;  // serial mode leaves timestamps empty for bit-stability
  ordered_json inputs = ordered_json::object();  // upstream label -> payload hash
};

inline std::string timestamp_utc() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
  return std::string(buf);
}

inline void atomic_write(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw invariant_error("store: cannot open '" + tmp + "' for writing");
    f << text;
    if (!f.good()) throw invariant_error("store: write failure on '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

// returns the payload content hash
inline std::string save_document(const std::string& schema, const ordered_json& payload,
                                 const std::string& path, const SaveOptions& opt = {}) {
  const std::string hash = fnv1a_hex(canonical_dump(payload));
  ordered_json doc;
  doc["schema"] = schema;
  doc["payload"] = payload;
  ordered_json prov;
  prov["content_hash"] = hash;
  prov["created"] = opt.stamp ? timestamp_utc() : "";
  prov["tool"] = "hitchlab/0.1";
  if (!opt.inputs.empty()) prov["inputs"] = opt.inputs;
  doc["provenance"] = prov;
  atomic_write(path, canonical_dump(doc) + "\n");
  return hash;
}

inline ordered_json read_document(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw missing_input_error("store: cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  ordered_json doc;
  try {
    doc = ordered_json::parse(ss.str());
  } catch (const std::exception& e) {
    throw invariant_error("store: parse failure in '" + path + "': " + e.what());
  }
  if (!doc.is_object() || !doc.contains("schema") || !doc.contains("payload") ||
      !doc.contains("provenance"))
    throw invariant_error("store: '" + path + "' is not a {schema, payload, provenance} document");
  return doc;
}

// verifies schema name and the payload content hash, returns the payload
inline ordered_json load_document(const std::string& path, const std::string& expected_schema) {
  const ordered_json doc = read_document(path);
  const std::string schema = doc["schema"].get<std::string>();
  if (schema != expected_schema)
    throw invariant_error("store: schema version mismatch in '" + path + "': found '" + schema +
                          "', expected '" + expected_schema + "'");
  const std::string stored = doc["provenance"].value("content_hash", "");
  const std::string actual = fnv1a_hex(canonical_dump(doc["payload"]));
  if (stored != actual)
    throw invariant_error("store: content hash mismatch in '" + path + "' (stored " + stored +
                          ", recomputed " + actual + ")");
  return doc["payload"];
}

inline std::string payload_hash_of(const std::string& path) {
  const ordered_json doc = read_document(path);
  return fnv1a_hex(canonical_dump(doc["payload"]));
}

// ---------------------------------------------------------------------------
// Typed payloads: small helpers.

namespace detail {

inline ordered_json vec_to_json(const Eigen::VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Eigen::VectorXd json_to_vec(const ordered_json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  Eigen::Index i = 0;
  for (const auto& x : a) v[i++] = x.get<double>();
  return v;
}

inline ordered_json mat3_to_json(const Mat3d& M) {
  ordered_json a = ordered_json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(M(r, c));
  return a;
}

inline Mat3d json_to_mat3(const ordered_json& a) {
  if (a.size() != 9) throw invariant_error("store: matrix entry count is not 9");
  Mat3d M;
  int k = 0;
  for (const auto& x : a) {
    M(k / 3, k % 3) = x.get<double>();
    ++k;
  }
  return M;
}

inline ordered_json dvec_to_json(const std::vector<double>& v) {
  ordered_json a = ordered_json::array();
  for (const double x : v) a.push_back(x);
  return a;
}

inline std::vector<double> json_to_dvec(const ordered_json& a) {
  std::vector<double> v;
  v.reserve(a.size());
  for (const auto& x : a) v.push_back(x.get<double>());
  return v;
}

inline ordered_json ivec_to_json(const std::vector<int>& v) {
  ordered_json a = ordered_json::array();
  for (const int x : v) a.push_back(x);
  return a;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// surface/v1

inline ordered_json surface_payload(const TriangulatedSurface& m) {
  ordered_json p;
  p["genus"] = m.genus;
  p["refinement"] = m.refinement;
  p["base_prerefine"] = m.base_prerefine;
  p["V"] = m.V;
  p["E"] = m.E;
  p["F"] = m.F;
  p["euler_characteristic"] = m.euler_characteristic();
  p["total_area"] = m.total_area();
  p["mean_edge_length"] = m.mean_edge_length();
  // canonical listing order: edges by (min,max) endpoint pair, faces by
  // sorted vertex triple (id as tiebreak for parallel cells); each row carries
  // its construction-order id, which is what every other schema indexes by
  std::vector<int> eperm(static_cast<size_t>(m.E));
  for (int e = 0; e < m.E; ++e) eperm[static_cast<size_t>(e)] = e;
  std::sort(eperm.begin(), eperm.end(), [&](int a, int b) {
    const auto ka = std::minmax(m.esrc[static_cast<size_t>(a)], m.edst[static_cast<size_t>(a)]);
    const auto kb = std::minmax(m.esrc[static_cast<size_t>(b)], m.edst[static_cast<size_t>(b)]);
    return ka != kb ? ka < kb : a < b;
  });
  ordered_json edges = ordered_json::array();
  for (const int e : eperm)
    edges.push_back(
        ordered_json::array({e, m.esrc[static_cast<size_t>(e)], m.edst[static_cast<size_t>(e)]}));
  p["edges"] = edges;
  std::vector<int> fperm(static_cast<size_t>(m.F));
  for (int f = 0; f < m.F; ++f) fperm[static_cast<size_t>(f)] = f;
  auto triple = [&](int f) {
    std::array<int, 3> s{m.faces[static_cast<size_t>(f)].vclass[0],
                         m.faces[static_cast<size_t>(f)].vclass[1],
                         m.faces[static_cast<size_t>(f)].vclass[2]};
    std::sort(s.begin(), s.end());
    return s;
  };
  std::sort(fperm.begin(), fperm.end(), [&](int a, int b) {
    const auto ka = triple(a), kb = triple(b);
    return ka != kb ? ka < kb : a < b;
  });
  ordered_json faces = ordered_json::array();
  for (const int fi : fperm) {
    const auto& f = m.faces[static_cast<size_t>(fi)];
    ordered_json fo;
    fo["id"] = fi;
    ordered_json eids = ordered_json::array(), sgns = ordered_json::array();
    for (const auto& [eid, sgn] : f.trip) {
      eids.push_back(eid);
      sgns.push_back(sgn);
    }
    fo["edges"] = eids;
    fo["signs"] = sgns;
    fo["vclass"] = ordered_json::array({f.vclass[0], f.vclass[1], f.vclass[2]});
    const auto s = triple(fi);
    fo["sorted_triple"] = ordered_json::array({s[0], s[1], s[2]});
    faces.push_back(fo);
  }
  p["faces"] = faces;
  ordered_json pos = ordered_json::array();
  for (const auto& x : m.vertex_pos) pos.push_back(ordered_json::array({x[0], x[1], x[2]}));
  p["vertex_pos"] = pos;
  p["edge_length"] = detail::dvec_to_json(m.edge_length);
  p["face_area"] = detail::dvec_to_json(m.face_area);
  p["vertex_weight"] = detail::dvec_to_json(m.vertex_weight);
  p["edge_weight_raw"] = detail::dvec_to_json(m.edge_weight_raw);
  return p;
}

inline std::string save_surface(const TriangulatedSurface& m, const std::string& path,
                                const SaveOptions& opt = {}) {
  return save_document("surface/v1", surface_payload(m), path, opt);
}

// rebuilds deterministically from (genus, refinement) and cross-checks the
// stored snapshot; any disagreement is treated as corruption
inline TriangulatedSurface load_surface(const std::string& path) {
  const ordered_json p = load_document(path, "surface/v1");
  TriangulatedSurface m = build_surface(p["genus"].get<int>(), p["refinement"].get<int>());
  const ordered_json q = surface_payload(m);
  if (canonical_dump(q) != canonical_dump(p))
    throw invariant_error("store: stored surface disagrees with its deterministic rebuild");
  return m;
}

// ---------------------------------------------------------------------------
// rep/v1

inline ordered_json rep_payload(const SurfaceRep& rep) {
  ordered_json p;
  p["genus"] = rep.genus;
  ordered_json gens = ordered_json::array();
  for (const auto& G : rep.generators) gens.push_back(detail::mat3_to_json(G));
  p["generators"] = gens;
  ordered_json tr = ordered_json::array();
  for (const auto& T : rep.transports) tr.push_back(detail::mat3_to_json(T));
  p["transports"] = tr;
  p["relator_residual"] = rep.relator_residual;
  p["euler_class"] = rep.euler_class;
  p["euler_residual"] = rep.euler_residual;
  p["irreducible"] = rep.irreducible;
  return p;
}

inline std::string save_rep(const SurfaceRep& rep, const std::string& path,
                            const SaveOptions& opt = {}) {
  return save_document("rep/v1", rep_payload(rep), path, opt);
}

inline SurfaceRep load_rep(const std::string& path, const TriangulatedSurface& m) {
  const ordered_json p = load_document(path, "rep/v1");
  SurfaceRep rep;
  rep.genus = p["genus"].get<int>();
  if (rep.genus != m.genus) throw invariant_error("store: rep genus does not match the surface");
  for (const auto& g : p["generators"]) rep.generators.push_back(detail::json_to_mat3(g));
  for (const auto& t : p["transports"]) rep.transports.push_back(detail::json_to_mat3(t));
  if (static_cast<int>(rep.transports.size()) != m.E)
    throw invariant_error("store: rep transport count does not match the surface");
  if (static_cast<int>(rep.generators.size()) != 2 * rep.genus)
    throw invariant_error("store: rep generator count is not 2g");
  rep.relator_residual = p["relator_residual"].get<double>();
  rep.euler_class = p["euler_class"].get<int>();
  rep.euler_residual = p["euler_residual"].get<double>();
  rep.irreducible = p["irreducible"].get<bool>();
  // semantic revalidation: corrupted numbers surface here as invariants
  for (const auto& G : rep.generators)
    if (!is_so21(G, 1e-8)) throw invariant_error("store: loaded generator is not in SO(2,1)");
  const double rr = relator_defect(rep.generators);
  if (rr > 1e-8)
    throw invariant_error("store: loaded rep fails the surface-group relator (residual " +
                          format_double(rr) + ")");
  const double fc = face_curvature(m, rep.transports);
  if (fc > 1e-8)
    throw invariant_error("store: loaded transports are not flat (face curvature " +
                          format_double(fc) + ")");
  return rep;
}

// ---------------------------------------------------------------------------
// cochain/v1

inline ordered_json cochain_payload(const Cochain& c, const TriangulatedSurface& m) {
  ordered_json p;
  p["genus"] = m.genus;
  p["refinement"] = m.refinement;
  p["degree"] = c.degree;
  p["values"] = detail::vec_to_json(c.values);
  return p;
}

inline std::string save_cochain(const Cochain& c, const TriangulatedSurface& m,
                                const std::string& path, const SaveOptions& opt = {}) {
  return save_document("cochain/v1", cochain_payload(c, m), path, opt);
}

inline Cochain load_cochain(const std::string& path, const TriangulatedSurface& m) {
  const ordered_json p = load_document(path, "cochain/v1");
  Cochain c;
  c.degree = p["degree"].get<int>();
  c.values = detail::json_to_vec(p["values"]);
  const int cells = c.degree == 0 ? m.V : (c.degree == 1 ? m.E : m.F);
  if (c.values.size() != 3 * cells)
    throw invariant_error("store: cochain dimension does not match the surface");
  return c;
}

// ---------------------------------------------------------------------------
// kernel/v1

inline ordered_json kernel_payload(const KernelBasis& kb, const TriangulatedSurface& m) {
  ordered_json p;
  p["genus"] = m.genus;
  p["refinement"] = m.refinement;
  p["dim"] = kb.dim;
  p["spectrum"] = detail::vec_to_json(kb.spectrum);
  p["gap_ratio"] = kb.gap_ratio;
  p["residual_codiff"] = detail::vec_to_json(kb.residual_codiff);
  p["residual_d1"] = detail::vec_to_json(kb.residual_d1);
  ordered_json basis = ordered_json::array();
  for (int k = 0; k < kb.dim; ++k) basis.push_back(detail::vec_to_json(kb.eta.col(k)));
  p["eta"] = basis;
  return p;
}

inline std::string save_kernel(const KernelBasis& kb, const TriangulatedSurface& m,
                               const std::string& path, const SaveOptions& opt = {}) {
  return save_document("kernel/v1", kernel_payload(kb, m), path, opt);
}

inline KernelBasis load_kernel(const std::string& path, const TriangulatedSurface& m) {
  const ordered_json p = load_document(path, "kernel/v1");
  KernelBasis kb;
  kb.dim = p["dim"].get<int>();
  kb.spectrum = detail::json_to_vec(p["spectrum"]);
  kb.gap_ratio = p["gap_ratio"].get<double>();
  kb.residual_codiff = detail::json_to_vec(p["residual_codiff"]);
  kb.residual_d1 = detail::json_to_vec(p["residual_d1"]);
  kb.eta.resize(3 * m.E, kb.dim);
  if (static_cast<int>(p["eta"].size()) != kb.dim)
    throw invariant_error("store: kernel basis column count mismatch");
  int k = 0;
  for (const auto& col : p["eta"]) {
    const Eigen::VectorXd v = detail::json_to_vec(col);
    if (v.size() != 3 * m.E)
      throw invariant_error("store: kernel basis dimension does not match the surface");
    kb.eta.col(k++) = v;
  }
  return kb;
}

// ---------------------------------------------------------------------------
// map/v1

inline ordered_json map_payload(const EquivariantMap& em, const TriangulatedSurface& m) {
  ordered_json p;
  p["genus"] = m.genus;
  p["refinement"] = m.refinement;
  p["V"] = static_cast<int>(em.f.size());
  ordered_json pts = ordered_json::array();
  for (const auto& x : em.f) pts.push_back(ordered_json::array({x[0], x[1], x[2]}));
  p["f"] = pts;
  p["energy"] = em.energy;
  p["grad_norm"] = em.grad_norm;
  p["iterations"] = em.iterations;
  p["converged"] = em.converged;
  return p;
}

inline std::string save_map(const EquivariantMap& em, const TriangulatedSurface& m,
                            const std::string& path, const SaveOptions& opt = {}) {
  return save_document("map/v1", map_payload(em, m), path, opt);
}

inline EquivariantMap load_map(const std::string& path, const TriangulatedSurface& m) {
  const ordered_json p = load_document(path, "map/v1");
  EquivariantMap em;
  if (p["V"].get<int>() != m.V)
    throw invariant_error("store: map vertex count does not match the surface");
  for (const auto& x : p["f"]) {
    if (x.size() != 3) throw invariant_error("store: map point is not a 3-vector");
    em.f.emplace_back(x[0].get<double>(), x[1].get<double>(), x[2].get<double>());
  }
  em.energy = p["energy"].get<double>();
  em.grad_norm = p["grad_norm"].get<double>();
  em.iterations = p["iterations"].get<int>();
  em.converged = p["converged"].get<bool>();
  for (const auto& x : em.f)
    if (std::abs(hdot(x, x) + 1.0) > 1e-10 || !(x[2] > 0))
      throw invariant_error("store: loaded map value is off the hyperboloid");
  return em;
}

// ---------------------------------------------------------------------------
// pair/v1

inline ordered_json pair_payload(const HitchinPair& pr) {
  ordered_json p;
  p["genus"] = pr.genus;
  p["E"] = pr.E;
  p["component_tag"] = pr.component_tag;
  p["w2_tag"] = pr.w2_tag;
  p["alpha"] = detail::dvec_to_json(pr.alpha);
  ordered_json uu = ordered_json::array();
  for (const auto& u : pr.u) uu.push_back(ordered_json::array({u[0], u[1]}));
  p["u"] = uu;
  ordered_json okj = ordered_json::array();
  for (const auto o : pr.ok) okj.push_back(static_cast<int>(o));
  p["ok"] = okj;
  ordered_json carried = ordered_json::array();
  for (int e = 0; e < pr.E; ++e)
    if (!pr.ok[static_cast<size_t>(e)]) {
      ordered_json ce;
      ce["edge"] = e;
      ce["m"] = detail::mat3_to_json(pr.gauged[static_cast<size_t>(e)]);
      carried.push_back(ce);
    }
  p["carried"] = carried;
  ordered_json res;
  res["r1"] = pr.res.r1;
  res["r2"] = pr.res.r2;
  res["hopf"] = pr.res.hopf;
  res["kept_faces"] = pr.res.kept_faces;
  res["excluded_faces"] = pr.res.excluded_faces;
  p["residuals"] = res;
  ordered_json diag;
  diag["lambda1"] = pr.diag.lambda1;
  diag["sor_sweeps"] = pr.diag.sor_sweeps;
  diag["sor_converged"] = pr.diag.sor_converged;
  diag["xy_energy"] = pr.diag.xy_energy;
  diag["vortex_faces"] = pr.diag.vortex_faces;
  diag["recomposition"] = pr.diag.recomposition;
  diag["bad_edges"] = pr.diag.bad_edges;
  p["diagnostics"] = diag;
  return p;
}

inline std::string save_pair(const HitchinPair& pr, const std::string& path,
                             const SaveOptions& opt = {}) {
  return save_document("pair/v1", pair_payload(pr), path, opt);
}

// the pair reloads with recomposed transports in `gauged` for ok edges
inline HitchinPair load_pair(const std::string& path, const TriangulatedSurface& m) {
  const ordered_json p = load_document(path, "pair/v1");
  HitchinPair pr;
  pr.genus = p["genus"].get<int>();
  pr.E = p["E"].get<int>();
  if (pr.E != m.E) throw invariant_error("store: pair edge count does not match the surface");
  pr.component_tag = p["component_tag"].get<int>();
  pr.w2_tag = p["w2_tag"].get<int>();
  pr.alpha = detail::json_to_dvec(p["alpha"]);
  for (const auto& u : p["u"]) pr.u.emplace_back(u[0].get<double>(), u[1].get<double>());
  for (const auto& o : p["ok"]) pr.ok.push_back(static_cast<std::uint8_t>(o.get<int>()));
  if (static_cast<int>(pr.alpha.size()) != pr.E || static_cast<int>(pr.u.size()) != pr.E ||
      static_cast<int>(pr.ok.size()) != pr.E)
    throw invariant_error("store: pair arrays have inconsistent lengths");
  pr.gauged.resize(static_cast<size_t>(pr.E));
  for (int e = 0; e < pr.E; ++e)
    if (pr.ok[static_cast<size_t>(e)])
      pr.gauged[static_cast<size_t>(e)] =
          so21_exp(pr.alpha[static_cast<size_t>(e)], pr.u[static_cast<size_t>(e)]);
  for (const auto& ce : p["carried"]) {
    const int e = ce["edge"].get<int>();
    if (e < 0 || e >= pr.E || pr.ok[static_cast<size_t>(e)])
      throw invariant_error("store: carried transport on an edge with a valid split");
    pr.gauged[static_cast<size_t>(e)] = detail::json_to_mat3(ce["m"]);
  }
  const auto& res = p["residuals"];
  pr.res.r1 = res["r1"].get<double>();
  pr.res.r2 = res["r2"].get<double>();
  pr.res.hopf = res["hopf"].get<double>();
  pr.res.kept_faces = res["kept_faces"].get<int>();
  pr.res.excluded_faces = res["excluded_faces"].get<int>();
  const auto& diag = p["diagnostics"];
  pr.diag.lambda1 = diag["lambda1"].get<double>();
  pr.diag.sor_sweeps = diag["sor_sweeps"].get<int>();
  pr.diag.sor_converged = diag["sor_converged"].get<bool>();
  pr.diag.xy_energy = diag["xy_energy"].get<double>();
  pr.diag.vortex_faces = diag["vortex_faces"].get<int>();
  pr.diag.recomposition = diag["recomposition"].get<double>();
  pr.diag.bad_edges = diag["bad_edges"].get<int>();
  for (int e = 0; e < pr.E; ++e)
    if (!is_so21(pr.gauged[static_cast<size_t>(e)], 1e-6))
      throw invariant_error("store: loaded pair transport is not in SO(2,1)");
  return pr;
}

// ---------------------------------------------------------------------------
// metric/v1

inline ordered_json metric_payload(const SpacetimeMetric& g) {
  ordered_json p;
  p["tgrid"] = detail::dvec_to_json(g.tgrid);
  p["F"] = g.F;
  p["eps_sing"] = g.eps_sing;
  p["masked_fraction"] = g.masked_fraction();
  p["lorentzian_count"] = g.lorentzian_count;
  p["other_signature_count"] = g.other_signature_count;
  ordered_json mask = ordered_json::array();
  for (const auto b : g.masked) mask.push_back(static_cast<int>(b));
  p["masked"] = mask;
  p["dreibein_det"] = detail::dvec_to_json(g.dreibein_det);
  // per sample the six independent entries (tt, t1, t2, 11, 12, 22)
  ordered_json gram = ordered_json::array();
  for (const auto& G : g.gram)
    gram.push_back(
        ordered_json::array({G(0, 0), G(0, 1), G(0, 2), G(1, 1), G(1, 2), G(2, 2)}));
  p["gram"] = gram;
  return p;
}

inline std::string save_metric(const SpacetimeMetric& g, const std::string& path,
                               const SaveOptions& opt = {}) {
  return save_document("metric/v1", metric_payload(g), path, opt);
}

// ---------------------------------------------------------------------------
// conformal/v1

inline ordered_json conformal_payload(const InducedConformalClass& cls) {
  ordered_json p;
  p["F"] = static_cast<int>(cls.gram.size());
  p["total_area"] = cls.total_area;
  ordered_json gram = ordered_json::array();
  for (const auto& G : cls.gram)
    gram.push_back(ordered_json::array({G(0, 0), G(0, 1), G(1, 1)}));
  p["gram"] = gram;
  p["area"] = detail::dvec_to_json(cls.area);
  return p;
}

inline std::string save_conformal(const InducedConformalClass& cls, const std::string& path,
                                  const SaveOptions& opt = {}) {
  return save_document("conformal/v1", conformal_payload(cls), path, opt);
}

inline InducedConformalClass load_conformal(const std::string& path) {
  const ordered_json p = load_document(path, "conformal/v1");
  InducedConformalClass cls;
  cls.total_area = p["total_area"].get<double>();
  for (const auto& g : p["gram"]) {
    Mat2d G;
    G << g[0].get<double>(), g[1].get<double>(), g[1].get<double>(), g[2].get<double>();
    cls.gram.push_back(G);
  }
  cls.area = detail::json_to_dvec(p["area"]);
  if (cls.gram.size() != cls.area.size())
    throw invariant_error("store: conformal class arrays have inconsistent lengths");
  for (const auto& G : cls.gram)
    if (std::abs(G.determinant() - 1.0) > 1e-8 || !(G(0, 0) > 0))
      throw invariant_error("store: loaded conformal Gram is not unit-determinant SPD");
  return cls;
}

// ---------------------------------------------------------------------------
// manifest/v1

struct ManifestStage {
  std::string name;
  ordered_json inputs = ordered_json::object();      // label -> payload hash
  ordered_json outputs = ordered_json::object();     // label -> payload hash
  ordered_json tolerances = ordered_json::object();  // name -> value
};

inline ordered_json manifest_payload(const std::vector<ManifestStage>& stages,
                                     const ordered_json& config, const std::string& notes) {
  ordered_json p;
  p["config"] = config;
  ordered_json st = ordered_json::array();
  for (const auto& s : stages) {
    ordered_json so;
    so["name"] = s.name;
    so["inputs"] = s.inputs;
    so["outputs"] = s.outputs;
    so["tolerances"] = s.tolerances;
    st.push_back(so);
  }
  p["stages"] = st;
  p["notes"] = notes;
  return p;
}

inline std::string save_manifest(const std::vector<ManifestStage>& stages,
                                 const ordered_json& config, const std::string& notes,
                                 const std::string& path, const SaveOptions& opt = {}) {
  return save_document("manifest/v1", manifest_payload(stages, config, notes), path, opt);
}

// every hash referenced by the manifest must resolve to a document in `dir`
inline void verify_manifest(const std::string& manifest_path, const std::string& dir) {
  const ordered_json p = load_document(manifest_path, "manifest/v1");
  std::set<std::string> have;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    if (entry.path().filename() == std::filesystem::path(manifest_path).filename()) continue;
    try {
      have.insert(payload_hash_of(entry.path().string()));
    } catch (const hl_error&) {
      // non-document JSON files are simply not referenceable
    }
  }
  for (const auto& stage : p["stages"]) {
    for (const auto& section : {"inputs", "outputs"}) {
      for (const auto& [label, hash] : stage[section].items()) {
        if (!have.count(hash.get<std::string>()))
          throw missing_input_error("store: manifest stage '" +
                                    stage["name"].get<std::string>() + "' references " + section +
                                    " artifact '" + label + "' with hash " +
                                    hash.get<std::string>() + " not present in " + dir);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// CSV emission (plot data; plain text, LF, C locale)

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (size_t i = 0; i < header.size(); ++i) {
    if (i) out += ',';
    out += header[i];
  }
  out += '\n';
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_double(row[i]);
    }
    out += '\n';
  }
  atomic_write(path, out);
}

}  // namespace hitchlab::store
