#pragma once
// Triangulated genus-g surfaces as quotients of the fundamental 4g-gon.
//
// Pipeline (all in long double until the final snapshot):
//   fan triangulation of the polygon -> k pre-refinements -> damped intrinsic
//   Laplace smoothing of the base -> r refinements -> edge/face quotient with
//   transport-tracking union-find -> vertex-centered gauge -> f64 geometry.
//
// The pre-quotient mesh lives in per-copy polygon charts; weld segments carry
// the side-pairing label (generator index + inverse flag), so the same
// combinatorial quotient can be materialized for any generator set (the
// Fuchsian one, the trivial one, perturbed ones).
//
// Gauge: every vertex class is boosted to the hyperboloid origin in its own
// chart (G_v = boost_to_origin(root position)); published transports are
// T_e = G_dst T_raw G_src^{-1}. This keeps all transports uniformly bounded
// and turns the chart inclusion into the constant map v -> e3.

#include "polygon.hpp"

#include <array>
#include <map>
#include <memory>
#include <utility>
#include <vector>

namespace hitchlab {

// ---------------------------------------------------------------------------
// Pre-quotient polygon mesh.

struct PreMesh {
  int genus = 0;
  FundamentalPolygon poly;
  std::vector<Vec3<LD>> points;
  std::vector<std::array<int, 3>> tris;
  struct Seg {
    int i = -1, j = -1;   // boundary edge endpoints, oriented along the side
    int pid = -1;         // paired seg index
    int gen = -1;         // raw generator index: j < g -> a_j, g+j -> b_j
    bool inv = false;     // D = gens[gen]^{-1} instead of gens[gen]
  };
  std::vector<Seg> segs;

  explicit PreMesh(int g) : genus(g), poly(make_polygon(g)) {
    const int n = 4 * g;
    points.emplace_back(LD(0), LD(0), LD(1));
    for (const auto& c : poly.corners) points.push_back(c);
    for (int k = 0; k < n; ++k)
      tris.push_back({0, 1 + k, 1 + (k + 1) % n});
    segs.resize(n);
    for (int k = 0; k < n; ++k) {
      segs[k].i = 1 + k;
      segs[k].j = 1 + (k + 1) % n;
    }
    for (int j = 0; j < g; ++j) {
      pair_sides(4 * j + 2, 4 * j, j);          // a_j : side 4j+2 -> 4j
      pair_sides(4 * j + 3, 4 * j + 1, g + j);  // b_j : side 4j+3 -> 4j+1
    }
  }

  // raw generator matrices [a_0..a_{g-1}, b_0..b_{g-1}] in the requested scalar
  template <class S> std::vector<Mat3<S>> raw_generators() const {
    std::vector<Mat3<S>> gens;
    for (const auto& M : poly.A) gens.push_back(M.template cast<S>());
    for (const auto& M : poly.B) gens.push_back(M.template cast<S>());
    return gens;
  }

  template <class S>
  Mat3<S> seg_D(const Seg& s, const std::vector<Mat3<S>>& raw_gens) const {
    return s.inv ? Mat3<S>(soinv(raw_gens[s.gen])) : raw_gens[s.gen];
  }

  // 1 -> 4 midpoint subdivision; weld children stay paired crosswise
  void refine() {
    std::map<std::pair<int, int>, int> midcache;
    auto midpoint = [&](int i, int j) {
      const auto key = std::minmax(i, j);
      auto it = midcache.find(key);
      if (it != midcache.end()) return it->second;
      points.push_back(hmid(points[i], points[j]));
      const int m = static_cast<int>(points.size()) - 1;
      midcache.emplace(key, m);
      return m;
    };
    std::vector<std::array<int, 3>> newtris;
    newtris.reserve(4 * tris.size());
    for (const auto& t : tris) {
      const int a = t[0], b = t[1], c = t[2];
      const int ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
      newtris.push_back({a, ab, ca});
      newtris.push_back({ab, b, bc});
      newtris.push_back({ca, bc, c});
      newtris.push_back({ab, bc, ca});
    }
    tris = std::move(newtris);
    std::vector<Seg> newsegs;
    std::vector<std::pair<int, int>> pos(segs.size());
    for (size_t sid = 0; sid < segs.size(); ++sid) {
      const Seg& s = segs[sid];
      const int m = midpoint(s.i, s.j);
      pos[sid] = {static_cast<int>(newsegs.size()), static_cast<int>(newsegs.size()) + 1};
      Seg c1, c2;
      c1.i = s.i;
      c1.j = m;
      c2.i = m;
      c2.j = s.j;
      newsegs.push_back(c1);
      newsegs.push_back(c2);
    }
    for (size_t sid = 0; sid < segs.size(); ++sid) {
      const Seg& s = segs[sid];
      const auto [c1, c2] = pos[sid];
      const auto [p1, p2] = pos[s.pid];
      // sides are traversed in opposite senses: first child pairs with the
      // partner's second child and vice versa, same D
      newsegs[c1].pid = p2;
      newsegs[c2].pid = p1;
      newsegs[c1].gen = newsegs[c2].gen = s.gen;
      newsegs[c1].inv = newsegs[c2].inv = s.inv;
    }
    segs = std::move(newsegs);
  }

private:
  void pair_sides(int s_from, int s_to, int gen) {
    segs[s_from].pid = s_to;
    segs[s_from].gen = gen;
    segs[s_from].inv = false;
    segs[s_to].pid = s_from;
    segs[s_to].gen = gen;
    segs[s_to].inv = true;
  }
};

// ---------------------------------------------------------------------------
// Union-find with transport tracking: W[x] maps x's chart to its root's chart.

template <class S> struct TransportUF {
  std::vector<int> parent;
  std::vector<Mat3<S>> W;

  explicit TransportUF(int n) : parent(n), W(n, Mat3<S>::Identity()) {
    for (int i = 0; i < n; ++i) parent[i] = i;
  }

  std::pair<int, Mat3<S>> find(int i) {
    std::vector<int> chain;
    int r = i;
    while (parent[r] != r) {
      chain.push_back(r);
      r = parent[r];
    }
    Mat3<S> up = Mat3<S>::Identity();  // transport parent(x) -> root
    for (int k = static_cast<int>(chain.size()) - 1; k >= 0; --k) {
      const int x = chain[k];
      W[x] = up * W[x];
      parent[x] = r;
      up = W[x];
    }
    return {r, i == r ? Mat3<S>::Identity() : W[i]};
  }

  // identify i ~ j where D maps i's chart to j's chart; smaller root wins
  void unite(int i, int j, const Mat3<S>& D) {
    auto [ri, Wi] = find(i);
    auto [rj, Wj] = find(j);
    if (ri == rj) return;
    const Mat3<S> M = Wj * D * soinv(Wi);  // chart(ri) -> chart(rj)
    if (rj < ri) {
      parent[ri] = rj;
      W[ri] = M;
    } else {
      parent[rj] = ri;
      W[rj] = soinv(M);
    }
  }
};

// ---------------------------------------------------------------------------
// Quotient complex: vertex classes, oriented edges, faces with edge trips.

struct Quotient {
  int V = 0, E = 0, F = 0;
  std::vector<std::pair<int, int>> edges;  // canonical pre-quotient point pair
  std::vector<int> esrc, edst;             // vertex-class endpoints
  struct Face {
    std::array<std::pair<int, int>, 3> trip;  // (edge id, sign) in traversal order
    std::array<int, 3> corners;               // pre-quotient corner points
    std::array<int, 3> vclass;                // vertex classes of the corners
  };
  std::vector<Face> faces;
  std::vector<int> roots;   // class -> pre-quotient root point
  std::vector<int> pclass;  // pre-quotient point -> class
  std::map<std::pair<int, int>, std::pair<int, int>> edgeof;  // key -> (eid, sgn)
  std::vector<Mat3<LD>> pW;    // point -> root-chart transport
  std::vector<Mat3<LD>> Traw;  // per-edge root-chart transports
  std::vector<Mat3<LD>> Gv;    // vertex gauge: boost_to_origin(root position)
  std::vector<Mat3d> T;        // published gauged transports (f64)
};

namespace detail {

template <class S>
TransportUF<S> weld_uf(const PreMesh& pm, const std::vector<Mat3<S>>& raw_gens) {
  TransportUF<S> uf(static_cast<int>(pm.points.size()));
  for (size_t sid = 0; sid < pm.segs.size(); ++sid) {
    const auto& s = pm.segs[sid];
    if (static_cast<int>(sid) >= s.pid) continue;
    const auto& p = pm.segs[s.pid];
    const Mat3<S> D = pm.seg_D(s, raw_gens);
    uf.unite(s.i, p.j, D);  // sides traversed oppositely: i ~ partner j
    uf.unite(s.j, p.i, D);
  }
  return uf;
}

}  // namespace detail

inline Quotient quotient(const PreMesh& pm) {
  Quotient q;
  const int npts = static_cast<int>(pm.points.size());
  auto uf = detail::weld_uf<LD>(pm, pm.raw_generators<LD>());

  // pre-quotient edge incidence; ascending (min,max) key order is canonical
  std::map<std::pair<int, int>, int> seen;
  std::map<std::pair<int, int>, std::pair<int, int>> segpair;
  for (size_t sid = 0; sid < pm.segs.size(); ++sid) {
    const auto& s = pm.segs[sid];
    segpair[std::minmax(s.i, s.j)] = {static_cast<int>(sid), s.pid};
  }
  std::map<std::pair<int, int>, bool> inc;
  for (const auto& t : pm.tris)
    for (const auto [u, v] : {std::pair{t[0], t[1]}, {t[1], t[2]}, {t[2], t[0]}})
      inc[std::minmax(u, v)] = true;

  for (const auto& [key, unused] : inc) {
    auto sp = segpair.find(key);
    if (sp != segpair.end()) {
      const auto [sid, pid] = sp->second;
      if (sid > pid) continue;  // the partner side registered both keys
      const auto& s = pm.segs[sid];
      const int eid = static_cast<int>(q.edges.size());
      q.edges.emplace_back(s.i, s.j);
      q.edgeof[key] = {eid, s.i < s.j ? +1 : -1};
      const auto& p = pm.segs[pid];
      const auto key2 = std::minmax(p.i, p.j);
      q.edgeof[key2] = {eid, p.i < p.j ? -1 : +1};
    } else {
      const int eid = static_cast<int>(q.edges.size());
      q.edges.emplace_back(key.first, key.second);
      q.edgeof[key] = {eid, +1};
    }
  }
  q.E = static_cast<int>(q.edges.size());

  // vertex classes: numbered in ascending root-point order
  q.pclass.assign(npts, -1);
  for (int i = 0; i < npts; ++i)
    if (uf.find(i).first == i) q.roots.push_back(i);
  for (size_t k = 0; k < q.roots.size(); ++k) q.pclass[q.roots[k]] = static_cast<int>(k);
  for (int i = 0; i < npts; ++i) q.pclass[i] = q.pclass[uf.find(i).first];
  q.V = static_cast<int>(q.roots.size());

  q.pW.resize(npts);
  for (int i = 0; i < npts; ++i) q.pW[i] = uf.find(i).second;

  q.Gv.reserve(q.V);
  for (int r : q.roots) q.Gv.push_back(boost_to_origin(pm.points[r]));

  q.esrc.reserve(q.E);
  q.edst.reserve(q.E);
  q.Traw.reserve(q.E);
  q.T.reserve(q.E);
  for (const auto& [i, j] : q.edges) {
    const auto [ri, Wi] = uf.find(i);
    const auto [rj, Wj] = uf.find(j);
    const int ci = q.pclass[ri], cj = q.pclass[rj];
    const Mat3<LD> T0 = Wj * soinv(Wi);
    q.Traw.push_back(T0);
    q.T.push_back(to_f64(Mat3<LD>(q.Gv[cj] * T0 * soinv(q.Gv[ci]))));
    q.esrc.push_back(ci);
    q.edst.push_back(cj);
  }

  q.faces.reserve(pm.tris.size());
  for (const auto& t : pm.tris) {
    Quotient::Face f;
    f.corners = t;
    int k = 0;
    for (const auto [u, v] : {std::pair{t[0], t[1]}, {t[1], t[2]}, {t[2], t[0]}}) {
      auto [eid, sgn] = q.edgeof.at(std::minmax(u, v));
      if (u > v) sgn = -sgn;
      f.trip[k++] = {eid, sgn};
    }
    for (int c = 0; c < 3; ++c) f.vclass[c] = q.pclass[t[c]];
    q.faces.push_back(f);
  }
  q.F = static_cast<int>(q.faces.size());
  return q;
}

// Transports for an arbitrary generator set on the same weld combinatorics.
// raw_gens follow PreMesh::raw_generators order; vertex gauge optional.
template <class S>
std::vector<Mat3<S>> transports_for(const PreMesh& pm, const Quotient& q,
                                    const std::vector<Mat3<S>>& raw_gens,
                                    bool vertex_gauge) {
  auto uf = detail::weld_uf<S>(pm, raw_gens);
  std::vector<Mat3<S>> Gv;
  if (vertex_gauge) {
    Gv.reserve(q.V);
    for (int r : q.roots) Gv.push_back(boost_to_origin(Vec3<S>(pm.points[r].template cast<S>())));
  }
  std::vector<Mat3<S>> T;
  T.reserve(q.E);
  for (int e = 0; e < q.E; ++e) {
    const auto [i, j] = q.edges[e];
    const auto Wi = uf.find(i).second;
    const auto Wj = uf.find(j).second;
    Mat3<S> T0 = Wj * soinv(Wi);
    if (vertex_gauge) T0 = Gv[q.edst[e]] * T0 * soinv(Gv[q.esrc[e]]);
    T.push_back(T0);
  }
  return T;
}

// ---------------------------------------------------------------------------
// f64 geometry: hyperbolic lengths, angle-defect areas, cotangent weights.

struct Geometry {
  std::vector<double> elen;    // per quotient edge
  std::vector<double> farea;   // angle defect pi - (A+B+C)
  std::vector<double> vw;      // vertex weights: incident area / 3
  std::vector<double> ew_raw;  // cotangent weights before clamping
};

inline Geometry geometry(const PreMesh& pm, const Quotient& q) {
  Geometry geo;
  std::vector<Vec3d> pts;
  pts.reserve(pm.points.size());
  for (const auto& p : pm.points) pts.push_back(to_f64(p));
  auto d = [&](int x, int y) { return hdist(pts[x], pts[y]); };

  geo.elen.reserve(q.E);
  for (const auto& [i, j] : q.edges) geo.elen.push_back(d(i, j));

  geo.farea.assign(q.F, 0.0);
  geo.vw.assign(q.V, 0.0);
  geo.ew_raw.assign(q.E, 0.0);
  auto ang = [](double x, double y, double z) {
    // interior angle opposite side x from hyperbolic law of cosines
    const double v = (std::cosh(y) * std::cosh(z) - std::cosh(x)) / (std::sinh(y) * std::sinh(z));
    return std::acos(std::clamp(v, -1.0, 1.0));
  };
  for (int fid = 0; fid < q.F; ++fid) {
    const auto& f = q.faces[fid];
    const int a = f.corners[0], b = f.corners[1], c = f.corners[2];
    const double la = d(b, c), lb = d(c, a), lc = d(a, b);
    const double A = ang(la, lb, lc), B = ang(lb, lc, la), C = ang(lc, la, lb);
    geo.farea[fid] = pi - (A + B + C);
    for (int vc : f.vclass) geo.vw[vc] += geo.farea[fid] / 3.0;
    const std::array<double, 3> opp = {C, A, B};  // angles opposite trip edges ab, bc, ca
    for (int k = 0; k < 3; ++k) geo.ew_raw[f.trip[k].first] += 0.5 / std::tan(opp[k]);
  }
  return geo;
}

// ---------------------------------------------------------------------------
// Damped intrinsic Laplace smoothing of the base mesh (long double). The
// vertex star is averaged through the raw root-chart transports, so welded
// copies move consistently.

inline void smooth_laplace(PreMesh& pm, int iters = 200, LD damp = LD(0.5)) {
  const Quotient q = quotient(pm);  // combinatorics and transports are point-independent
  for (int it = 0; it < iters; ++it) {
    std::vector<Vec3<LD>> star(q.V, Vec3<LD>::Zero());
    for (int e = 0; e < q.E; ++e) {
      const int ri = q.roots[q.esrc[e]], rj = q.roots[q.edst[e]];
      star[q.esrc[e]] += soinv(q.Traw[e]) * pm.points[rj];
      star[q.edst[e]] += q.Traw[e] * pm.points[ri];
    }
    std::vector<Vec3<LD>> newpos(q.V);
    std::vector<bool> moved(q.V, false);
    for (int v = 0; v < q.V; ++v) {
      const LD n2 = -hdot(star[v], star[v]);
      if (n2 <= LD(0)) continue;
      const Vec3<LD> c = star[v] / std::sqrt(n2);
      const Vec3<LD>& x = pm.points[q.roots[v]];
      newpos[v] = hexp(x, Vec3<LD>(damp * hlog(x, c)));
      moved[v] = true;
    }
    for (size_t p = 0; p < pm.points.size(); ++p) {
      const int v = q.pclass[p];
      if (!moved[v]) continue;
      pm.points[p] = (static_cast<int>(p) == q.roots[v]) ? newpos[v] : Vec3<LD>(soinv(q.pW[p]) * newpos[v]);
    }
  }
}

// ---------------------------------------------------------------------------
// The public surface type.

struct TriangulatedSurface {
  int genus = 0;
  int refinement = 0;
  int base_prerefine = 0;  // pre-refinements baked into the smoothed base
  int V = 0, E = 0, F = 0;
  std::vector<Vec3d> vertex_pos;  // root positions (f64 snapshot, own chart -> e3)
  std::vector<int> esrc, edst;
  std::vector<Quotient::Face> faces;
  std::vector<double> edge_length, face_area, vertex_weight, edge_weight_raw;
  double eps_w = 1e-8;

  // construction context; rebuilt on load, never serialized
  std::shared_ptr<const PreMesh> pre;
  std::shared_ptr<const Quotient> quot;

  int euler_characteristic() const { return V - E + F; }
  double total_area() const {
    double s = 0;
    for (double a : face_area) s += a;
    return s;
  }
  double mean_edge_length() const {
    double s = 0;
    for (double l : edge_length) s += l;
    return s / static_cast<double>(E);
  }
  double mean_face_area() const { return total_area() / static_cast<double>(F); }

  // clamped Hodge weights; raw values stay available for quality reporting
  double edge_weight(int e) const { return std::max(edge_weight_raw[e], eps_w); }
  std::vector<double> hodge_edge_weights() const {
    std::vector<double> w(edge_weight_raw);
    for (double& x : w) x = std::max(x, eps_w);
    return w;
  }
  int clamped_edge_count() const {
    int n = 0;
    for (double x : edge_weight_raw)
      if (x < eps_w) ++n;
    return n;
  }
  int nonpositive_edge_count() const {
    int n = 0;
    for (double x : edge_weight_raw)
      if (x <= 0.0) ++n;
    return n;
  }

  void check_invariants() const {
    if (euler_characteristic() != 2 - 2 * genus)
      throw invariant_error("surface: Euler characteristic V-E+F != 2-2g");
    // strict hyperbolic triangle inequalities
    for (const auto& f : faces) {
      const double l0 = edge_length[f.trip[0].first];
      const double l1 = edge_length[f.trip[1].first];
      const double l2 = edge_length[f.trip[2].first];
      if (!(l0 < l1 + l2 && l1 < l2 + l0 && l2 < l0 + l1))
        throw invariant_error("surface: triangle inequality violated");
    }
    // orientation consistency: every edge traversed once in each direction
    std::vector<int> plus(E, 0), minus(E, 0);
    for (const auto& f : faces)
      for (const auto& [eid, sgn] : f.trip) (sgn > 0 ? plus[eid] : minus[eid])++;
    for (int e = 0; e < E; ++e)
      if (plus[e] != 1 || minus[e] != 1)
        throw invariant_error("surface: edge not traversed once per direction");
    for (double a : face_area)
      if (!(a > 0)) throw invariant_error("surface: nonpositive face area");
    for (double w : vertex_weight)
      if (!(w > 0)) throw invariant_error("surface: nonpositive vertex weight");
  }
};

namespace detail {

inline PreMesh base_premesh(int g) {
  PreMesh pm(g);
  const int k = (g == 2) ? 2 : 3;
  for (int i = 0; i < k; ++i) pm.refine();
  smooth_laplace(pm, 200);
  return pm;
}

inline const PreMesh& cached_base(int g) {
  static std::map<int, PreMesh> cache;
  auto it = cache.find(g);
  if (it == cache.end()) it = cache.emplace(g, base_premesh(g)).first;
  return it->second;
}

inline TriangulatedSurface finish_surface(std::shared_ptr<PreMesh> pm, int g, int r) {
  auto q = std::make_shared<Quotient>(quotient(*pm));
  const Geometry geo = geometry(*pm, *q);
  TriangulatedSurface m;
  m.genus = g;
  m.refinement = r;
  m.base_prerefine = (g == 2) ? 2 : 3;
  m.V = q->V;
  m.E = q->E;
  m.F = q->F;
  m.vertex_pos.reserve(q->V);
  for (int root : q->roots) m.vertex_pos.push_back(to_f64(pm->points[root]));
  m.esrc = q->esrc;
  m.edst = q->edst;
  m.faces = q->faces;
  m.edge_length = geo.elen;
  m.face_area = geo.farea;
  m.vertex_weight = geo.vw;
  m.edge_weight_raw = geo.ew_raw;
  m.pre = std::move(pm);
  m.quot = std::move(q);
  m.check_invariants();
  return m;
}

}  // namespace detail

inline TriangulatedSurface build_surface(int g, int r) {
  if (g < 2) throw invariant_error("build_surface: genus must be >= 2");
  if (r < 0) throw invariant_error("build_surface: refinement must be >= 0");
  auto pm = std::make_shared<PreMesh>(detail::cached_base(g));
  for (int i = 0; i < r; ++i) pm->refine();
  return detail::finish_surface(std::move(pm), g, r);
}

inline TriangulatedSurface refine_surface(const TriangulatedSurface& m) {
  auto pm = std::make_shared<PreMesh>(*m.pre);
  pm->refine();
  return detail::finish_surface(std::move(pm), m.genus, m.refinement + 1);
}

}  // namespace hitchlab
