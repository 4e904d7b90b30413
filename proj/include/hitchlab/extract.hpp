#pragma once
// Hitchin pair extraction in the harmonic-map-adapted gauge.
//
// Per edge the flat transport conjugated into the f-adapted frame,
//   That_e = G(dst) T_e G(src)^{-1},  G(v) = K(phi_v + zeta_v) B(f_v),
// is split by the principal so(2,1) logarithm into a rotation angle alpha
// (the SO(2) connection A) and a boost 2-vector u (the symmetric part psi,
// i.e. Phi + Phi* read in the face complex structure). The fiber rotations
// K(.) are chosen to make the transports as close to the identity as the
// topology allows: the Euler class 2g-2 != 0 forces at least 2g-2 vortex
// faces in any vertex frame, so faces whose edges carry large angles are
// excluded from residual aggregation and their exact transports are carried
// along unsplit.
//
// Gauge construction: a radial alignment zeta from the polygon chart, a
// global intrinsic field angle phi0 from the gradient of the first
// nonconstant Laplace eigenfunction, and an XY-model SOR relaxation phi1
// that minimizes sum(1 - cos(alpha + phi_j - phi_i)).

#include "harmonic.hpp"
#include "spectra.hpp"

#include <cstdint>

namespace hitchlab {

using Vec2d = Eigen::Vector2d;

namespace detail {

inline Eigen::Matrix2d rot2(double t) {
  Eigen::Matrix2d R;
  const double c = std::cos(t), s = std::sin(t);
  R << c, -s, s, c;
  return R;
}

// sigma acts on carried transports by conjugation with the exact half-turn
inline Mat3d sigma_halfturn() {
  Mat3d R = Mat3d::Identity();
  R(0, 0) = -1.0;
  R(1, 1) = -1.0;
  return R;
}

inline Mat3d commutator(const Mat3d& A, const Mat3d& B) { return A * B - B * A; }

// truncated BCH of log(exp(L3) exp(L2) exp(L1)) through fourth order
inline Mat3d bch3(const Mat3d& L1, const Mat3d& L2, const Mat3d& L3) {
  const Mat3d P = L2 + L1 + 0.5 * commutator(L2, L1) +
                  (commutator(L2, commutator(L2, L1)) + commutator(L1, commutator(L1, L2))) / 12.0;
  return L3 + P + 0.5 * commutator(L3, P) +
         (commutator(L3, commutator(L3, P)) + commutator(P, commutator(P, L3))) / 12.0;
}

// inverse square root of an SPD 2x2 matrix, closed form
inline Eigen::Matrix2d spd_inv_sqrt_2x2(const Eigen::Matrix2d& A) {
  const double det = A.determinant();
  if (!(det > 0) || !(A(0, 0) > 0))
    throw invariant_error("spd_inv_sqrt_2x2: matrix is not positive definite");
  const double s = std::sqrt(det);
  const double t = std::sqrt(A(0, 0) + A(1, 1) + 2 * s);
  Eigen::Matrix2d R;
  R << A(1, 1) + s, -A(0, 1), -A(1, 0), A(0, 0) + s;
  return R / (s * t);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Fiber gauge construction.

// zeta_v: rotation aligning "toward the polygon center" with -e1 in each
// vertex chart; identity at the center class and anywhere too close to it.
inline std::vector<double> radial_gauge(const TriangulatedSurface& m) {
  const auto& pm = *m.pre;
  const auto& q = *m.quot;
  std::vector<double> zeta(static_cast<size_t>(m.V), 0.0);
  const Vec3d origin = e3<double>();
  for (int k = 0; k < m.V; ++k) {
    const Vec3<LD>& x = pm.points[static_cast<size_t>(q.roots[static_cast<size_t>(k)])];
    const LD d2 = x[0] * x[0] + x[1] * x[1];
    if (d2 < LD(1e-24)) continue;
    const Mat3d B = to_f64(boost_to_origin(x));
    const Vec3d xf = to_f64(x);
    const Vec3d v = B * hlog<double>(xf, origin);
    zeta[static_cast<size_t>(k)] = -std::atan2(v[1], v[0]);
  }
  return zeta;
}

// normalized cotangent Laplacian of scalars, M^{-1/2} L M^{-1/2}
inline SpMat scalar_laplacian_normalized(const TriangulatedSurface& m) {
  const std::vector<double> w = m.hodge_edge_weights();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(4 * m.E));
  for (int e = 0; e < m.E; ++e) {
    const int i = m.esrc[static_cast<size_t>(e)];
    const int j = m.edst[static_cast<size_t>(e)];
    const double wi = m.vertex_weight[static_cast<size_t>(i)];
    const double wj = m.vertex_weight[static_cast<size_t>(j)];
    const double we = w[static_cast<size_t>(e)];
    trip.emplace_back(i, i, we / wi);
    trip.emplace_back(j, j, we / wj);
    trip.emplace_back(i, j, -we / std::sqrt(wi * wj));
    trip.emplace_back(j, i, -we / std::sqrt(wi * wj));
  }
  SpMat B(m.V, m.V);
  B.setFromTriplets(trip.begin(), trip.end());
  B.makeCompressed();
  return B;
}

struct FieldAngles {
  std::vector<double> phi;  // per vertex
  double lambda1 = 0;       // first nonconstant Laplace eigenvalue
};

// phi_v = -arg(grad u1) per vertex chart, u1 the first nonconstant Laplace
// eigenfunction; intrinsic, hence smooth across the polygon-side welds.
inline FieldAngles eig_field_angles(const TriangulatedSurface& m, const std::vector<Mat3d>& T) {
  const SpMat B = scalar_laplacian_normalized(m);
  const EigPairs ep = smallest_eigs(B, 2);
  Eigen::VectorXd u(m.V);
  for (int i = 0; i < m.V; ++i)
    u[i] = ep.vectors(i, 1) / std::sqrt(m.vertex_weight[static_cast<size_t>(i)]);
  int imax = 0;
  u.cwiseAbs().maxCoeff(&imax);
  if (!(u[imax] > 0)) u = -u;

  const std::vector<double> w = m.hodge_edge_weights();
  const Vec3d z = e3<double>();
  std::vector<Vec2d> g(static_cast<size_t>(m.V), Vec2d::Zero());
  for (int e = 0; e < m.E; ++e) {
    const int i = m.esrc[static_cast<size_t>(e)];
    const int j = m.edst[static_cast<size_t>(e)];
    const Vec3d pj = soinv(T[static_cast<size_t>(e)]) * z;  // j seen in i's chart
    const Vec3d pi = T[static_cast<size_t>(e)] * z;         // i seen in j's chart
    const Vec2d di = pj.head<2>();
    const Vec2d dj = pi.head<2>();
    const double ni = di.norm(), nj = dj.norm();
    if (ni > 1e-15) g[static_cast<size_t>(i)] += w[static_cast<size_t>(e)] * (u[j] - u[i]) / ni * di;
    if (nj > 1e-15) g[static_cast<size_t>(j)] += w[static_cast<size_t>(e)] * (u[i] - u[j]) / nj * dj;
  }
  FieldAngles out;
  out.lambda1 = ep.values[1];
  out.phi.resize(static_cast<size_t>(m.V));
  for (int v = 0; v < m.V; ++v) {
    const Vec2d& gv = g[static_cast<size_t>(v)];
    out.phi[static_cast<size_t>(v)] = gv.norm() < 1e-12 ? 0.0 : -std::atan2(gv[1], gv[0]);
  }
  return out;
}

// greedy coloring in vertex order; exact Gauss-Seidel sweeps go color by color
inline std::vector<int> vertex_coloring(int V, const std::vector<int>& src,
                                        const std::vector<int>& dst) {
  std::vector<std::vector<int>> adj(static_cast<size_t>(V));
  for (size_t e = 0; e < src.size(); ++e) {
    adj[static_cast<size_t>(src[e])].push_back(dst[e]);
    adj[static_cast<size_t>(dst[e])].push_back(src[e]);
  }
  std::vector<int> color(static_cast<size_t>(V), -1);
  for (int v = 0; v < V; ++v) {
    std::vector<bool> used;
    for (int n : adj[static_cast<size_t>(v)]) {
      const int c = color[static_cast<size_t>(n)];
      if (c >= 0) {
        if (c >= static_cast<int>(used.size())) used.resize(static_cast<size_t>(c) + 1, false);
        used[static_cast<size_t>(c)] = true;
      }
    }
    int c = 0;
    while (c < static_cast<int>(used.size()) && used[static_cast<size_t>(c)]) ++c;
    color[static_cast<size_t>(v)] = c;
  }
  return color;
}

struct SorResult {
  std::vector<double> phi;
  int sweeps = 0;
  bool converged = false;
};

// XY-model relaxation: phi minimizing sum_e (1 - cos(alpha_e + phi_j - phi_i)),
// over-relaxed colored Gauss-Seidel with deterministic ordering
inline SorResult xy_relax_sor(int V, const std::vector<int>& src, const std::vector<int>& dst,
                              const std::vector<double>& alpha, double omega = 1.7,
                              int sweeps = 40000, double tol = 1e-13) {
  const std::vector<int> color = vertex_coloring(V, src, dst);
  int ncol = 0;
  for (int c : color) ncol = std::max(ncol, c + 1);
  // per color: edges whose src / dst carries that color, and the vertices
  std::vector<std::vector<int>> es(static_cast<size_t>(ncol)), ed(static_cast<size_t>(ncol)),
      sel(static_cast<size_t>(ncol));
  for (size_t e = 0; e < src.size(); ++e) {
    es[static_cast<size_t>(color[static_cast<size_t>(src[e])])].push_back(static_cast<int>(e));
    ed[static_cast<size_t>(color[static_cast<size_t>(dst[e])])].push_back(static_cast<int>(e));
  }
  for (int v = 0; v < V; ++v) sel[static_cast<size_t>(color[static_cast<size_t>(v)])].push_back(v);

  SorResult out;
  out.phi.assign(static_cast<size_t>(V), 0.0);
  std::vector<double>& phi = out.phi;
  std::vector<double> zr(static_cast<size_t>(V)), zi(static_cast<size_t>(V));
  for (int s = 0; s < sweeps; ++s) {
    double dmax = 0.0;
    for (int c = 0; c < ncol; ++c) {
      for (int v : sel[static_cast<size_t>(c)]) {
        zr[static_cast<size_t>(v)] = 0.0;
        zi[static_cast<size_t>(v)] = 0.0;
      }
      for (int e : es[static_cast<size_t>(c)]) {
        const double t = phi[static_cast<size_t>(dst[static_cast<size_t>(e)])] +
                         alpha[static_cast<size_t>(e)];
        zr[static_cast<size_t>(src[static_cast<size_t>(e)])] += std::cos(t);
        zi[static_cast<size_t>(src[static_cast<size_t>(e)])] += std::sin(t);
      }
      for (int e : ed[static_cast<size_t>(c)]) {
        const double t = phi[static_cast<size_t>(src[static_cast<size_t>(e)])] -
                         alpha[static_cast<size_t>(e)];
        zr[static_cast<size_t>(dst[static_cast<size_t>(e)])] += std::cos(t);
        zi[static_cast<size_t>(dst[static_cast<size_t>(e)])] += std::sin(t);
      }
      for (int v : sel[static_cast<size_t>(c)]) {
        const double a = zr[static_cast<size_t>(v)], b = zi[static_cast<size_t>(v)];
        if (a * a + b * b <= 1e-30) continue;
        const double tgt = std::atan2(b, a);
        const double d = wrap_pi(tgt - phi[static_cast<size_t>(v)]);
        dmax = std::max(dmax, std::abs(d));
        phi[static_cast<size_t>(v)] += omega * d;
      }
    }
    if (dmax < tol) {
      out.sweeps = s + 1;
      out.converged = true;
      return out;
    }
  }
  out.sweeps = sweeps;
  return out;
}

inline double xy_energy(const std::vector<int>& src, const std::vector<int>& dst,
                        const std::vector<double>& alpha, const std::vector<double>& phi) {
  double E = 0;
  for (size_t e = 0; e < alpha.size(); ++e)
    E += 1.0 - std::cos(alpha[e] + phi[static_cast<size_t>(dst[e])] -
                        phi[static_cast<size_t>(src[e])]);
  return E;
}

// ---------------------------------------------------------------------------
// Gauged principal logarithms.

struct GaugedLogs {
  std::vector<double> alpha;        // so(2) angle per edge
  std::vector<Vec2d> u;             // boost part per edge
  std::vector<std::uint8_t> ok;     // principal log valid and |alpha| <= pi/2
  std::vector<Mat3d> gauged;        // exact gauged transports, every edge
  double recomposition = 0;         // max |exp(alpha Jz + b(u)) - gauged|
  int bad_edges = 0;
};

inline GaugedLogs gauged_logs(const TriangulatedSurface& m, const std::vector<Mat3d>& T,
                              const std::vector<Vec3d>& f, const std::vector<double>& zeta,
                              const std::vector<double>& phi) {
  GaugedLogs out;
  const int E = m.E;
  out.alpha.assign(static_cast<size_t>(E), 0.0);
  out.u.assign(static_cast<size_t>(E), Vec2d::Zero());
  out.ok.assign(static_cast<size_t>(E), 1);
  out.gauged.resize(static_cast<size_t>(E));
  std::vector<Mat3d> G(static_cast<size_t>(m.V));
  for (int v = 0; v < m.V; ++v) {
    const Vec3<LD> x = f[static_cast<size_t>(v)].cast<LD>();
    G[static_cast<size_t>(v)] =
        rot_z(phi[static_cast<size_t>(v)] + zeta[static_cast<size_t>(v)]) *
        to_f64(boost_to_origin(x));
  }
  for (int e = 0; e < E; ++e) {
    const int i = m.esrc[static_cast<size_t>(e)];
    const int j = m.edst[static_cast<size_t>(e)];
    const Mat3d That = G[static_cast<size_t>(j)] * T[static_cast<size_t>(e)] *
                       soinv(G[static_cast<size_t>(i)]);
    out.gauged[static_cast<size_t>(e)] = That;
    Mat3d L;
    try {
      L = so21_log(That);
    } catch (const log_branch_error&) {
      out.ok[static_cast<size_t>(e)] = 0;
      ++out.bad_edges;
      continue;
    }
    out.alpha[static_cast<size_t>(e)] = L(1, 0);
    out.u[static_cast<size_t>(e)] = Vec2d(L(0, 2), L(1, 2));
    if (std::abs(out.alpha[static_cast<size_t>(e)]) > pi / 2) {
      out.ok[static_cast<size_t>(e)] = 0;
      ++out.bad_edges;
      continue;
    }
    const Mat3d R = so21_exp(out.alpha[static_cast<size_t>(e)], out.u[static_cast<size_t>(e)]);
    out.recomposition =
        std::max(out.recomposition, (R - That).cwiseAbs().maxCoeff());
  }
  return out;
}

// polar angles of the gauged transports before the XY relaxation
inline std::vector<double> edge_angles(const TriangulatedSurface& m, const std::vector<Mat3d>& T,
                                       const std::vector<Vec3d>& f,
                                       const std::vector<double>& zeta) {
  std::vector<Mat3d> G(static_cast<size_t>(m.V));
  for (int v = 0; v < m.V; ++v) {
    const Vec3<LD> x = f[static_cast<size_t>(v)].cast<LD>();
    G[static_cast<size_t>(v)] = rot_z(zeta[static_cast<size_t>(v)]) * to_f64(boost_to_origin(x));
  }
  std::vector<double> a(static_cast<size_t>(m.E));
  for (int e = 0; e < m.E; ++e) {
    const Mat3d That = G[static_cast<size_t>(m.edst[static_cast<size_t>(e)])] *
                       T[static_cast<size_t>(e)] *
                       soinv(G[static_cast<size_t>(m.esrc[static_cast<size_t>(e)])]);
    a[static_cast<size_t>(e)] = polar_angle(That);
  }
  return a;
}

// ---------------------------------------------------------------------------
// The pair, its residuals, sigma, and recomposition.

struct PairResiduals {
  double r1 = 0;    // curvature equation, mass norm over kept faces
  double r2 = 0;    // codifferential equation, mass norm over kept faces
  double hopf = 0;  // Hopf-type quadratic defect of psi, mass norm
  int kept_faces = 0;
  int excluded_faces = 0;
  std::vector<std::uint8_t> keep;
};

struct GaugeDiagnostics {
  double lambda1 = 0;
  int sor_sweeps = 0;
  bool sor_converged = false;
  double xy_energy = 0;
  int vortex_faces = 0;
  double recomposition = 0;
  int bad_edges = 0;
};

struct HitchinPair {
  int genus = 0;
  int E = 0;
  std::vector<double> alpha;     // SO(2) part per edge
  std::vector<Vec2d> u;          // symmetric part psi = b(u) per edge
  std::vector<std::uint8_t> ok;  // split succeeded; excluded edges carry `gauged`
  std::vector<Mat3d> gauged;     // exact gauged flat transports
  int component_tag = 0;         // lands in M_{2g-2}; tag stores 2g-2
  int w2_tag = 0;                // only w2 = 0 pairs are produced
  PairResiduals res;
  GaugeDiagnostics diag;
};

inline int vortex_count(const TriangulatedSurface& m, const std::vector<double>& alpha) {
  int n = 0;
  for (const auto& face : m.faces) {
    double s = 0;
    for (const auto& [eid, sgn] : face.trip) s += alpha[static_cast<size_t>(eid)] * sgn;
    if (std::abs(s) > pi) ++n;
  }
  return n;
}

// Hitchin-equation residuals by the truncated BCH of the face holonomy in the
// split gauge: the so(2) entry is F_A + [Phi, Phi*], the boost entries are the
// covariant codifferential of psi. Faces touching an excluded or large-angle
// edge are left out (the vortex set carries the Euler class and admits no
// small principal log).
inline PairResiduals pair_residuals(const TriangulatedSurface& m, const std::vector<double>& alpha,
                                    const std::vector<Vec2d>& u,
                                    const std::vector<std::uint8_t>& ok,
                                    double angle_threshold = pi / 4) {
  PairResiduals out;
  out.keep.assign(static_cast<size_t>(m.F), 1);
  double s1 = 0, s2 = 0, sh = 0;
  for (int fi = 0; fi < m.F; ++fi) {
    const auto& face = m.faces[static_cast<size_t>(fi)];
    bool bad = false;
    for (const auto& [eid, sgn] : face.trip)
      if (!ok[static_cast<size_t>(eid)] ||
          std::abs(alpha[static_cast<size_t>(eid)]) > angle_threshold)
        bad = true;
    if (bad) {
      out.keep[static_cast<size_t>(fi)] = 0;
      ++out.excluded_faces;
      continue;
    }
    const double A = m.face_area[static_cast<size_t>(fi)];
    Mat3d L[3];
    double acc = 0;
    Vec2d mid[3];
    for (int k = 0; k < 3; ++k) {
      const auto [eid, sgn] = face.trip[static_cast<size_t>(k)];
      const double a = alpha[static_cast<size_t>(eid)] * sgn;
      const Vec2d uu = sgn * u[static_cast<size_t>(eid)];
      L[k] = sgn * Mat3d(alpha[static_cast<size_t>(eid)] * jz<double>() +
                         bmat(u[static_cast<size_t>(eid)]));
      mid[k] = detail::rot2(acc + a / 2) * uu;
      acc += a;
    }
    const Mat3d W = detail::bch3(L[0], L[1], L[2]);
    const double r1f = W(1, 0);
    const double r2f = std::hypot(W(0, 2), W(1, 2));
    s1 += A * r1f * r1f;
    s2 += A * r2f * r2f;
    // Hopf sample: psi x psi in the frame where the unit-determinant length
    // Gram is orthonormal; the trace-free (2,0) magnitude is the defect
    const double l1 = m.edge_length[static_cast<size_t>(face.trip[0].first)];
    const double l2 = m.edge_length[static_cast<size_t>(face.trip[1].first)];
    const double l3 = m.edge_length[static_cast<size_t>(face.trip[2].first)];
    const double g12 = (l3 * l3 - l1 * l1 - l2 * l2) / 2;
    Eigen::Matrix2d Gl;
    Gl << l1 * l1, g12, g12, l2 * l2;
    const double det = Gl.determinant();
    if (!(det > 0)) throw invariant_error("pair_residuals: degenerate length Gram");
    const Eigen::Matrix2d S = detail::spd_inv_sqrt_2x2(Eigen::Matrix2d(Gl / std::sqrt(det)));
    Eigen::Matrix2d Gp;
    Gp << mid[0].dot(mid[0]), mid[0].dot(mid[1]), mid[0].dot(mid[1]), mid[1].dot(mid[1]);
    const Eigen::Matrix2d Q = S * Gp * S;
    const double q = std::hypot(Q(0, 0) - Q(1, 1), Q(0, 1) + Q(1, 0));
    sh += A * q * q;
    ++out.kept_faces;
  }
  out.r1 = std::sqrt(s1);
  out.r2 = 0.5 * std::sqrt(s2);
  out.hopf = std::sqrt(sh);
  return out;
}

inline HitchinPair extract_pair(const TriangulatedSurface& m, const std::vector<Mat3d>& T,
                                const std::vector<Vec3d>& f) {
  const std::vector<double> zeta = radial_gauge(m);
  const std::vector<double> a0 = edge_angles(m, T, f, zeta);
  const FieldAngles fa = eig_field_angles(m, T);
  std::vector<double> b0(static_cast<size_t>(m.E));
  for (int e = 0; e < m.E; ++e)
    b0[static_cast<size_t>(e)] =
        wrap_pi(a0[static_cast<size_t>(e)] +
                fa.phi[static_cast<size_t>(m.edst[static_cast<size_t>(e)])] -
                fa.phi[static_cast<size_t>(m.esrc[static_cast<size_t>(e)])]);
  const SorResult sor = xy_relax_sor(m.V, m.esrc, m.edst, b0);
  std::vector<double> phi(static_cast<size_t>(m.V));
  for (int v = 0; v < m.V; ++v)
    phi[static_cast<size_t>(v)] = fa.phi[static_cast<size_t>(v)] + sor.phi[static_cast<size_t>(v)];
  const GaugedLogs gl = gauged_logs(m, T, f, zeta, phi);

  HitchinPair p;
  p.genus = m.genus;
  p.E = m.E;
  p.alpha = gl.alpha;
  p.u = gl.u;
  p.ok = gl.ok;
  p.gauged = gl.gauged;
  p.component_tag = 2 * m.genus - 2;
  p.w2_tag = 0;
  p.diag.lambda1 = fa.lambda1;
  p.diag.sor_sweeps = sor.sweeps;
  p.diag.sor_converged = sor.converged;
  p.diag.xy_energy = xy_energy(m.esrc, m.edst, b0, sor.phi);
  p.diag.vortex_faces = vortex_count(m, gl.alpha);
  p.diag.recomposition = gl.recomposition;
  p.diag.bad_edges = gl.bad_edges;
  p.res = pair_residuals(m, p.alpha, p.u, p.ok);
  return p;
}

// rebuild the per-edge transports; excluded edges keep their carried matrices
inline std::vector<Mat3d> compose_flat(const HitchinPair& p) {
  std::vector<Mat3d> T(static_cast<size_t>(p.E));
  for (int e = 0; e < p.E; ++e)
    T[static_cast<size_t>(e)] = p.ok[static_cast<size_t>(e)]
                                    ? Mat3d(so21_exp(p.alpha[static_cast<size_t>(e)],
                                                     p.u[static_cast<size_t>(e)]))
                                    : p.gauged[static_cast<size_t>(e)];
  return T;
}

// sigma: Phi -> -Phi, i.e. psi -> -psi; carried matrices are conjugated by the
// exact half-turn (rot_z(pi) commutes with Jz and negates b(u)), so the
// sigma-image of every transport is R T R^{-1} globally.
inline HitchinPair sigma(const TriangulatedSurface& m, const HitchinPair& p) {
  HitchinPair q = p;
  const Mat3d R = detail::sigma_halfturn();
  for (int e = 0; e < p.E; ++e) {
    q.u[static_cast<size_t>(e)] = -p.u[static_cast<size_t>(e)];
    q.gauged[static_cast<size_t>(e)] = R * p.gauged[static_cast<size_t>(e)] * R;
  }
  q.res = pair_residuals(m, q.alpha, q.u, q.ok);
  return q;
}

}  // namespace hitchlab
