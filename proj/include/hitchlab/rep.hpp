#pragma once
// Flat SO(2,1) structures on a triangulated surface.
//
// A representation is published as the standard generator tuple
// [A_1, B_1, ..., A_g, B_g] satisfying prod_j [A_j, B_j] = 1, together with
// the induced edge transports on the quotient mesh. The raw side-pairing
// maps b_j of the fundamental polygon enter the published tuple as
// B_j = b_j^{-1}, which is what makes the surface-group relator hold in the
// commutator form.
//
// Transports use the vertex-centered gauge of mesh.hpp: in each vertex's
// chart the vertex itself sits at e3, and an edge transport T_e carries fiber
// data from the source chart to the destination chart. Parallel transport
// around any face is the identity for a flat representation; the polygon
// picture with identity interior transports and generator-valued
// side-crossings is the same connection in a different gauge.

#include "mesh.hpp"

#include <Eigen/Eigenvalues>

#include <utility>
#include <vector>

namespace hitchlab {

// chi(M) = sqrt(max(tr M + 1, 0)); equals |2 cosh(l/2)| on hyperbolics and
// matches the absolute SL(2,R) character through the double cover
inline double character(const Mat3d& M) {
  return std::sqrt(std::max(M.trace() + 1.0, 0.0));
}

// word = list of (generator index, +1 | -1), letters left to right
inline Mat3d eval_word(const std::vector<Mat3d>& gens,
                       const std::vector<std::pair<int, int>>& word) {
  Mat3d M = Mat3d::Identity();
  for (const auto& [k, p] : word) M = M * (p > 0 ? gens[k] : Mat3d(soinv(gens[k])));
  return M;
}

inline std::vector<Mat3d> conjugated(const std::vector<Mat3d>& gens, const Mat3d& C) {
  std::vector<Mat3d> out;
  out.reserve(gens.size());
  const Mat3d Ci = soinv(C);
  for (const auto& M : gens) out.push_back(C * M * Ci);
  return out;
}

// sup-norm defect of the surface-group relator prod_j [A_j, B_j]
inline double relator_defect(const std::vector<Mat3d>& gens) {
  const int g = static_cast<int>(gens.size()) / 2;
  Mat3d P = Mat3d::Identity();
  for (int j = 0; j < g; ++j) {
    const Mat3d &A = gens[2 * j], &B = gens[2 * j + 1];
    P = P * A * B * soinv(A) * soinv(B);
  }
  return (P - Mat3d::Identity()).cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Euler class by winding of the polar rotation angle along the relator path.

namespace detail {

struct LetterSplit {
  double th;  // polar rotation angle
  Vec2d v;    // boost translation vector
};

// M = rot_z(th) boost_xy(v); residual of the split must stay below 1e-6
inline LetterSplit letter_split(const Mat3d& M) {
  const double th = polar_angle(M);
  const Mat3d P = rot_z(-th) * M;
  const double ell = std::acosh(std::max(P(2, 2), 1.0));
  Vec2d v(P(0, 2), P(1, 2));
  const double n = v.norm();
  v = (n < 1e-12) ? Vec2d::Zero() : Vec2d(v * (ell / n));
  const double resid = (rot_z(th) * boost_xy(v) - M).cwiseAbs().maxCoeff();
  if (resid > 1e-6)
    throw invariant_error("euler_class: rotation-boost split residual exceeds 1e-6");
  return {th, v};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// PSL(2,R) <-> SO(2,1): the adjoint representation and its local inverse.

using Mat2d = Eigen::Matrix2d;

namespace detail {

// sl(2) basis whose adjoint action matches the (x, y, t) coordinates of h
inline Mat2d sl2_basis(int k) {
  Mat2d E;
  switch (k) {
    case 0: E << 1, 0, 0, -1; break;
    case 1: E << 0, 1, 1, 0; break;
    default: E << 0, -1, 1, 0; break;
  }
  return E;
}

inline Mat2d exp_sl2(const Mat2d& S) {
  const double mu2 = -S.determinant();  // S traceless: S^2 = mu^2 I
  if (mu2 <= 1e-300) return Mat2d(Mat2d::Identity() + S);
  const double mu = std::sqrt(mu2);
  return Mat2d(std::cosh(mu) * Mat2d::Identity() + (std::sinh(mu) / mu) * S);
}

inline Mat2d rot_half(double t) {
  Mat2d R;
  const double c = std::cos(t / 2), s = std::sin(t / 2);
  R << c, -s, s, c;
  return R;
}

}  // namespace detail

// adjoint image: M_kj = h_kk * tr(E_k m E_j m^{-1}) / 2
inline Mat3d so21_from_psl2(const Mat2d& m) {
  if (std::abs(m.determinant() - 1.0) > 1e-12)
    throw invariant_error("so21_from_psl2: input is not unimodular");
  Mat2d mi;
  mi << m(1, 1), -m(0, 1), -m(1, 0), m(0, 0);
  const double hkk[3] = {1.0, 1.0, -1.0};
  Mat3d M;
  for (int k = 0; k < 3; ++k) {
    const Mat2d left = detail::sl2_basis(k);
    for (int j = 0; j < 3; ++j)
      M(k, j) = hkk[k] * 0.5 * (left * m * detail::sl2_basis(j) * mi).trace();
  }
  return M;
}

// inverse through the polar split M = K(theta) exp(b(u)); the PSL(2,R)
// preimage is the rotation by theta/2 times the corresponding boost (the
// elliptic angle halves back); defined up to overall sign
inline Mat2d psl2_from_so21(const Mat3d& M) {
  if (!is_so21(M)) throw invariant_error("psl2_from_so21: input is not in SO(2,1)");
  const double th = polar_angle(M);
  const Mat3d B = rot_z(-th) * M;
  const Mat3d L = so21_log(B);
  const double u1 = L(0, 2), u2 = L(1, 2);
  const Mat2d S = 0.5 * (u1 * detail::sl2_basis(1) - u2 * detail::sl2_basis(0));
  return Mat2d(detail::rot_half(th) * detail::exp_sl2(S));
}

// |trace| of a word evaluated in the PSL(2,R) picture (conjugation invariant;
// empty word gives 2)
inline double psl2_character(const std::vector<Mat2d>& gens,
                             const std::vector<std::pair<int, int>>& word) {
  Mat2d M = Mat2d::Identity();
  for (const auto& [k, p] : word) {
    const Mat2d& g = gens[static_cast<size_t>(k)];
    if (p > 0) {
      M = M * g;
    } else {
      Mat2d gi;
      gi << g(1, 1), -g(0, 1), -g(1, 0), g(0, 0);
      M = M * gi;
    }
  }
  return std::abs(M.trace());
}

struct EulerResult {
  int e = 0;
  double winding_residual = 0;  // |phi - 2 pi e|
  int steps = 0;                // geodesic steps per letter that succeeded
};

// Winding number of the polar angle along the straight-line homotopy of the
// relator word, evaluated on n geodesic steps per letter. Steps start at 64
// and double whenever two consecutive rotation angles differ by more than 1
// radian (a conservative margin below the pi/2 design bound).
inline EulerResult euler_class(const std::vector<Mat3d>& gens, int n0 = 64, int nmax = 65536) {
  if (gens.size() % 2 != 0 || gens.empty())
    throw invariant_error("euler_class: generator list must be [A_1,B_1,...,A_g,B_g]");
  const int g = static_cast<int>(gens.size()) / 2;
  std::vector<std::pair<Mat3d, int>> letters;
  for (int j = 0; j < g; ++j) {
    letters.emplace_back(gens[2 * j], +1);
    letters.emplace_back(gens[2 * j + 1], +1);
    letters.emplace_back(gens[2 * j], -1);
    letters.emplace_back(gens[2 * j + 1], -1);
  }
  std::vector<detail::LetterSplit> splits;
  splits.reserve(letters.size());
  for (const auto& [M, sgn] : letters) splits.push_back(detail::letter_split(M));

  // relator path: partial products on the left, letters traversed s: 0 -> 1
  // on the right; the unwrapped polar angle closes at 2 pi e
  Mat3d acc = Mat3d::Identity();
  double phi = 0, prev = 0;
  int worst_n = n0;
  for (size_t li = 0; li < letters.size(); ++li) {
    const auto& [M, sgn] = letters[li];
    const auto& [th, v] = splits[li];
    int n = n0;
    for (;; n *= 2) {
      if (n > nmax)
        throw tolerance_error("euler_class: winding steps exceeded 65536 without resolving");
      bool ok = true;
      double p = prev, a2 = phi;
      for (int k = 1; k <= n; ++k) {
        const double s = static_cast<double>(k) / n;
        const Mat3d L = (sgn > 0)
                            ? Mat3d(acc * rot_z(s * th) * boost_xy(Vec2d(s * v)))
                            : Mat3d(acc * boost_xy(Vec2d(-s * v)) * rot_z(-s * th));
        const double cur = polar_angle(L);
        const double d = std::remainder(cur - p, 2 * pi);
        if (std::abs(d) > 1.0) {
          ok = false;
          break;
        }
        a2 += d;
        p = cur;
      }
      if (ok) {
        phi = a2;
        prev = p;
        worst_n = std::max(worst_n, n);
        break;
      }
    }
    acc = acc * (sgn > 0 ? M : Mat3d(soinv(M)));
  }
  const long e = std::lround(phi / (2 * pi));
  const double resid = std::abs(phi - 2 * pi * static_cast<double>(e));
  if (std::abs(e) > 2 * g - 2)
    throw invariant_error("euler_class: Milnor-Wood inequality |e| <= 2g-2 violated");
  return {static_cast<int>(e), resid, worst_n};
}

// ---------------------------------------------------------------------------
// Irreducibility certificate: a representation into SO(2,1) is reducible iff
// the generators share a fixed direction; candidate directions are the real
// eigenvectors of the least-central generator. Residual threshold 1e-8.

inline bool irreducible_certificate(const std::vector<Mat3d>& gens, double tol = 1e-8) {
  int best = -1;
  double bestdev = -1;
  for (size_t k = 0; k < gens.size(); ++k) {
    const double dev = (gens[k] - Mat3d::Identity()).cwiseAbs().maxCoeff();
    if (dev > bestdev) {
      bestdev = dev;
      best = static_cast<int>(k);
    }
  }
  if (best < 0 || bestdev <= tol) return false;  // (approximately) central
  Eigen::EigenSolver<Mat3d> es(gens[best]);
  for (int c = 0; c < 3; ++c) {
    if (std::abs(es.eigenvalues()[c].imag()) > tol * (1 + std::abs(es.eigenvalues()[c]))) continue;
    Vec3d v = es.eigenvectors().col(c).real();
    const double nv = v.norm();
    if (nv < tol) continue;
    v /= nv;
    bool common = true;
    for (const auto& G : gens) {
      const Vec3d w = G * v;
      const double lam = v.dot(w);
      if ((w - lam * v).norm() > tol * std::max(w.norm(), 1.0)) {
        common = false;
        break;
      }
    }
    if (common) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Representations bound to a surface.

struct SurfaceRep {
  int genus = 0;
  std::vector<Mat3d> generators;  // [A_1, B_1, ..., A_g, B_g]
  std::vector<Mat3d> transports;  // per edge, canonical orientation, vertex gauge
  double relator_residual = 0;
  int euler_class = 0;
  double euler_residual = 0;
  bool irreducible = false;
};

// character of a word over the published tuple, evaluated in the PSL(2,R)
// picture as the spec'd |trace|; agrees with character() through the cover
inline double rep_character(const SurfaceRep& rep,
                            const std::vector<std::pair<int, int>>& word) {
  std::vector<Mat2d> gens2;
  gens2.reserve(rep.generators.size());
  for (const auto& G : rep.generators) gens2.push_back(psl2_from_so21(G));
  return psl2_character(gens2, word);
}

inline double face_curvature(const TriangulatedSurface& m, const std::vector<Mat3d>& T) {
  double worst = 0;
  for (const auto& f : m.faces) {
    Mat3d H = Mat3d::Identity();
    for (const auto& [eid, sgn] : f.trip) H = (sgn > 0 ? T[eid] : Mat3d(soinv(T[eid]))) * H;
    worst = std::max(worst, (H - Mat3d::Identity()).cwiseAbs().maxCoeff());
  }
  return worst;
}

inline SurfaceRep fuchsian_rep(const TriangulatedSurface& m) {
  SurfaceRep rep;
  rep.genus = m.genus;
  for (const auto& G : m.pre->poly.standard_generators()) rep.generators.push_back(to_f64(G));
  rep.transports = m.quot->T;  // long-double weld pass, snapshot to f64
  rep.relator_residual = relator_defect(rep.generators);
  const EulerResult er = euler_class(rep.generators);
  rep.euler_class = er.e;
  rep.euler_residual = er.winding_residual;
  rep.irreducible = irreducible_certificate(rep.generators);
  return rep;
}

// Arbitrary generator tuple on the same weld combinatorics. Generators are
// validated as SO+(2,1) but NOT required to satisfy the relator exactly; the
// relator defect is recorded so callers (and the store) can enforce their own
// thresholds. Perturbed tuples yield non-flat transports by design.
inline SurfaceRep rep_from_generators(const TriangulatedSurface& m,
                                      const std::vector<Mat3d>& std_gens) {
  if (static_cast<int>(std_gens.size()) != 2 * m.genus)
    throw invariant_error("rep_from_generators: expected 2g generators");
  for (const auto& G : std_gens)
    if (!is_so21(G, 1e-8))
      throw invariant_error("rep_from_generators: generator fails SO+(2,1) check (tol 1e-8)");
  SurfaceRep rep;
  rep.genus = m.genus;
  rep.generators = std_gens;
  // undo the published relabeling: raw side pairings are a_j = A_j, b_j = B_j^{-1}
  std::vector<Mat3d> raw(2 * m.genus);
  for (int j = 0; j < m.genus; ++j) {
    raw[j] = std_gens[2 * j];
    raw[m.genus + j] = soinv(std_gens[2 * j + 1]);
  }
  rep.transports = transports_for<double>(*m.pre, *m.quot, raw, /*vertex_gauge=*/true);
  rep.relator_residual = relator_defect(rep.generators);
  const EulerResult er = euler_class(rep.generators);
  rep.euler_class = er.e;
  rep.euler_residual = er.winding_residual;
  rep.irreducible = irreducible_certificate(rep.generators);
  return rep;
}

// Trivial representation: identity generators, identity transports (the
// vertex gauge is dropped since any pure-gauge dressing of the identity
// connection represents the same flat structure).
inline SurfaceRep trivial_rep(const TriangulatedSurface& m) {
  SurfaceRep rep;
  rep.genus = m.genus;
  rep.generators.assign(2 * m.genus, Mat3d::Identity());
  rep.transports.assign(m.E, Mat3d::Identity());
  rep.relator_residual = 0;
  rep.euler_class = 0;
  rep.euler_residual = 0;
  rep.irreducible = false;
  return rep;
}

}  // namespace hitchlab
