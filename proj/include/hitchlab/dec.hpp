#pragma once
// Bundle-valued discrete exterior calculus over a flat SO(2,1) structure.
//
// Cochain conventions: 0-cochains live on vertices, 1-cochains on oriented
// edges with the value anchored at the edge's source vertex, 2-cochains on
// faces anchored at the face's first traversal corner. A reversed edge
// carries value(-e) = -transport(e) * value(e); with source anchoring this
// makes d1(d0(u)) = 0 an exact algebraic identity for flat transports.
//
//   (d0 u)(e: i -> j) = T_e^{-1} u_j - u_i          (value in chart i)
//   (d1 w)(f)         = oriented, transported sum of the three edge values
//                       moved to the anchor corner of f
//
// Hodge masses are the mesh weights (vertex / clamped-cotangent edge / face
// area) tensored with an auxiliary SPD fiber metric block per anchor vertex.
// Two fiber metrics are offered: the Euclidean one in each vertex-centered
// chart (the default; it is simultaneously the h-compatible positive metric
// x1^2+x2^2+x3^2 at the chart base point e3) and the Euclidean metric of the
// shared polygon chart, which differs from the first by the gauge boosts.
// Cohomology dimensions are metric-independent, so the choice is exposed as
// a robustness test, not a tuning knob.

#include "rep.hpp"
#include "spectra.hpp"

namespace hitchlab {

struct Cochain {
  int degree = 0;
  Eigen::VectorXd values;  // 3 * (#cells), contiguous fiber blocks
};

enum class AuxMetric { vertex_euclidean, polygon_euclidean };

namespace detail {

inline void put_block(std::vector<Eigen::Triplet<double>>& trips, int br, int bc,
                      const Mat3d& B) {
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      if (B(r, c) != 0.0) trips.emplace_back(3 * br + r, 3 * bc + c, B(r, c));
}

inline void spd_sqrt(const Mat3d& Q, Mat3d& Qh, Mat3d& Qhi) {
  Eigen::SelfAdjointEigenSolver<Mat3d> es(Q);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0)
    throw invariant_error("aux fiber metric block is not positive definite");
  const Vec3d r = es.eigenvalues().cwiseSqrt();
  Qh = es.eigenvectors() * r.asDiagonal() * es.eigenvectors().transpose();
  Qhi = es.eigenvectors() * r.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

// block-diagonal sparse matrix with blocks w[c] * B[anchor[c]]
inline SpMat block_mass(const std::vector<double>& w, const std::vector<Mat3d>& B,
                        const std::vector<int>& anchor) {
  const int n = static_cast<int>(w.size());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(9 * n);
  for (int c = 0; c < n; ++c) put_block(trips, c, c, Mat3d(w[c] * B[anchor[c]]));
  SpMat M(3 * n, 3 * n);
  M.setFromTriplets(trips.begin(), trips.end());
  return M;
}

}  // namespace detail

inline SpMat d0_matrix(const TriangulatedSurface& m, const std::vector<Mat3d>& T) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(18 * m.E);
  const Mat3d mI = -Mat3d::Identity();
  for (int e = 0; e < m.E; ++e) {
    detail::put_block(trips, e, m.esrc[e], mI);
    detail::put_block(trips, e, m.edst[e], soinv(T[e]));
  }
  SpMat d0(3 * m.E, 3 * m.V);
  d0.setFromTriplets(trips.begin(), trips.end());
  return d0;
}

inline SpMat d1_matrix(const TriangulatedSurface& m, const std::vector<Mat3d>& T) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(27 * m.F);
  for (int fid = 0; fid < m.F; ++fid) {
    Mat3d pre = Mat3d::Identity();  // transport back to the anchor corner
    for (const auto& [eid, sgn] : m.faces[fid].trip) {
      detail::put_block(trips, fid, eid, sgn > 0 ? pre : Mat3d(-pre * T[eid]));
      const Mat3d leg = sgn > 0 ? T[eid] : Mat3d(soinv(T[eid]));
      pre = pre * soinv(leg);
    }
  }
  SpMat d1(3 * m.F, 3 * m.E);
  d1.setFromTriplets(trips.begin(), trips.end());
  return d1;
}

// index of the Dirac complex from raw cell counts: (3E) - (3V + 3F) = 6g - 6
inline int dirac_index(const TriangulatedSurface& m) { return 3 * m.E - 3 * (m.V + m.F); }

struct DiracOperator {
  AuxMetric aux = AuxMetric::vertex_euclidean;
  double mass_scale = 1.0;
  double curvature = 0;  // checked flat at assembly
  SpMat d0, d1;
  SpMat M0, M0i, M0hi;       // vertex masses
  SpMat M1, M1i, M1h, M1hi;  // edge masses
  SpMat M2, M2h;             // face masses
  SpMat codiff;              // M0^{-1} d0^T M1
  SpMat op;                  // [codiff ; d1], (3V+3F) x 3E
};

inline DiracOperator assemble_dirac(const TriangulatedSurface& m, const std::vector<Mat3d>& T,
                                    AuxMetric aux = AuxMetric::vertex_euclidean,
                                    double mass_scale = 1.0) {
  DiracOperator D;
  D.aux = aux;
  D.mass_scale = mass_scale;
  D.curvature = face_curvature(m, T);
  if (D.curvature > 1e-8)
    throw invariant_error("assemble_dirac: representation is not flat (face curvature > 1e-8)");
  D.d0 = d0_matrix(m, T);
  D.d1 = d1_matrix(m, T);

  std::vector<Mat3d> Q(m.V, Mat3d::Identity());
  if (aux == AuxMetric::polygon_euclidean)
    for (int v = 0; v < m.V; ++v) {
      const Mat3d Gi = soinv(to_f64(m.quot->Gv[v]));
      Q[v] = Gi.transpose() * Gi;
    }
  std::vector<Mat3d> Qi(m.V), Qh(m.V), Qhi(m.V);
  for (int v = 0; v < m.V; ++v) {
    detail::spd_sqrt(Q[v], Qh[v], Qhi[v]);
    Qi[v] = Qhi[v] * Qhi[v];
  }

  std::vector<double> w0 = m.vertex_weight, w1 = m.hodge_edge_weights(), w2 = m.face_area;
  for (double& x : w0) x *= mass_scale;
  for (double& x : w1) x *= mass_scale;
  for (double& x : w2) x *= mass_scale;
  std::vector<double> w0i(w0), w0hi(w0), w1i(w1), w1h(w1), w1hi(w1), w2h(w2);
  for (double& x : w0i) x = 1.0 / x;
  for (double& x : w0hi) x = 1.0 / std::sqrt(x);
  for (double& x : w1i) x = 1.0 / x;
  for (double& x : w1h) x = std::sqrt(x);
  for (double& x : w1hi) x = 1.0 / std::sqrt(x);
  for (double& x : w2h) x = std::sqrt(x);

  std::vector<int> va(m.V);
  for (int v = 0; v < m.V; ++v) va[v] = v;
  std::vector<int> fa(m.F);
  for (int f = 0; f < m.F; ++f) fa[f] = m.faces[f].vclass[0];

  D.M0 = detail::block_mass(w0, Q, va);
  D.M0i = detail::block_mass(w0i, Qi, va);
  D.M0hi = detail::block_mass(w0hi, Qhi, va);
  D.M1 = detail::block_mass(w1, Q, m.esrc);
  D.M1i = detail::block_mass(w1i, Qi, m.esrc);
  D.M1h = detail::block_mass(w1h, Qh, m.esrc);
  D.M1hi = detail::block_mass(w1hi, Qhi, m.esrc);
  D.M2 = detail::block_mass(w2, Q, fa);
  D.M2h = detail::block_mass(w2h, Qh, fa);

  D.codiff = D.M0i * SpMat(D.d0.transpose()) * D.M1;

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(D.codiff.nonZeros() + D.d1.nonZeros());
  for (int c = 0; c < D.codiff.outerSize(); ++c)
    for (SpMat::InnerIterator it(D.codiff, c); it; ++it)
      trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (int c = 0; c < D.d1.outerSize(); ++c)
    for (SpMat::InnerIterator it(D.d1, c); it; ++it)
      trips.emplace_back(3 * m.V + static_cast<int>(it.row()), static_cast<int>(it.col()),
                         it.value());
  D.op.resize(3 * (m.V + m.F), 3 * m.E);
  D.op.setFromTriplets(trips.begin(), trips.end());
  return D;
}

namespace detail {
inline SpMat symmetrized(const SpMat& S) {
  SpMat St = SpMat(S.transpose());
  return 0.5 * (S + St);
}
}  // namespace detail

// M1^{1/2}-conjugated normal matrix on 1-cochains; kernel = harmonic forms
inline SpMat one_form_normal_matrix(const DiracOperator& D) {
  const SpMat A = D.M1h * D.d0 * D.M0i * SpMat(D.d0.transpose()) * D.M1h;
  const SpMat B = D.M1hi * SpMat(D.d1.transpose()) * D.M2 * D.d1 * D.M1hi;
  return detail::symmetrized(SpMat(A + B));
}

inline SpMat zero_form_normal_matrix(const DiracOperator& D) {
  return detail::symmetrized(
      SpMat(D.M0hi * SpMat(D.d0.transpose()) * D.M1 * D.d0 * D.M0hi));
}

inline SpMat two_form_normal_matrix(const DiracOperator& D) {
  return detail::symmetrized(SpMat(D.M2h * D.d1 * D.M1i * SpMat(D.d1.transpose()) * D.M2h));
}

inline double mass_norm(const SpMat& M, const Eigen::VectorXd& x) {
  return std::sqrt(std::max(0.0, x.dot(M * x)));
}

// ---------------------------------------------------------------------------
// Kernel basis of the Dirac operator (the 6g-6 dimensional space).

struct KernelBasis {
  int dim = 0;
  Eigen::MatrixXd eta;              // 3E x dim, M1-orthonormal columns
  Eigen::VectorXd spectrum;         // smallest dim+4 eigenvalues of the normal matrix
  double gap_ratio = 0;             // |sigma_{m+1}| / |sigma_m|
  Eigen::VectorXd residual_codiff;  // ||codiff eta_i||_{M0} per column
  Eigen::VectorXd residual_d1;      // ||d1 eta_i||_{M2} per column
};

inline KernelBasis kernel_basis(const DiracOperator& D, int expected_dim,
                                const SpectralOptions& sopt = {}) {
  const int k = expected_dim + 4;
  const SpMat S1 = one_form_normal_matrix(D);
  const EigPairs ep = smallest_eigs(S1, k, sopt);
  KernelBasis kb;
  kb.dim = expected_dim;
  kb.spectrum = ep.values;
  const double lo = std::abs(ep.values[expected_dim - 1]);
  const double hi = std::abs(ep.values[expected_dim]);
  kb.gap_ratio = hi / std::max(lo, 1e-300);
  if (kb.gap_ratio < 1e2)
    throw tolerance_error("kernel_basis: ambiguous kernel (spectral gap ratio < 1e2); refine the mesh");

  // back to physical coordinates: eta = M1^{-1/2} x, automatically M1-orthonormal;
  // a Loewdin pass absorbs the fiber-block roundoff
  Eigen::MatrixXd eta = D.M1hi * ep.vectors.leftCols(expected_dim);
  Eigen::MatrixXd G(expected_dim, expected_dim);
  for (int a = 0; a < expected_dim; ++a)
    for (int b = 0; b < expected_dim; ++b) G(a, b) = eta.col(a).dot(D.M1 * eta.col(b));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ges(G);
  if (ges.info() != Eigen::Success || ges.eigenvalues().minCoeff() <= 0)
    throw invariant_error("kernel_basis: Gram matrix not positive definite");
  const Eigen::MatrixXd Gmh = ges.eigenvectors() *
                              ges.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                              ges.eigenvectors().transpose();
  kb.eta = eta * Gmh;

  kb.residual_codiff.resize(expected_dim);
  kb.residual_d1.resize(expected_dim);
  for (int i = 0; i < expected_dim; ++i) {
    kb.residual_codiff[i] = mass_norm(D.M0, D.codiff * kb.eta.col(i));
    kb.residual_d1[i] = mass_norm(D.M2, D.d1 * kb.eta.col(i));
    if (kb.residual_codiff[i] > 1e-8 || kb.residual_d1[i] > 1e-8)
      throw tolerance_error("kernel_basis: basis element residual exceeds 1e-8 in mass norm");
  }
  return kb;
}

// ---------------------------------------------------------------------------
// Cohomology dimensions by the spectral gap rule.

struct CohomologyReport {
  int h0 = 0, h1 = 0, h2 = 0;
  int index = 0;  // h1 - h0 - h2
  Eigen::VectorXd spec0, spec1, spec2;
  double gap0 = 0, gap1 = 0, gap2 = 0;
};

namespace detail {

// zero-mode count: position of the decisive ratio jump in the sorted |spectrum|;
// the h=0 candidate competes with the roundoff floor 1e-14 * max |lambda|
inline std::pair<int, double> zero_count(const Eigen::VectorXd& vals, const char* degree) {
  const int K = static_cast<int>(vals.size());
  const double floor_ = 1e-14 * std::max(std::abs(vals[K - 1]), 1e-300);
  int best = 0;
  double bestscore = std::abs(vals[0]) / floor_;
  for (int h = 1; h < K; ++h) {
    const double score = std::abs(vals[h]) / std::max(std::abs(vals[h - 1]), 1e-300);
    if (score > bestscore) {
      bestscore = score;
      best = h;
    }
  }
  if (bestscore < 1e2)
    throw tolerance_error(std::string("cohomology_report: no decisive spectral gap in degree ") +
                          degree);
  return {best, bestscore};
}

}  // namespace detail

// h1_hint sizes the 1-form eigenwindow (pass 6g for the trivial rep, whose
// kernel is larger than 6g-6); counts come from the spectra, not the hint.
inline CohomologyReport cohomology_report(const TriangulatedSurface& m, const DiracOperator& D,
                                          int h1_hint, const SpectralOptions& sopt = {}) {
  CohomologyReport rep;
  const int k0 = std::min(8, 3 * m.V);
  const int k1 = std::min(h1_hint + 4, 3 * m.E);
  const int k2 = std::min(8, 3 * m.F);
  rep.spec0 = smallest_eigs(zero_form_normal_matrix(D), k0, sopt).values;
  rep.spec1 = smallest_eigs(one_form_normal_matrix(D), k1, sopt).values;
  rep.spec2 = smallest_eigs(two_form_normal_matrix(D), k2, sopt).values;
  std::tie(rep.h0, rep.gap0) = detail::zero_count(rep.spec0, "0");
  std::tie(rep.h1, rep.gap1) = detail::zero_count(rep.spec1, "1");
  std::tie(rep.h2, rep.gap2) = detail::zero_count(rep.spec2, "2");
  if (rep.h1 >= k1 - 1 || rep.h0 >= k0 - 1 || rep.h2 >= k2 - 1)
    throw tolerance_error("cohomology_report: eigenwindow exhausted; increase the hint");
  rep.index = rep.h1 - rep.h0 - rep.h2;
  return rep;
}

// ---------------------------------------------------------------------------
// Coulomb gauge: xi' = xi + d0 v with codifferential zero, v from the SPD
// Bochner Laplacian. A singular Laplacian is reducibility evidence.

struct CoulombResult {
  Eigen::VectorXd xi;  // gauged 1-cochain
  Eigen::VectorXd v;   // 0-cochain potential
  double codiff_residual = 0;  // ||codiff xi'||_{M0} / ||xi||_{M1}
};

class CoulombSolver {
public:
  explicit CoulombSolver(const DiracOperator& D) : D_(&D) {
    const SpMat A = detail::symmetrized(SpMat(SpMat(D.d0.transpose()) * D.M1 * D.d0));
    chol_.compute(A);
    if (chol_.info() != Eigen::Success)
      throw invariant_error(
          "coulomb_gauge: Bochner Laplacian factorization failed (reducible representation?)");
    A_ = A;
  }

  CoulombResult project(const Eigen::VectorXd& xi) const {
    const DiracOperator& D = *D_;
    CoulombResult out;
    const Eigen::VectorXd rhs = -(SpMat(D.d0.transpose()) * (D.M1 * xi));
    out.v = chol_.solve(rhs);
    if (!out.v.allFinite() ||
        (A_ * out.v - rhs).norm() > 1e-10 * std::max(rhs.norm(), 1e-30))
      throw invariant_error(
          "coulomb_gauge: singular Bochner Laplacian (reducible representation?)");
    out.xi = xi + D.d0 * out.v;
    const double nx = mass_norm(D.M1, xi);
    out.codiff_residual =
        nx > 0 ? mass_norm(D.M0, D.codiff * out.xi) / nx : mass_norm(D.M0, D.codiff * out.xi);
    if (nx > 0 && out.codiff_residual > 1e-8)
      throw tolerance_error("coulomb_gauge: residual codifferential exceeds 1e-8 relative");
    return out;
  }

private:
  const DiracOperator* D_;
  SpMat A_;
  Eigen::SimplicialLDLT<SpMat> chol_;
};

inline CoulombResult coulomb_gauge(const DiracOperator& D, const Eigen::VectorXd& xi) {
  return CoulombSolver(D).project(xi);
}

}  // namespace hitchlab
