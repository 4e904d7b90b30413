#pragma once
// Singular flat Lorentzian metrics on Sigma x R from dreibein data.
//
// A dreibein here is a curve t -> xi_t = eta + d0 v_t of bundle-valued
// 1-cochains together with the vertex section u_t = dv_t/dt. The induced
// pseudmetric on a face is the h-Gram of (u_anchor, leg values of xi_t)
// evaluated at the face anchor; samples where the three columns fail to
// span are masked as the singular set rather than reported as geometry.
//
// Time derivatives use second-order stencils (three-point one-sided at the
// ends), so a profile differentiated by the same stencil as the evolution
// residual cancels exactly, while closed-form profiles can carry exact
// derivatives to isolate the finite-difference error itself.

#include "conformal.hpp"
#include "dec.hpp"

#include <cstdint>

namespace hitchlab {

// ---------------------------------------------------------------------------
// Time grids and second-order finite differences.

inline void check_time_grid(const std::vector<double>& t) {
  if (t.size() < 2) throw invariant_error("time grid needs at least 2 points");
  for (size_t i = 0; i + 1 < t.size(); ++i)
    if (!(t[i] < t[i + 1])) throw invariant_error("time grid must be strictly increasing");
}

inline std::vector<double> uniform_grid(double t0, double t1, int n) {
  if (n < 2) throw invariant_error("time grid needs at least 2 points");
  if (!(t0 < t1)) throw invariant_error("time grid must be strictly increasing");
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i)
    t[i] = t0 + (t1 - t0) * (static_cast<double>(i) / static_cast<double>(n - 1));
  t.back() = t1;
  return t;
}

// d/dt of a sampled curve; three-point stencils, exact on quadratics except
// for the unavoidable first-order fallback when only two samples exist.
inline std::vector<Eigen::VectorXd> time_derivative(const std::vector<Eigen::VectorXd>& f,
                                                    const std::vector<double>& t) {
  check_time_grid(t);
  if (f.size() != t.size())
    throw invariant_error("time_derivative: sample count does not match the grid");
  const int n = static_cast<int>(t.size());
  std::vector<Eigen::VectorXd> df(n);
  if (n == 2) {
    df[0] = (f[1] - f[0]) / (t[1] - t[0]);
    df[1] = df[0];
    return df;
  }
  {
    const double h1 = t[1] - t[0], h2 = t[2] - t[1];
    df[0] = -((2 * h1 + h2) / (h1 * (h1 + h2))) * f[0] + ((h1 + h2) / (h1 * h2)) * f[1] -
            (h1 / (h2 * (h1 + h2))) * f[2];
  }
  for (int i = 1; i + 1 < n; ++i) {
    const double h1 = t[i] - t[i - 1], h2 = t[i + 1] - t[i];
    df[i] = (h1 * h1 * f[i + 1] + (h2 * h2 - h1 * h1) * f[i] - h2 * h2 * f[i - 1]) /
            (h1 * h2 * (h1 + h2));
  }
  {
    const double k1 = t[n - 1] - t[n - 2], k2 = t[n - 2] - t[n - 3];
    df[n - 1] = ((2 * k1 + k2) / (k1 * (k1 + k2))) * f[n - 1] -
                ((k1 + k2) / (k1 * k2)) * f[n - 2] + (k1 / (k2 * (k1 + k2))) * f[n - 3];
  }
  return df;
}

// ---------------------------------------------------------------------------
// Gauge-motion profiles v_t.

struct VProfile {
  enum class Kind { zero, linear, exponential, custom };
  Kind kind = Kind::zero;
  Eigen::VectorXd a;                     // closed-form base section (3V)
  double rate = 1.0;                     // exponential: v_t = exp(rate t) a
  std::vector<Eigen::VectorXd> samples;  // custom: one section per grid point
  bool exact_derivative = false;         // closed-form kinds only

  static VProfile zero_profile() { return {}; }

  static VProfile linear(Eigen::VectorXd a0, bool exact = false) {
    VProfile p;
    p.kind = Kind::linear;
    p.a = std::move(a0);
    p.exact_derivative = exact;
    return p;
  }

  // v_t = t * a with a the unit timelike section (0,0,1) in every vertex chart
  static VProfile linear_cone(const TriangulatedSurface& m, bool exact = false) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(3 * m.V);
    for (int v = 0; v < m.V; ++v) a[3 * v + 2] = 1.0;
    return linear(std::move(a), exact);
  }

  static VProfile exponential(Eigen::VectorXd a0, double rate, bool exact = false) {
    VProfile p;
    p.kind = Kind::exponential;
    p.a = std::move(a0);
    p.rate = rate;
    p.exact_derivative = exact;
    return p;
  }

  static VProfile custom(std::vector<Eigen::VectorXd> values) {
    VProfile p;
    p.kind = Kind::custom;
    p.samples = std::move(values);
    return p;
  }

  VProfile negated() const {
    VProfile p = *this;
    if (p.a.size() > 0) p.a = -p.a;
    for (auto& s : p.samples) s = -s;
    return p;
  }

  Eigen::VectorXd value(double t, int nvert, int sample_index) const {
    switch (kind) {
      case Kind::zero: return Eigen::VectorXd::Zero(3 * nvert);
      case Kind::linear: return t * a;
      case Kind::exponential: return std::exp(rate * t) * a;
      case Kind::custom: return samples.at(static_cast<size_t>(sample_index));
    }
    throw invariant_error("VProfile: unknown kind");
  }

  bool has_exact_derivative() const { return exact_derivative && kind != Kind::custom; }

  Eigen::VectorXd derivative(double t, int nvert) const {
    switch (kind) {
      case Kind::zero: return Eigen::VectorXd::Zero(3 * nvert);
      case Kind::linear: return a;
      case Kind::exponential: return rate * std::exp(rate * t) * a;
      case Kind::custom: break;
    }
    throw invariant_error("VProfile: no closed-form derivative for sampled profiles");
  }
};

// ---------------------------------------------------------------------------
// Dreibein curves.

struct Dreibein {
  std::vector<double> tgrid;
  Eigen::VectorXd eta;               // class representative, 3E
  std::vector<Eigen::VectorXd> v;    // vertex sections, 3V each
  std::vector<Eigen::VectorXd> u;    // dv/dt, 3V each
  std::vector<Eigen::VectorXd> xi;   // eta + d0 v, 3E each
  bool exact_u = false;

  int steps() const { return static_cast<int>(tgrid.size()); }
};

inline Dreibein assemble_dreibein(const TriangulatedSurface& m, const DiracOperator& D,
                                  const Eigen::VectorXd& eta, const VProfile& prof,
                                  const std::vector<double>& tgrid) {
  check_time_grid(tgrid);
  Eigen::VectorXd eta0 = eta;
  if (eta0.size() == 0) eta0 = Eigen::VectorXd::Zero(3 * m.E);
  if (eta0.size() != 3 * m.E)
    throw invariant_error("assemble_dreibein: eta has the wrong dimension");
  if (prof.kind == VProfile::Kind::custom && prof.samples.size() != tgrid.size())
    throw invariant_error("assemble_dreibein: custom profile sample count does not match the grid");

  Dreibein db;
  db.tgrid = tgrid;
  db.eta = eta0;
  const int n = static_cast<int>(tgrid.size());
  db.v.resize(n);
  db.xi.resize(n);
  for (int i = 0; i < n; ++i) {
    db.v[i] = prof.value(tgrid[i], m.V, i);
    if (db.v[i].size() != 3 * m.V)
      throw invariant_error("assemble_dreibein: profile section has the wrong dimension");
    db.xi[i] = eta0 + D.d0 * db.v[i];
  }
  if (prof.has_exact_derivative()) {
    db.exact_u = true;
    db.u.resize(n);
    for (int i = 0; i < n; ++i) db.u[i] = prof.derivative(tgrid[i], m.V);
  } else {
    db.u = time_derivative(db.v, tgrid);
  }
  return db;
}

// ---------------------------------------------------------------------------
// Cartan structure residuals.

struct CartanResiduals {
  std::vector<double> spatial;       // ||d1 xi_t||_{M2} per grid point
  std::vector<double> evolution;     // ||dxi/dt - d0 u_t||_{M1} per grid point
  double worst_spatial = 0;
  double worst_evolution = 0;
};

inline CartanResiduals cartan_residual(const DiracOperator& D, const Dreibein& db) {
  CartanResiduals r;
  const int n = db.steps();
  r.spatial.resize(n);
  r.evolution.resize(n);
  const std::vector<Eigen::VectorXd> dxi = time_derivative(db.xi, db.tgrid);
  for (int i = 0; i < n; ++i) {
    r.spatial[i] = mass_norm(D.M2, D.d1 * db.xi[i]);
    r.evolution[i] = mass_norm(D.M1, dxi[i] - D.d0 * db.u[i]);
    r.worst_spatial = std::max(r.worst_spatial, r.spatial[i]);
    r.worst_evolution = std::max(r.worst_evolution, r.evolution[i]);
  }
  return r;
}

// ---------------------------------------------------------------------------
// The pseudometric.

struct SpacetimeMetric {
  std::vector<double> tgrid;
  int F = 0;
  double eps_sing = 0;               // dreibein determinant threshold
  // sample index it * F + f; Gram ordering (t, leg1, leg2)
  std::vector<Mat3d> gram;
  std::vector<double> dreibein_det;
  std::vector<std::uint8_t> masked;
  int masked_count = 0;
  int lorentzian_count = 0;          // unmasked samples with signature (-,+,+)
  int other_signature_count = 0;

  int samples() const { return static_cast<int>(gram.size()); }
  int index(int it, int f) const { return it * F + f; }
  double masked_fraction() const {
    return samples() == 0 ? 0.0 : static_cast<double>(masked_count) / samples();
  }
  double singular_fraction_at(int it) const {
    int c = 0;
    for (int f = 0; f < F; ++f) c += masked[static_cast<size_t>(index(it, f))];
    return F == 0 ? 0.0 : static_cast<double>(c) / F;
  }
};

namespace detail {

// signature of a symmetric 3x3 Gram: -1 = Lorentzian (-,+,+), 0 = other
inline int gram_signature_lorentzian(const Mat3d& G) {
  Eigen::SelfAdjointEigenSolver<Mat3d> es(G, Eigen::EigenvaluesOnly);
  const Vec3d ev = es.eigenvalues();
  const double scale = std::max({std::abs(ev[0]), std::abs(ev[1]), std::abs(ev[2]), 1e-300});
  int neg = 0, pos = 0;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(ev[k]) <= 1e-10 * scale) continue;
    (ev[k] < 0 ? neg : pos)++;
  }
  return (neg == 1 && pos == 2) ? -1 : 0;
}

}  // namespace detail

inline SpacetimeMetric assemble_metric(const TriangulatedSurface& m, const ConformalCache& C,
                                       const Dreibein& db) {
  SpacetimeMetric g;
  g.tgrid = db.tgrid;
  g.F = m.F;
  const double le = m.mean_edge_length();
  g.eps_sing = 1e-8 * le * le * le;
  const int n = db.steps();
  g.gram.resize(static_cast<size_t>(n) * m.F);
  g.dreibein_det.resize(static_cast<size_t>(n) * m.F);
  g.masked.assign(static_cast<size_t>(n) * m.F, 0);

  for (int it = 0; it < n; ++it) {
    const Eigen::VectorXd& xi = db.xi[it];
    const Eigen::VectorXd& u = db.u[it];
    for (int f = 0; f < m.F; ++f) {
      const auto& fd = C.faces[f];
      const Vec3d w1 = fd.A1 * xi.segment<3>(3 * fd.e1);
      const Vec3d w2 = fd.P2 * xi.segment<3>(3 * fd.e2);
      const Vec3d ua = u.segment<3>(3 * fd.a0);
      // temporal values transported to the anchor, averaged over each leg's
      // own endpoints (leg 1 joins anchor->c1, leg 2 joins c1->c2)
      const Vec3d u1 = fd.back1 * u.segment<3>(3 * fd.c1);
      const Vec3d u2 = fd.back2 * u.segment<3>(3 * fd.c2);
      const Vec3d ubar1 = 0.5 * (ua + u1);
      const Vec3d ubar2 = 0.5 * (u1 + u2);
      Mat3d G;
      G(0, 0) = hdot(ua, ua);
      G(0, 1) = G(1, 0) = hdot(ubar1, w1);
      G(0, 2) = G(2, 0) = hdot(ubar2, w2);
      G(1, 1) = hdot(w1, w1);
      G(1, 2) = G(2, 1) = hdot(w1, w2);
      G(2, 2) = hdot(w2, w2);
      const int idx = g.index(it, f);
      g.gram[static_cast<size_t>(idx)] = G;
      Mat3d rb;
      rb.col(0) = w1;
      rb.col(1) = w2;
      rb.col(2) = ua;
      const double det = rb.determinant();
      g.dreibein_det[static_cast<size_t>(idx)] = det;
      if (std::abs(det) < g.eps_sing) {
        g.masked[static_cast<size_t>(idx)] = 1;
        ++g.masked_count;
      } else {
        (detail::gram_signature_lorentzian(G) == -1 ? g.lorentzian_count
                                                    : g.other_signature_count)++;
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Verification.

struct MetricVerification {
  // (a) shared-edge h-norm^2 of xi seen from both adjacent faces' chains
  double worst_compat = 0;
  // (b) ||Xi^{-1} Hol_f Xi - I|| against cond(Xi) * ||Hol_f - I|| + tol_flat
  double worst_flatness = 0;        // largest deviation over checked samples
  double worst_flatness_excess = 0; // deviation minus its per-face bound (<= 0 passes)
  double worst_cond = 0;            // over unmasked samples
  int cond_violations = 0;          // unmasked samples with cond(Xi) > cond_gate
  int flatness_checked = 0;
  // (c) structure residuals, recomputed
  double worst_spatial_residual = 0;
  double worst_evolution_residual = 0;
  double masked_fraction = 0;
  bool pass = false;
};

inline MetricVerification verify_metric(const TriangulatedSurface& m, const ConformalCache& C,
                                        const DiracOperator& D, const Dreibein& db,
                                        const SpacetimeMetric& g, double tol_compat = 1e-8,
                                        double tol_flat = 1e-8, double cond_gate = 1e3) {
  MetricVerification rep;
  const int n = db.steps();

  // (a) transport compatibility across shared edges
  std::vector<double> norm2(static_cast<size_t>(m.E));
  std::vector<std::int8_t> seen(static_cast<size_t>(m.E));
  for (int it = 0; it < n; ++it) {
    const Eigen::VectorXd& xi = db.xi[it];
    std::fill(seen.begin(), seen.end(), 0);
    for (int f = 0; f < m.F; ++f) {
      const auto& fd = C.faces[f];
      const int eids[3] = {fd.e1, fd.e2, fd.e3};
      const Mat3d maps[3] = {fd.A1, fd.P2, fd.P3};
      for (int k = 0; k < 3; ++k) {
        const Vec3d w = maps[k] * xi.segment<3>(3 * eids[k]);
        const double n2 = hdot(w, w);
        const auto e = static_cast<size_t>(eids[k]);
        if (!seen[e]) {
          seen[e] = 1;
          norm2[e] = n2;
        } else {
          rep.worst_compat = std::max(rep.worst_compat, std::abs(n2 - norm2[e]));
        }
      }
    }
  }

  // (b) holonomy conjugated into the xi-frame
  std::vector<Mat3d> hol(static_cast<size_t>(m.F));
  std::vector<double> curv(static_cast<size_t>(m.F));
  {
    const std::vector<Mat3d>& T = m.quot->T;
    for (int f = 0; f < m.F; ++f) {
      Mat3d H = Mat3d::Identity();
      for (const auto& [eid, sgn] : m.faces[f].trip)
        H = (sgn > 0 ? T[eid] : Mat3d(soinv(T[eid]))) * H;
      hol[static_cast<size_t>(f)] = H;
      curv[static_cast<size_t>(f)] = (H - Mat3d::Identity()).cwiseAbs().maxCoeff();
    }
  }
  for (int it = 0; it < n; ++it) {
    const Eigen::VectorXd& xi = db.xi[it];
    const Eigen::VectorXd& u = db.u[it];
    for (int f = 0; f < m.F; ++f) {
      if (g.masked[static_cast<size_t>(g.index(it, f))]) continue;
      const auto& fd = C.faces[f];
      Mat3d Xi;
      Xi.col(0) = fd.A1 * xi.segment<3>(3 * fd.e1);
      Xi.col(1) = fd.P2 * xi.segment<3>(3 * fd.e2);
      Xi.col(2) = u.segment<3>(3 * fd.a0);
      Eigen::JacobiSVD<Mat3d> svd(Xi);
      const double smin = svd.singularValues()[2];
      const double cond = smin > 0 ? svd.singularValues()[0] / smin
                                   : std::numeric_limits<double>::infinity();
      rep.worst_cond = std::max(rep.worst_cond, cond);
      if (!(cond <= cond_gate)) {
        ++rep.cond_violations;
        continue;
      }
      const Mat3d conj = Xi.inverse() * hol[static_cast<size_t>(f)] * Xi;
      const double dev = (conj - Mat3d::Identity()).cwiseAbs().maxCoeff();
      const double bound = cond * curv[static_cast<size_t>(f)] + tol_flat;
      rep.worst_flatness = std::max(rep.worst_flatness, dev);
      rep.worst_flatness_excess = std::max(rep.worst_flatness_excess, dev - bound);
      ++rep.flatness_checked;
    }
  }

  // (c) structure residuals
  const CartanResiduals cr = cartan_residual(D, db);
  rep.worst_spatial_residual = cr.worst_spatial;
  rep.worst_evolution_residual = cr.worst_evolution;
  rep.masked_fraction = g.masked_fraction();

  rep.pass = rep.worst_compat <= tol_compat && rep.worst_flatness_excess <= 0 &&
             rep.cond_violations == 0;
  return rep;
}

}  // namespace hitchlab
