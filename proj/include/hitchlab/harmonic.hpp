#pragma once
// Equivariant harmonic maps into H^2 by Riemannian gradient descent.
//
// The map lives on quotient vertices; equivariance is carried by the edge
// transports, so the discrete Dirichlet energy is
//   E(f) = 1/2 sum_e w_e d(f(src), T_e^{-1} f(dst))^2 .
// Descent steps move each vertex along the geodesic exp_x(-tau r) with the
// mass-preconditioned gradient r = g / vw. The line search runs in two
// regimes. While the Armijo model decrement 0.3 tau |r|^2 is resolvable in
// the energy it uses the usual sufficient-decrease test (with an ulp slack
// on E). Once the decrement sinks below f64 roundoff on E the energy can
// only veto on evaluation noise -- that regime used to pin tau at ~1e-14
// and freeze the iteration -- so acceptance switches to a non-increase test
// on the gradient norm, which stays resolvable several orders below the
// stopping tolerance.

#include "mesh.hpp"

#include <cstdint>
#include <random>

namespace hitchlab {

struct EquivariantMap {
  std::vector<Vec3d> f;  // hyperboloid points, one per vertex class
  double energy = 0;
  double grad_norm = 0;
  int iterations = 0;
  bool converged = false;
  double monotonicity_defect = 0;  // max accepted-step energy increase
};

// polygon chart inclusion: every vertex sits at its chart base point
inline std::vector<Vec3d> inclusion_map(const TriangulatedSurface& m) {
  return std::vector<Vec3d>(static_cast<size_t>(m.V), e3<double>());
}

class HarmonicProblem {
 public:
  HarmonicProblem(const TriangulatedSurface& m, const std::vector<Mat3d>& T)
      : V_(m.V), src_(m.esrc), dst_(m.edst), T_(T), vw_(m.vertex_weight) {
    Ti_.resize(T_.size());
    for (size_t e = 0; e < T_.size(); ++e) Ti_[e] = soinv(T_[e]);
    w_ = m.hodge_edge_weights();
  }

  double energy(const std::vector<Vec3d>& f) const {
    double E = 0;
    for (size_t e = 0; e < T_.size(); ++e) {
      const double d = hdist<double>(f[static_cast<size_t>(src_[e])],
                                     Ti_[e] * f[static_cast<size_t>(dst_[e])]);
      E += 0.5 * w_[e] * d * d;
    }
    return E;
  }

  // dE/df as tangent vectors at f (mass-unweighted)
  std::vector<Vec3d> euclid_grad(const std::vector<Vec3d>& f) const {
    std::vector<Vec3d> g(static_cast<size_t>(V_), Vec3d::Zero());
    for (size_t e = 0; e < T_.size(); ++e) {
      const auto i = static_cast<size_t>(src_[e]);
      const auto j = static_cast<size_t>(dst_[e]);
      g[i] -= w_[e] * hlog<double>(f[i], Ti_[e] * f[j]);
      g[j] -= w_[e] * hlog<double>(f[j], T_[e] * f[i]);
    }
    return g;
  }

  double grad_norm(const std::vector<Vec3d>& f) const {
    const std::vector<Vec3d> g = euclid_grad(f);
    double s = 0;
    for (int v = 0; v < V_; ++v) {
      const Vec3d r = g[static_cast<size_t>(v)] / vw_[static_cast<size_t>(v)];
      s += vw_[static_cast<size_t>(v)] * std::max(hdot(r, r), 0.0);
    }
    return std::sqrt(s);
  }

  EquivariantMap descend(std::vector<Vec3d> f, double tol = 1e-8, int maxit = 100000) const {
    EquivariantMap out;
    double E = energy(f);
    double tau = 1.0;
    std::vector<Vec3d> r(static_cast<size_t>(V_));
    std::vector<Vec3d> f2(static_cast<size_t>(V_));
    for (int it = 0; it < maxit; ++it) {
      const std::vector<Vec3d> g = euclid_grad(f);
      double dd = 0;
      for (int v = 0; v < V_; ++v) {
        r[static_cast<size_t>(v)] = g[static_cast<size_t>(v)] / vw_[static_cast<size_t>(v)];
        dd += vw_[static_cast<size_t>(v)] *
              std::max(hdot(r[static_cast<size_t>(v)], r[static_cast<size_t>(v)]), 0.0);
      }
      const double gn = std::sqrt(dd);
      if (gn <= tol) {
        out.f = std::move(f);
        out.energy = E;
        out.grad_norm = gn;
        out.iterations = it;
        out.converged = true;
        return out;
      }
      const double slack = 8 * std::numeric_limits<double>::epsilon() * std::abs(E);
      double E2 = E;
      while (true) {
        for (int v = 0; v < V_; ++v)
          f2[static_cast<size_t>(v)] =
              hexp<double>(f[static_cast<size_t>(v)], -tau * r[static_cast<size_t>(v)]);
        if (0.3 * tau * dd > slack) {
          E2 = energy(f2);
          if (E2 <= E - 0.3 * tau * dd + slack) break;
        } else {
          const double gn2 = grad_norm(f2);
          if (gn2 * gn2 <= dd * (1 + 1e-6) || tau < 1e-14) {
            E2 = energy(f2);
            break;
          }
        }
        tau *= 0.5;
      }
      out.monotonicity_defect = std::max(out.monotonicity_defect, E2 - E);
      f.swap(f2);
      E = E2;
      tau = std::min(tau * 1.3, 8.0);
      if ((it & 127) == 0 && escaping(f))
        throw invariant_error(
            "harmonic_map: iterates escaping to the boundary (reducible representation?)");
    }
    out.energy = E;
    out.grad_norm = grad_norm(f);
    out.f = std::move(f);
    out.iterations = maxit;
    out.converged = out.grad_norm <= tol;
    return out;
  }

  // analytic directional derivative vs central differences along k random
  // tangent directions; returns the worst relative disagreement
  double fd_check(const std::vector<Vec3d>& f, std::uint64_t seed = 17, int k = 6,
                  double h = 1e-6) const {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double worst = 0;
    for (int trial = 0; trial < k; ++trial) {
      std::vector<Vec3d> v(static_cast<size_t>(V_));
      double n2 = 0;
      for (int i = 0; i < V_; ++i) {
        Vec3d w(gauss(rng), gauss(rng), gauss(rng));
        w += hdot(w, f[static_cast<size_t>(i)]) * f[static_cast<size_t>(i)];
        v[static_cast<size_t>(i)] = w;
        n2 += hdot(w, w);
      }
      const double nn = std::sqrt(n2);
      std::vector<Vec3d> fp(static_cast<size_t>(V_)), fm(static_cast<size_t>(V_));
      double ana = 0;
      const std::vector<Vec3d> g = euclid_grad(f);
      for (int i = 0; i < V_; ++i) {
        v[static_cast<size_t>(i)] /= nn;
        ana += hdot(g[static_cast<size_t>(i)], v[static_cast<size_t>(i)]);
        fp[static_cast<size_t>(i)] =
            hexp<double>(f[static_cast<size_t>(i)], h * v[static_cast<size_t>(i)]);
        fm[static_cast<size_t>(i)] =
            hexp<double>(f[static_cast<size_t>(i)], -h * v[static_cast<size_t>(i)]);
      }
      const double num = (energy(fp) - energy(fm)) / (2 * h);
      worst = std::max(worst, std::abs(ana - num) / std::max(std::abs(num), 1e-30));
    }
    return worst;
  }

  // hyperboloid constraint drift: max |h(f,f) + 1|
  double constraint_defect(const std::vector<Vec3d>& f) const {
    double worst = 0;
    for (const auto& x : f) worst = std::max(worst, std::abs(hdot(x, x) + 1.0));
    return worst;
  }

 private:
  bool escaping(const std::vector<Vec3d>& f) const {
    const Vec3d o = e3<double>();
    for (const auto& x : f)
      if (hdist<double>(x, o) > 50.0) return true;
    return false;
  }

  int V_;
  std::vector<int> src_, dst_;
  std::vector<Mat3d> T_;
  std::vector<Mat3d> Ti_;
  std::vector<double> w_;
  std::vector<double> vw_;
};

inline EquivariantMap harmonic_map(const TriangulatedSurface& m, const std::vector<Mat3d>& T,
                                   double tol = 1e-8, int maxit = 100000) {
  HarmonicProblem hp(m, T);
  return hp.descend(inclusion_map(m), tol, maxit);
}

}  // namespace hitchlab
