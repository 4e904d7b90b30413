#pragma once
// Deterministic symmetric sparse eigensolver: shift-invert thick-restart
// Lanczos (Krylov-Schur) with full reorthogonalization.
//
// Built for PSD stiffness-type matrices whose numerical kernel has to be
// separated from a first nonzero eigenvalue sitting far below
// eps * ||S||. Such eigenvalues are only resolvable through the back-transform
// lambda = 1/theta - sigma of fully converged Ritz values theta of
// (S + sigma I)^{-1}: a Rayleigh quotient of the Ritz vector would flood the
// kernel values with roundoff at the 1e-15 * ||S|| level and wreck the
// spectral-gap diagnostic, while the back-transform resolves them to a
// relative-to-sigma accuracy near machine epsilon.
//
// Everything is seeded and ordered deterministically; repeated runs on the
// same matrix are bit-identical.

#include "core.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <random>

#include <cstdint>
#include <vector>

namespace hitchlab {

using SpMat = Eigen::SparseMatrix<double>;

struct SpectralOptions {
  double sigma = 1e-8;      // shift; S + sigma I must be positive definite
  double tol = 1e-13;       // relative residual target on inverted Ritz pairs
  int window = 0;           // Krylov window size (0 = automatic)
  int max_applies = 40000;  // hard cap on operator applications
  std::uint64_t seed = 0x5eed5eedULL;
};

struct EigPairs {
  Eigen::VectorXd values;     // ascending eigenvalues of S
  Eigen::MatrixXd vectors;    // unit 2-norm columns, matching order
  Eigen::VectorXd residuals;  // ||S x - lambda x||_2 per pair
  int applies = 0;            // operator applications consumed
};

namespace detail {

// deterministic standard normals: mt19937_64 + explicit Box-Muller (the
// distribution adapters in <random> are not pinned across library versions)
inline Eigen::VectorXd gaussian_vector(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto u01 = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53 + 0x1.0p-54; };
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; i += 2) {
    const double r = std::sqrt(-2.0 * std::log(u01()));
    const double t = 2 * pi * u01();
    v[i] = r * std::cos(t);
    if (i + 1 < n) v[i + 1] = r * std::sin(t);
  }
  return v;
}

inline void orthogonalize_twice(const Eigen::MatrixXd& V, int ncols, Eigen::VectorXd& w,
                                Eigen::VectorXd* coeffs) {
  if (coeffs) coeffs->setZero(ncols);
  for (int pass = 0; pass < 2; ++pass) {
    const Eigen::VectorXd h = V.leftCols(ncols).transpose() * w;
    w.noalias() -= V.leftCols(ncols) * h;
    if (coeffs) *coeffs += h;
  }
}

}  // namespace detail

// Smallest k eigenpairs of the sparse symmetric S via shift-invert.
inline EigPairs smallest_eigs(const SpMat& S, int k, const SpectralOptions& opt = {}) {
  const int n = static_cast<int>(S.rows());
  if (S.cols() != n || k < 1 || k > n)
    throw invariant_error("smallest_eigs: need square S and 1 <= k <= n");

  SpMat A;
  {
    SpMat I(n, n);
    I.setIdentity();
    A = S + opt.sigma * I;
  }
  Eigen::SimplicialLDLT<SpMat> chol(A);
  if (chol.info() != Eigen::Success)
    throw invariant_error("smallest_eigs: factorization of the shifted matrix failed");

  const int l = std::min(n, k + 8);                                 // retained Ritz pairs
  const int m = std::min(n, opt.window > 0 ? opt.window : l + 40);  // Krylov window

  // state invariant: OP * V_p = V_p * H_p + u * s_p^T with u unit, u ⊥ V_p
  Eigen::MatrixXd V(n, m);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd u = detail::gaussian_vector(n, opt.seed);
  u /= u.norm();
  int p = 0;
  int applies = 0;
  std::uint64_t reseed = opt.seed;

  Eigen::VectorXd theta;
  Eigen::MatrixXd Z;
  bool converged = false;
  while (!converged) {
    while (p < m) {
      V.col(p) = u;
      for (int i = 0; i < p; ++i) H(i, p) = H(p, i) = s[i];
      Eigen::VectorXd w = chol.solve(V.col(p));
      ++applies;
      Eigen::VectorXd h;
      detail::orthogonalize_twice(V, p + 1, w, &h);
      H(p, p) = h[p];
      const double beta = w.norm();
      s.setZero();
      const double hscale = H.topLeftCorner(p + 1, p + 1).cwiseAbs().maxCoeff();
      if (!(beta > 1e-300) || beta <= 1e-15 * hscale) {
        // invariant subspace: continue from a fresh deterministic direction
        u = detail::gaussian_vector(n, ++reseed);
        detail::orthogonalize_twice(V, p + 1, u, nullptr);
        const double nu = u.norm();
        if (!(nu > 1e-300)) throw invariant_error("smallest_eigs: basis exhausted");
        u /= nu;
      } else {
        u = w / beta;
        s[p] = beta;
      }
      ++p;
      if (applies > opt.max_applies)
        throw tolerance_error("smallest_eigs: operator application budget exhausted");
    }

    // Rayleigh-Ritz on the window
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H.topLeftCorner(p, p));
    if (es.info() != Eigen::Success) throw invariant_error("smallest_eigs: dense solve failed");
    theta = es.eigenvalues();  // ascending; largest theta = smallest lambda
    Z = es.eigenvectors();
    const Eigen::VectorXd coup = Z.transpose() * s.head(p);  // |coup_i| = OP-pair residual
    converged = true;
    for (int i = 0; i < k; ++i) {
      const double th = theta[p - 1 - i];
      if (std::abs(coup[p - 1 - i]) > opt.tol * std::max(std::abs(th), 1e-300)) {
        converged = false;
        break;
      }
    }
    if (converged) break;

    // thick restart: keep the l largest Ritz pairs
    const int keep = std::min(l, p - 1);
    const Eigen::MatrixXd Zl = Z.rightCols(keep);
    const Eigen::MatrixXd Y = V.leftCols(p) * Zl;
    V.leftCols(keep) = Y;
    H.setZero();
    H.topLeftCorner(keep, keep).diagonal() = theta.tail(keep);
    const Eigen::VectorXd snew = Zl.transpose() * s.head(p);
    s.setZero();
    s.head(keep) = snew;
    p = keep;
  }

  // assemble the k smallest eigenpairs of S (largest theta of the inverse)
  EigPairs out;
  out.applies = applies;
  out.values.resize(k);
  out.vectors.resize(n, k);
  out.residuals.resize(k);
  for (int i = 0; i < k; ++i) {
    const int c = p - 1 - i;  // descending theta = ascending lambda
    const double th = theta[c];
    out.values[i] = 1.0 / th - opt.sigma;
    Eigen::VectorXd x = V.leftCols(p) * Z.col(c);
    x /= x.norm();
    out.vectors.col(i) = x;
    out.residuals[i] = (S * x - out.values[i] * x).norm();
  }
  return out;
}

// Dense cross-check oracle (for test meshes); same output conventions.
inline EigPairs dense_smallest_eigs(const SpMat& S, int k) {
  const int n = static_cast<int>(S.rows());
  if (k < 1 || k > n) throw invariant_error("dense_smallest_eigs: bad k");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es((Eigen::MatrixXd(S)));
  if (es.info() != Eigen::Success) throw invariant_error("dense_smallest_eigs: solve failed");
  EigPairs out;
  out.values = es.eigenvalues().head(k);
  out.vectors = es.eigenvectors().leftCols(k);
  out.residuals.resize(k);
  for (int i = 0; i < k; ++i)
    out.residuals[i] = (S * out.vectors.col(i) - out.values[i] * out.vectors.col(i)).norm();
  return out;
}

}  // namespace hitchlab
