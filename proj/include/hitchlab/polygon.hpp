#pragma once
// Regular hyperbolic 4g-gon and its side-pairing isometries, in extended
// precision (80-bit long double throughout the construction path).
//
// The polygon with all corner angles 2pi/4g has circumradius R with
// cosh R = 1/tan^2(alpha/2), alpha = 2pi/4g; corners sit at angles k*alpha.
// Side k spans corners k,k+1; its geodesic has foot distance d0 from the
// origin, tanh d0 = tanh R cos(alpha/2), in direction (k+1/2)*alpha.
//
// Side pairings (a_j maps side 4j+2 -> 4j, b_j maps side 4j+3 -> 4j+1,
// endpoint-reversing) are exact products of two reflections — one in the
// target side's geodesic, one in a diameter — so the group relations close
// to the last bit the format holds. With the relabeling B_j := b_j^{-1}
// the standard-form relator prod_j [A_j, B_j] = 1 holds verbatim.

#include "core.hpp"

#include <vector>

namespace hitchlab {

// reflection across the diameter geodesic at angle psi
template <class S> Mat3<S> reflect_diameter(S psi) {
  const S c = std::cos(2 * psi), s = std::sin(2 * psi);
  Mat3<S> R = Mat3<S>::Identity();
  R(0, 0) = c;
  R(0, 1) = s;
  R(1, 0) = s;
  R(1, 1) = -c;
  return R;
}

// reflection in the geodesic with unit spacelike normal n (h(n,n)=1)
template <class S> Mat3<S> reflect_geodesic(const Vec3<S>& n) {
  const Mat3<S> h = hmat<S>();
  return Mat3<S>::Identity() - 2 * (n * (h * n).transpose());
}

struct FundamentalPolygon {
  int genus = 0;
  LD R = 0, alpha = 0;                  // circumradius, corner step angle
  std::vector<Vec3<LD>> corners;        // 4g corners, corner k at angle k*alpha
  std::vector<Vec3<LD>> normals;        // unit normals of the side geodesics
  std::vector<Mat3<LD>> A, B;           // raw pairings a_j, b_j (g each)

  // published generator list A_1,B_1,...,A_g,B_g with B_j := b_j^{-1},
  // the labeling in which prod [A_j,B_j] = 1
  std::vector<Mat3<LD>> standard_generators() const {
    std::vector<Mat3<LD>> gens;
    gens.reserve(2 * A.size());
    for (size_t j = 0; j < A.size(); ++j) {
      gens.push_back(A[j]);
      gens.push_back(soinv(B[j]));
    }
    return gens;
  }
};

inline FundamentalPolygon make_polygon(int g) {
  if (g < 2) throw invariant_error("make_polygon: genus must be >= 2");
  FundamentalPolygon P;
  P.genus = g;
  const int n = 4 * g;
  const LD alpha = 2 * std::numbers::pi_v<LD> / LD(n);
  const LD coshR = 1 / (std::tan(alpha / 2) * std::tan(alpha / 2));
  const LD R = std::acosh(coshR);
  P.alpha = alpha;
  P.R = R;
  for (int k = 0; k < n; ++k) {
    const LD th = alpha * LD(k);
    P.corners.emplace_back(std::sinh(R) * std::cos(th), std::sinh(R) * std::sin(th), std::cosh(R));
  }
  const LD d0 = std::atanh(std::tanh(R) * std::cos(alpha / 2));
  for (int k = 0; k < n; ++k) {
    const LD th = alpha * (LD(k) + LD(0.5));
    P.normals.emplace_back(std::cos(th) * std::cosh(d0), std::sin(th) * std::cosh(d0), std::sinh(d0));
  }
  for (int j = 0; j < g; ++j) {
    // a_j = Ref(side 4j geodesic) o Ref(diameter at (4j+1.5)alpha),
    // b_j = Ref(side 4j+1 geodesic) o Ref(diameter at (4j+2.5)alpha)
    const LD psi_a = alpha * (LD(4 * j) + LD(1.5));
    const LD psi_b = alpha * (LD(4 * j) + LD(2.5));
    P.A.push_back(reflect_geodesic(P.normals[4 * j]) * reflect_diameter(psi_a));
    P.B.push_back(reflect_geodesic(P.normals[(4 * j + 1) % n]) * reflect_diameter(psi_b));
  }
  return P;
}

// max-norm residual of prod_j [A_j, B_j] - I over the standard generators
template <class S>
S relator_residual(const std::vector<Mat3<S>>& gens) {
  const int g = static_cast<int>(gens.size()) / 2;
  Mat3<S> M = Mat3<S>::Identity();
  for (int j = 0; j < g; ++j) {
    const Mat3<S>& Aj = gens[2 * j];
    const Mat3<S>& Bj = gens[2 * j + 1];
    M = M * Aj * Bj * soinv(Aj) * soinv(Bj);
  }
  return (M - Mat3<S>::Identity()).template lpNorm<Eigen::Infinity>();
}

}  // namespace hitchlab
