#pragma once
// Induced conformal classes of bundle-valued 1-cochains and their comparison.
//
// The class of a cochain eta is realized per face as the pullback Gram
// gamma_eta = h(eta x eta) evaluated on the two frame legs at the face
// anchor, normalized to unit determinant. The reference class of the mesh
// itself comes from the law-of-cosines Gram of the hyperbolic edge lengths.
//
// Distances: unit-determinant SPD 2x2 matrices form a hyperbolic plane; the
// per-face distance used here is acosh(tr(G2^{-1} G1)/2), i.e. half the
// dilatation log K of the relating map, aggregated as an area-weighted mean.
// Faces where gamma_eta fails positivity contribute a fixed penalty of 10 in
// the cochain-facing variant (the optimizer's objective must stay finite and
// keep pushing toward the regular set).

#include "mesh.hpp"

namespace hitchlab {

// tautological chord cochain of the inclusion: eta(e) = T_e^{-1} e3 - e3
inline Eigen::VectorXd taut_chord(const TriangulatedSurface& m, const std::vector<Mat3d>& T) {
  Eigen::VectorXd om(3 * m.E);
  const Vec3d z = e3<double>();
  for (int e = 0; e < m.E; ++e) om.segment<3>(3 * e) = soinv(T[e]) * z - z;
  return om;
}

// Per-face frame data: leg edge ids, value maps to the anchor corner, chain
// transports back to the anchor, and the reference length Gram.
struct ConformalCache {
  struct FaceData {
    int e1 = -1, e2 = -1, e3 = -1;  // leg edge ids in traversal order
    Mat3d A1, P2, P3;               // cochain value -> leg value at the anchor
    Mat3d back1, back2;             // corner1 / corner2 chart -> anchor chart
    int a0 = -1, c1 = -1, c2 = -1;  // vertex classes of the corners
    Mat2d gref;                     // unit-determinant reference Gram
    Mat2d gref_inv;
    double area = 0;
  };
  std::vector<FaceData> faces;
  double total_area = 0;
  double mean_face_area = 0;
  int V = 0, E = 0, F = 0;
};

inline ConformalCache conformal_cache(const TriangulatedSurface& m,
                                      const std::vector<Mat3d>& T) {
  ConformalCache C;
  C.V = m.V;
  C.E = m.E;
  C.F = m.F;
  C.faces.resize(m.F);
  for (int fid = 0; fid < m.F; ++fid) {
    const auto& f = m.faces[fid];
    auto& fd = C.faces[fid];
    const auto [e1, s1] = f.trip[0];
    const auto [e2, s2] = f.trip[1];
    const auto [e3_, s3] = f.trip[2];
    fd.e1 = e1;
    fd.e2 = e2;
    fd.e3 = e3_;
    fd.A1 = s1 > 0 ? Mat3d(Mat3d::Identity()) : Mat3d(-T[e1]);
    const Mat3d t1 = s1 > 0 ? T[e1] : Mat3d(soinv(T[e1]));
    const Mat3d t2 = s2 > 0 ? T[e2] : Mat3d(soinv(T[e2]));
    const Mat3d a2 = s2 > 0 ? Mat3d(Mat3d::Identity()) : Mat3d(-T[e2]);
    const Mat3d a3 = s3 > 0 ? Mat3d(Mat3d::Identity()) : Mat3d(-T[e3_]);
    fd.back1 = soinv(t1);
    fd.back2 = fd.back1 * soinv(t2);
    fd.P2 = fd.back1 * a2;
    fd.P3 = fd.back2 * a3;
    fd.a0 = f.vclass[0];
    fd.c1 = f.vclass[1];
    fd.c2 = f.vclass[2];
    const double l1 = m.edge_length[e1], l2 = m.edge_length[e2], l3 = m.edge_length[e3_];
    const double g12 = (l3 * l3 - l1 * l1 - l2 * l2) / 2.0;
    Mat2d G;
    G << l1 * l1, g12, g12, l2 * l2;
    const double det = G.determinant();
    if (!(det > 0)) throw invariant_error("conformal_cache: degenerate reference Gram");
    fd.gref = G / std::sqrt(det);
    fd.gref_inv = fd.gref.inverse();
    fd.area = m.face_area[fid];
    C.total_area += fd.area;
  }
  C.mean_face_area = C.total_area / static_cast<double>(m.F);
  return C;
}

// h-Gram of the two leg values of a cochain at the face anchor
inline Mat2d face_gram(const ConformalCache::FaceData& fd, const Eigen::VectorXd& om) {
  const Vec3d v1 = fd.A1 * om.segment<3>(3 * fd.e1);
  const Vec3d v2 = fd.P2 * om.segment<3>(3 * fd.e2);
  Mat2d G;
  G(0, 0) = hdot(v1, v1);
  G(1, 1) = hdot(v2, v2);
  G(0, 1) = G(1, 0) = hdot(v1, v2);
  return G;
}

// ---------------------------------------------------------------------------
// Regularity.

struct RegularityReport {
  double min_eigenvalue = 0;  // global minimum over faces, raw Gram
  double eps_reg = 0;         // 1e-6 * mean face area
  bool regular = false;
  int failing_faces = 0;  // faces with min eigenvalue <= eps_reg
};

inline RegularityReport regularity(const ConformalCache& C, const Eigen::VectorXd& om) {
  RegularityReport rep;
  rep.eps_reg = 1e-6 * C.mean_face_area;
  rep.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (const auto& fd : C.faces) {
    const Mat2d G = face_gram(fd, om);
    const double mid = 0.5 * (G(0, 0) + G(1, 1));
    const double rad = std::sqrt(std::max(mid * mid - G.determinant(), 0.0));
    const double lmin = mid - rad;
    rep.min_eigenvalue = std::min(rep.min_eigenvalue, lmin);
    if (!(lmin > rep.eps_reg)) ++rep.failing_faces;
  }
  rep.regular = rep.min_eigenvalue > rep.eps_reg;
  return rep;
}

// ---------------------------------------------------------------------------
// Induced class and distances.

struct InducedConformalClass {
  std::vector<Mat2d> gram;  // unit determinant, positive definite
  std::vector<double> area;
  double total_area = 0;
};

inline InducedConformalClass induced_class(const ConformalCache& C, const Eigen::VectorXd& om) {
  const RegularityReport rep = regularity(C, om);
  if (!rep.regular)
    throw invariant_error("induced_class: cochain is not regular (Gram fails positivity margin)");
  InducedConformalClass cls;
  cls.gram.reserve(C.faces.size());
  cls.area.reserve(C.faces.size());
  cls.total_area = C.total_area;
  for (const auto& fd : C.faces) {
    const Mat2d G = face_gram(fd, om);
    cls.gram.push_back(G / std::sqrt(G.determinant()));
    cls.area.push_back(fd.area);
  }
  return cls;
}

// the mesh's own class: unit-determinant length Grams
inline InducedConformalClass reference_class(const ConformalCache& C) {
  InducedConformalClass cls;
  cls.total_area = C.total_area;
  for (const auto& fd : C.faces) {
    cls.gram.push_back(fd.gref);
    cls.area.push_back(fd.area);
  }
  return cls;
}

// per-face hyperbolic distance between unit-det SPD forms: acosh(tr(G2^{-1}G1)/2)
inline double class_distance(const InducedConformalClass& c1, const InducedConformalClass& c2) {
  if (c1.gram.size() != c2.gram.size())
    throw invariant_error("class_distance: classes live on different meshes");
  double acc = 0;
  for (size_t f = 0; f < c1.gram.size(); ++f) {
    const double t = std::max((c2.gram[f].inverse() * c1.gram[f]).trace(), 2.0);
    acc += c1.area[f] * std::acosh(t / 2.0);
  }
  return acc / c1.total_area;
}

// Cochain-facing distance to the mesh reference class with a fixed penalty on
// non-positive faces; this is the roundtrip optimizer's objective.
struct CochainClassDistance {
  double dist = 0;
  int bad_faces = 0;
};

inline CochainClassDistance cochain_class_distance(const ConformalCache& C,
                                                   const Eigen::VectorXd& om) {
  CochainClassDistance out;
  double acc = 0;
  for (const auto& fd : C.faces) {
    const Mat2d G = face_gram(fd, om);
    const double det = G.determinant();
    double d;
    if (det <= 1e-300 || G(0, 0) <= 0) {
      d = 10.0;
      ++out.bad_faces;
    } else {
      const double t =
          std::max((fd.gref_inv(0, 0) * G(0, 0) + 2.0 * fd.gref_inv(0, 1) * G(0, 1) +
                    fd.gref_inv(1, 1) * G(1, 1)) /
                       std::sqrt(det),
                   2.0);
      d = std::acosh(t / 2.0);
    }
    acc += fd.area * d;
  }
  out.dist = acc / C.total_area;
  return out;
}

}  // namespace hitchlab
