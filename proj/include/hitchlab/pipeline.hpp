#pragma once
// End-to-end duality round trip.
//
// One direction manufactures geometry out of the flat connection: Fuchsian
// rep, twisted cohomology kernel, the tautological regular chord whose
// conformal class must land back on the input hyperbolic class, and the
// linear-cone dreibein whose metric is -dt^2 + t^2 gamma. The other
// direction recovers the connection: equivariant harmonic map, Hitchin pair
// split, recomposed flat transports, and a character comparison on ten fixed
// words through weld loops, which is gauge invariant by construction.
//
// Every gate names its tolerance; failures are collected as strings rather
// than thrown, so a caller can report all of them and exit accordingly.

#include "extract.hpp"
#include "loops.hpp"
#include "spacetime.hpp"

namespace hitchlab {

// ---------------------------------------------------------------------------
// Cone-metric comparison.

struct ConeDefect {
  double worst_tt = 0;       // |g_tt + 1|
  double worst_cross = 0;    // |g_tk|
  double worst_spatial = 0;  // |g_kl - t^2 gamma_kl|
  int compared = 0;
  double worst() const { return std::max({worst_tt, worst_cross, worst_spatial}); }
};

// measure an assembled metric against -dt^2 + t^2 gamma, gamma being the
// h-Gram of the given spatial chords (for the tautological chord this is the
// reference hyperbolic metric of each face)
inline ConeDefect cone_metric_defect(const TriangulatedSurface& m, const ConformalCache& C,
                                     const Eigen::VectorXd& chord, const SpacetimeMetric& g) {
  ConeDefect d;
  const int n = static_cast<int>(g.tgrid.size());
  for (int f = 0; f < m.F; ++f) {
    const auto& fd = C.faces[f];
    const Vec3d w1 = fd.A1 * chord.segment<3>(3 * fd.e1);
    const Vec3d w2 = fd.P2 * chord.segment<3>(3 * fd.e2);
    Mat2d gam;
    gam(0, 0) = hdot(w1, w1);
    gam(0, 1) = gam(1, 0) = hdot(w1, w2);
    gam(1, 1) = hdot(w2, w2);
    for (int it = 0; it < n; ++it) {
      const int idx = g.index(it, f);
      if (g.masked[static_cast<size_t>(idx)]) continue;
      const Mat3d& G = g.gram[static_cast<size_t>(idx)];
      const double t2 = g.tgrid[static_cast<size_t>(it)] * g.tgrid[static_cast<size_t>(it)];
      d.worst_tt = std::max(d.worst_tt, std::abs(G(0, 0) + 1.0));
      d.worst_cross = std::max({d.worst_cross, std::abs(G(0, 1)), std::abs(G(0, 2))});
      d.worst_spatial = std::max({d.worst_spatial, std::abs(G(1, 1) - t2 * gam(0, 0)),
                                  std::abs(G(1, 2) - t2 * gam(0, 1)),
                                  std::abs(G(2, 2) - t2 * gam(1, 1))});
      ++d.compared;
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Character comparison through weld loops.

struct CharacterComparison {
  std::vector<GeneratorMatch> matches;
  double match_worst = 0;  // raw-generator recovery error, input side
  std::vector<double> chi_in, chi_out;
  double mismatch = 0;
};

inline CharacterComparison compare_characters(const TriangulatedSurface& m,
                                              const std::vector<Mat3d>& t_in,
                                              const std::vector<Mat3d>& t_out) {
  std::vector<Mat3d> raw;
  raw.reserve(static_cast<size_t>(2 * m.genus));
  for (const auto& a : m.pre->poly.A) raw.push_back(to_f64(a));
  for (const auto& b : m.pre->poly.B) raw.push_back(to_f64(b));
  CharacterComparison cc;
  cc.matches = match_generators(raw, loop_holonomies(m, t_in));
  for (const auto& gm : cc.matches) cc.match_worst = std::max(cc.match_worst, gm.distance);
  const std::vector<Mat3d> gin = generators_from_loops(m, t_in, cc.matches);
  const std::vector<Mat3d> gout = generators_from_loops(m, t_out, cc.matches);
  cc.chi_in = character_battery(gin, m.genus);
  cc.chi_out = character_battery(gout, m.genus);
  cc.mismatch = character_mismatch(cc.chi_in, cc.chi_out);
  return cc;
}

// ---------------------------------------------------------------------------
// The round trip.

struct RoundtripConfig {
  int genus = 2;
  int refinement = 2;
  double t0 = 1.0, t1 = 2.0;
  int time_steps = 9;
  // tolerances in force; each failure message names the one it tripped
  double tol_class = 1e-2;
  double tol_char = 1e-2;
  double tol_compat = 1e-6;
  double tol_flat = 1e-6;
  double cond_gate = 1e3;
  double tol_cone = 1e-6;
  double tol_harmonic = 1e-8;
  int harmonic_maxit = 200000;
};

struct RoundtripResult {
  RoundtripConfig cfg;
  TriangulatedSurface m;
  SurfaceRep rep;
  double face_curv = 0;
  KernelBasis kernel;
  Eigen::VectorXd eta_taut;
  double class_distance_in = 0;
  Dreibein db;
  SpacetimeMetric metric;
  MetricVerification mv;
  ConeDefect cone;
  EquivariantMap em;
  HitchinPair pair;
  std::vector<Mat3d> reconstructed;
  double recon_face_curv = 0;
  CharacterComparison chars;
  std::vector<std::string> failures;
  bool pass() const { return failures.empty(); }
};

inline RoundtripResult run_roundtrip(const RoundtripConfig& cfg) {
  RoundtripResult r;
  r.cfg = cfg;
  auto fail = [&r](const std::string& msg) { r.failures.push_back(msg); };

  // connection side
  r.m = build_surface(cfg.genus, cfg.refinement);
  r.rep = fuchsian_rep(r.m);
  r.face_curv = face_curvature(r.m, r.rep.transports);
  if (r.face_curv > 1e-10)
    fail("face curvature " + std::to_string(r.face_curv) + " > 1e-10");
  if (r.rep.euler_class != 2 * cfg.genus - 2)
    fail("euler class " + std::to_string(r.rep.euler_class) + " != 2g-2");

  const DiracOperator D = assemble_dirac(r.m, r.rep.transports);
  r.kernel = kernel_basis(D, 6 * cfg.genus - 6);
  if (r.kernel.dim != 6 * cfg.genus - 6)
    fail("kernel dimension " + std::to_string(r.kernel.dim) + " != 6g-6");

  // conformal class of the tautological regular chord vs the input class
  const ConformalCache C = conformal_cache(r.m, r.rep.transports);
  r.eta_taut = taut_chord(r.m, r.rep.transports);
  r.class_distance_in = class_distance(induced_class(C, r.eta_taut), reference_class(C));
  if (!(r.class_distance_in <= cfg.tol_class))
    fail("class distance " + std::to_string(r.class_distance_in) + " > tol_class " +
         std::to_string(cfg.tol_class));

  // linear-cone dreibein: xi_t = t * d0(unit timelike section) = t * taut
  const std::vector<double> tg = uniform_grid(cfg.t0, cfg.t1, cfg.time_steps);
  r.db = assemble_dreibein(r.m, D, Eigen::VectorXd::Zero(3 * r.m.E),
                           VProfile::linear_cone(r.m, /*exact=*/true), tg);
  r.metric = assemble_metric(r.m, C, r.db);
  r.mv = verify_metric(r.m, C, D, r.db, r.metric, cfg.tol_compat, cfg.tol_flat, cfg.cond_gate);
  if (!r.mv.pass) fail("verify_metric failed at tol_compat/tol_flat " +
                       std::to_string(cfg.tol_compat) + "/" + std::to_string(cfg.tol_flat));
  r.cone = cone_metric_defect(r.m, C, r.eta_taut, r.metric);
  if (!(r.cone.worst() <= cfg.tol_cone))
    fail("cone metric defect " + std::to_string(r.cone.worst()) + " > tol_cone " +
         std::to_string(cfg.tol_cone));

  // harmonic-map side
  r.em = harmonic_map(r.m, r.rep.transports, cfg.tol_harmonic, cfg.harmonic_maxit);
  if (!r.em.converged)
    fail("harmonic map stalled at gradient norm " + std::to_string(r.em.grad_norm) +
         " (tol_harmonic " + std::to_string(cfg.tol_harmonic) + ")");
  r.pair = extract_pair(r.m, r.rep.transports, r.em.f);
  r.reconstructed = compose_flat(r.pair);
  r.recon_face_curv = face_curvature(r.m, r.reconstructed);

  // gauge-invariant character comparison
  r.chars = compare_characters(r.m, r.rep.transports, r.reconstructed);
  if (!(r.chars.mismatch <= cfg.tol_char))
    fail("character mismatch " + std::to_string(r.chars.mismatch) + " > tol_char " +
         std::to_string(cfg.tol_char));
  return r;
}

}  // namespace hitchlab
