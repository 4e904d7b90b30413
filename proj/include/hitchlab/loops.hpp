#pragma once
// Weld-crossing loops and gauge-invariant character comparison.
//
// A BFS tree over interior (non-weld) pre-quotient edges gives a path
// holonomy from the center chart to any point chart. Each identified side
// pair then closes a loop: center -> seg start, teleport across the weld,
// partner end -> center. The loop holonomies realize the surface-group
// generators up to the global vertex gauge at the center, so characters
// chi(w) = sqrt(tr(w) + 1) computed from them are gauge invariant and can be
// compared across different transport sets (original vs recomposed) without
// ever fixing a common frame.

#include "rep.hpp"

#include <queue>
#include <set>
#include <string>

namespace hitchlab {

// parent[x] for the BFS tree over non-weld pre-quotient edges from point 0
inline std::vector<int> interior_bfs(const PreMesh& pm) {
  const int n = static_cast<int>(pm.points.size());
  std::set<std::pair<int, int>> segkeys;
  for (const auto& s : pm.segs) segkeys.insert(std::minmax(s.i, s.j));
  std::vector<std::vector<int>> adj(static_cast<size_t>(n));
  for (const auto& t : pm.tris) {
    const int a = t[0], b = t[1], c = t[2];
    const std::pair<int, int> steps[3] = {{a, b}, {b, c}, {c, a}};
    for (const auto& [u, v] : steps) {
      if (segkeys.count(std::minmax(u, v))) continue;
      adj[static_cast<size_t>(u)].push_back(v);
      adj[static_cast<size_t>(v)].push_back(u);
    }
  }
  std::vector<int> parent(static_cast<size_t>(n), -2);  // -2 unreached, -1 root
  parent[0] = -1;
  std::queue<int> dq;
  dq.push(0);
  while (!dq.empty()) {
    const int u = dq.front();
    dq.pop();
    for (int v : adj[static_cast<size_t>(u)]) {
      if (parent[static_cast<size_t>(v)] != -2) continue;
      parent[static_cast<size_t>(v)] = u;
      dq.push(v);
    }
  }
  return parent;
}

// holonomy of the tree path center -> x (maps the center chart to x's chart)
inline Mat3d path_holonomy(const Quotient& q, const std::vector<int>& parent,
                           const std::vector<Mat3d>& T, int x) {
  std::vector<std::pair<int, int>> steps;
  int v = x;
  while (parent[static_cast<size_t>(v)] >= 0) {
    const int u = parent[static_cast<size_t>(v)];
    steps.emplace_back(u, v);
    v = u;
  }
  if (parent[static_cast<size_t>(v)] == -2)
    throw invariant_error("path_holonomy: point not reached by the interior BFS tree");
  Mat3d H = Mat3d::Identity();
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    const auto [u, w] = *it;
    const auto found = q.edgeof.find({std::min(u, w), std::max(u, w)});
    if (found == q.edgeof.end()) throw invariant_error("path_holonomy: unknown edge");
    auto [eid, sg] = found->second;
    if (u > w) sg = -sg;
    H = (sg > 0 ? T[static_cast<size_t>(eid)] : Mat3d(soinv(T[static_cast<size_t>(eid)]))) * H;
  }
  return H;
}

struct WeldLoop {
  int sid = -1;  // segment index (the smaller of the identified pair)
  Mat3d H;
};

// loop holonomies through every weld, via the given canonical edge transports
inline std::vector<WeldLoop> loop_holonomies(const TriangulatedSurface& m,
                                             const std::vector<Mat3d>& T) {
  const PreMesh& pm = *m.pre;
  const Quotient& q = *m.quot;
  const std::vector<int> parent = interior_bfs(pm);
  std::vector<WeldLoop> out;
  for (size_t sid = 0; sid < pm.segs.size(); ++sid) {
    const auto& s = pm.segs[sid];
    if (static_cast<size_t>(s.pid) < sid) continue;
    const auto& p = pm.segs[static_cast<size_t>(s.pid)];
    const Mat3d H1 = path_holonomy(q, parent, T, s.i);
    const Mat3d H2 = path_holonomy(q, parent, T, p.j);
    out.push_back({static_cast<int>(sid), Mat3d(soinv(H2) * H1)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Matching loops to generators and recovering a generator set.

struct GeneratorMatch {
  int gen = -1;       // raw generator index: 0..g-1 = A_j, g..2g-1 = B_j
  int sid = -1;       // weld segment whose loop realizes it
  bool inverted = false;
  double distance = 0;
};

// for each raw generator find the loop (possibly inverted) closest to it
inline std::vector<GeneratorMatch> match_generators(const std::vector<Mat3d>& gens,
                                                    const std::vector<WeldLoop>& loops) {
  std::vector<GeneratorMatch> out;
  out.reserve(gens.size());
  for (size_t k = 0; k < gens.size(); ++k) {
    GeneratorMatch best;
    best.gen = static_cast<int>(k);
    best.distance = std::numeric_limits<double>::infinity();
    for (const auto& lp : loops) {
      const double d0 = (lp.H - gens[k]).cwiseAbs().maxCoeff();
      if (d0 < best.distance) best = {static_cast<int>(k), lp.sid, false, d0};
      const double d1 = (Mat3d(soinv(lp.H)) - gens[k]).cwiseAbs().maxCoeff();
      if (d1 < best.distance) best = {static_cast<int>(k), lp.sid, true, d1};
    }
    out.push_back(best);
  }
  return out;
}

// re-evaluate a matched generator set with another transport family
inline std::vector<Mat3d> generators_from_loops(const TriangulatedSurface& m,
                                                const std::vector<Mat3d>& T,
                                                const std::vector<GeneratorMatch>& matches) {
  const std::vector<WeldLoop> loops = loop_holonomies(m, T);
  std::vector<Mat3d> gens(matches.size());
  for (const auto& gm : matches) {
    const WeldLoop* found = nullptr;
    for (const auto& lp : loops)
      if (lp.sid == gm.sid) found = &lp;
    if (!found) throw invariant_error("generators_from_loops: matched segment has no loop");
    gens[static_cast<size_t>(gm.gen)] = gm.inverted ? Mat3d(soinv(found->H)) : found->H;
  }
  return gens;
}

// ---------------------------------------------------------------------------
// Character battery.

// ten fixed test words over a0, b0, a1, b1 (raw indices 0, g, 1, g+1);
// a letter is (raw generator index, +-1)
using Word = std::vector<std::pair<int, int>>;

inline std::vector<Word> character_words(int g) {
  if (g < 2) throw invariant_error("character_words: genus must be at least 2");
  const int a0 = 0, b0 = g, a1 = 1, b1 = g + 1;
  return {
      {{a0, 1}},
      {{b0, 1}},
      {{a1, 1}},
      {{b1, 1}},
      {{a0, 1}, {b0, 1}},
      {{a0, 1}, {b0, 1}, {a0, -1}, {b0, -1}},
      {{a0, 1}, {a1, 1}},
      {{b0, 1}, {b1, -1}},
      {{a0, 1}, {b1, 1}, {a1, -1}},
      {{a0, 1}, {a0, 1}, {b0, 1}},
  };
}

inline std::vector<double> character_battery(const std::vector<Mat3d>& gens, int g) {
  std::vector<double> chi;
  for (const auto& w : character_words(g)) chi.push_back(character(eval_word(gens, w)));
  return chi;
}

inline double character_mismatch(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw invariant_error("character_mismatch: batteries differ in size");
  double worst = 0;
  for (size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace hitchlab
