#include "gerbecalc/holonomy.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <thread>

namespace gerbecalc::holonomy {

namespace {

using fields::Complex;
using fields::LoopPath;
using fields::Point;
using fields::SurfaceMap;
using mesh::Side;
using mesh::TriangulatedSurface;

Complex phase(double x) { return std::exp(Complex(0, 2 * fields::kPi * x)); }

// max coordinate distance with circle coordinates compared modulo their period
double point_dist(const fields::TargetSpace& t, const Point& a, const Point& b) {
  std::vector<double> period_of(t.point_dim(), 0.0);
  auto wc = t.winding_coords();
  auto per = t.periods();
  for (size_t i = 0; i < wc.size(); ++i) period_of[wc[i]] = per[i];
  double m = 0;
  for (int i = 0; i < t.point_dim(); ++i) {
    double d = period_of[i] > 0 ? fields::principal(a[i] - b[i], period_of[i]) : a[i] - b[i];
    m = std::max(m, std::abs(d));
  }
  return m;
}

std::string report_summary(const gerbe::ValidationReport& r) {
  std::ostringstream os;
  os << r.check << " failed (max residual " << r.max_residual;
  if (!r.failing_cells.empty()) os << ", first failing cell " << r.failing_cells.front();
  os << ")";
  for (const auto& n : r.notes) os << "; " << n;
  return os.str();
}

// ---------------------------------------------------------------------------
// boundary walk of a face subdomain

// One directed edge of a walked circuit.
struct WalkStep {
  int edge = -1;  // edge id in the walked surface
  int dir = 0;    // +1 traverses the edge's canonical direction
  int tail = -1;
  int head = -1;
};

int chosen_side_count(const TriangulatedSurface& s, int e, const std::vector<char>& chosen) {
  const mesh::Edge& ed = s.edges[e];
  int n = 0;
  for (int i = 0; i < ed.num_sides; ++i) n += chosen[ed.sides[i].face] ? 1 : 0;
  return n;
}

// A reversing lift edge separates a chosen face from an unchosen one; it is
// directed so that the unchosen face sits on its left in the cover's coherent
// orientation (the direction a face-lift flip makes its Stokes term appear
// with).
WalkStep directed_boundary_step(const TriangulatedSurface& s, const std::vector<char>& chosen,
                                int e) {
  const mesh::Edge& ed = s.edges[e];
  Side us = chosen[ed.sides[0].face] ? ed.sides[1] : ed.sides[0];
  WalkStep st;
  st.edge = e;
  st.dir = s.side_dir(us) * s.orient_sign[us.face];
  st.tail = st.dir == 1 ? ed.tail : ed.head;
  st.head = st.dir == 1 ? ed.head : ed.tail;
  return st;
}

// Next reversing edge after `st`: rotate through the face fan at its head
// corner until the next reversing edge.  Which of the two fans at the corner
// (chosen or unchosen faces) resolves the crossing is fixed per deck orbit so
// that the resulting circuits carry a free direction-preserving deck action;
// resolving both fiber points through the same-status fan would break that
// symmetry and entangle distinct circles.  Corners are tracked formally, so
// self-loops and repeated vertices are safe.
int next_boundary_edge(const TriangulatedSurface& s, const mesh::DoubleCover& cover,
                       const std::vector<char>& chosen, const WalkStep& st) {
  bool fan_chosen = st.head < cover.deck_vertex[st.head];
  const mesh::Edge& ed = s.edges[st.edge];
  Side entry{-1, -1};
  for (int i = 0; i < ed.num_sides; ++i)
    if ((chosen[ed.sides[i].face] != 0) == fan_chosen) entry = ed.sides[i];
  if (entry.face < 0) throw HolonomyError("internal: reversing edge lost its fan side");
  bool endpoint_is_edge_tail = (st.dir == -1);  // the walk's head as an edge endpoint
  int F = entry.face;
  int l = entry.local;
  int a = ((s.side_dir(entry) == 1) == endpoint_is_edge_tail) ? l : (l + 1) % 3;
  for (int guard = 0; guard < 4 * s.num_faces() + 8; ++guard) {
    int m = (l == a) ? (a + 2) % 3 : a;  // the face's other side at the corner
    int e2 = s.face_edge[F][m];
    if (chosen_side_count(s, e2, chosen) == 1) return e2;
    const mesh::Edge& ed2 = s.edges[e2];
    Side other = (ed2.sides[0].face == F && ed2.sides[0].local == m) ? ed2.sides[1] : ed2.sides[0];
    int d = s.side_dir(Side{F, m});
    int d2 = s.side_dir(other);
    bool tail_of_side = (a == m);
    bool endpoint_is_tail = (tail_of_side == (d == 1));
    bool tail_of_other = (endpoint_is_tail == (d2 == 1));
    F = other.face;
    l = other.local;
    a = tail_of_other ? other.local : (other.local + 1) % 3;
  }
  throw HolonomyError("internal: face fan failed to close");
}

// Decompose the reversing lift edges into directed circuits.
std::vector<std::vector<WalkStep>> walk_reversing_circuits(const mesh::DoubleCover& cover,
                                                           const std::vector<char>& chosen) {
  const TriangulatedSurface& s = cover.total;
  std::vector<std::vector<WalkStep>> circuits;
  std::vector<char> used(s.num_edges(), 0);
  int total_boundary = 0;
  for (int e = 0; e < s.num_edges(); ++e) {
    if (s.edges[e].boundary()) throw HolonomyError("internal: lift walk needs a closed surface");
    if (chosen_side_count(s, e, chosen) == 1) ++total_boundary;
  }
  int walked = 0;
  for (int e0 = 0; e0 < s.num_edges(); ++e0) {
    if (used[e0] || chosen_side_count(s, e0, chosen) != 1) continue;
    std::vector<WalkStep> circ;
    int e = e0;
    while (true) {
      WalkStep st = directed_boundary_step(s, chosen, e);
      if (!circ.empty() && circ.back().head != st.tail)
        throw HolonomyError("internal: boundary walk does not chain");
      circ.push_back(st);
      used[e] = 1;
      ++walked;
      e = next_boundary_edge(s, cover, chosen, st);
      if (e == e0) break;
    }
    if (circ.front().tail != circ.back().head)
      throw HolonomyError("internal: boundary walk does not close");
    circuits.push_back(std::move(circ));
  }
  if (walked != total_boundary) throw HolonomyError("internal: boundary walk missed edges");
  return circuits;
}

// ---------------------------------------------------------------------------
// lift planning on the double cover

struct CirclePlan {
  std::vector<std::vector<WalkStep>> circuits;  // one (doubled) or two (closed lifts)
  std::vector<int> support;                     // sorted base edge ids
  bool doubled = false;
};

struct LiftPlan {
  std::vector<int> chosen;       // base face -> total face
  std::vector<char> chosen_flag;  // per total face
  std::vector<CirclePlan> circles;
};

LiftPlan plan_lifts(const mesh::DoubleCover& cover, const std::vector<int>& face_sheet) {
  const TriangulatedSurface& base = cover.base;
  const TriangulatedSurface& total = cover.total;
  if (!base.closed()) throw HolonomyError("unoriented holonomy needs a closed base surface");
  if (static_cast<int>(face_sheet.size()) != base.num_faces())
    throw HolonomyError("lift structure inconsistent with double cover: expected one sheet per "
                        "base face");
  LiftPlan plan;
  plan.chosen.resize(base.num_faces());
  plan.chosen_flag.assign(total.num_faces(), 0);
  for (int f = 0; f < base.num_faces(); ++f) {
    if (face_sheet[f] != 1 && face_sheet[f] != -1)
      throw HolonomyError("lift structure inconsistent with double cover: sheets must be +1/-1");
    plan.chosen[f] = cover.face_lift(f, face_sheet[f]);
    plan.chosen_flag[plan.chosen[f]] = 1;
  }
  auto circuits = walk_reversing_circuits(cover, plan.chosen_flag);

  std::map<std::vector<int>, std::vector<int>> groups;  // support -> circuit indices
  for (size_t i = 0; i < circuits.size(); ++i) {
    std::vector<int> sup;
    for (const auto& st : circuits[i]) sup.push_back(cover.base_edge[st.edge]);
    std::sort(sup.begin(), sup.end());
    sup.erase(std::unique(sup.begin(), sup.end()), sup.end());
    groups[sup].push_back(static_cast<int>(i));
  }
  for (auto& [sup, idx] : groups) {
    CirclePlan cp;
    cp.support = sup;
    std::map<int, int> coverage;
    for (int i : idx)
      for (const auto& st : circuits[i]) coverage[cover.base_edge[st.edge]] += 1;
    bool clean = true;
    for (int e : sup) clean = clean && coverage[e] == 2;
    std::ostringstream tag;
    tag << "base edges";
    for (int e : sup) tag << " " << e;
    if (idx.size() == 2 && clean &&
        circuits[idx[0]].size() == sup.size() && circuits[idx[1]].size() == sup.size()) {
      cp.doubled = false;
    } else if (idx.size() == 1 && clean && circuits[idx[0]].size() == 2 * sup.size()) {
      cp.doubled = true;
    } else {
      throw HolonomyError("a reversing circle lift alternates sheets more than once (" +
                          tag.str() + "); refine the mesh");
    }
    // deterministic order: the circuit through the smallest total edge first
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      auto key = [&](int i) {
        int m = circuits[i][0].edge;
        for (const auto& st : circuits[i]) m = std::min(m, st.edge);
        return m;
      };
      return key(a) < key(b);
    });
    for (int i : idx) cp.circuits.push_back(circuits[i]);
    plan.circles.push_back(std::move(cp));
  }
  std::sort(plan.circles.begin(), plan.circles.end(),
            [](const CirclePlan& a, const CirclePlan& b) { return a.support < b.support; });
  return plan;
}

// Valid split starts of a doubled circuit: indices i such that the next
// |support| steps cover each base edge once and end on the deck partner of
// the start vertex.
std::vector<int> doubled_split_starts(const mesh::DoubleCover& cover,
                                      const std::vector<WalkStep>& circ, int support_size) {
  int n2 = static_cast<int>(circ.size());
  int n = support_size;
  std::vector<int> valid;
  for (int i = 0; i < n2; ++i) {
    std::map<int, int> seen;
    bool distinct = true;
    for (int j = 0; j < n; ++j) distinct = distinct && ++seen[cover.base_edge[circ[(i + j) % n2].edge]] == 1;
    if (!distinct) continue;
    int end = circ[(i + n) % n2].tail;
    if (end == cover.deck_vertex[circ[i].tail]) valid.push_back(i);
  }
  return valid;
}

LoopPath loop_of_circuit(const SurfaceMap& m, const std::vector<WalkStep>& circ) {
  LoopPath loop;
  loop.target = m.target;
  int wr = m.target.winding_rank();
  for (const auto& st : circ) {
    loop.points.push_back(m.vertex_images[st.tail]);
    std::vector<int> w(wr);
    for (int k = 0; k < wr; ++k) w[k] = st.dir * m.edge_windings[st.edge][k];
    loop.windings.push_back(w);
  }
  return loop;
}

// Open path along steps start .. start+count-1 of a circuit (count+1 points).
LoopPath path_of_circuit(const SurfaceMap& m, const std::vector<WalkStep>& circ, int start,
                         int count) {
  LoopPath path;
  path.target = m.target;
  int wr = m.target.winding_rank();
  int n2 = static_cast<int>(circ.size());
  for (int j = 0; j < count; ++j) {
    const WalkStep& st = circ[(start + j) % n2];
    path.points.push_back(m.vertex_images[st.tail]);
    std::vector<int> w(wr);
    for (int k = 0; k < wr; ++k) w[k] = st.dir * m.edge_windings[st.edge][k];
    path.windings.push_back(w);
  }
  const WalkStep& last = circ[(start + count - 1) % n2];
  path.points.push_back(m.vertex_images[last.head]);
  path.windings.push_back(std::vector<int>(wr, 0));  // closing slot, never integrated
  return path;
}

// +1 when the circle's stored direction agrees with the orientation the
// adjacent faces induce on it, -1 when it runs against it.
int induced_direction(const mesh::TriangulatedSurface& s, const mesh::Circle& c) {
  int rel = 0;
  for (int i = 0; i < c.length(); ++i) {
    const mesh::Edge& ed = s.edges[c.edges[i]];
    if (!ed.boundary()) throw HolonomyError("internal: induced direction of a non-boundary edge");
    Side s0 = ed.sides[0];
    int ind = s.side_dir(s0) * s.orient_sign[s0.face];
    int r = ind * c.dirs[i];
    if (rel == 0) rel = r;
    if (r != rel) throw HolonomyError("internal: boundary circle direction is inconsistent");
  }
  return rel;
}

// Boundary circle as a loop in the induced orientation (the direction the
// unique adjacent face traverses it in the coherent orientation).
LoopPath induced_boundary_loop(const SurfaceMap& m, const mesh::Circle& c) {
  LoopPath loop = loop_of_circle(m, c);
  return induced_direction(m.surface, c) == -1 ? fields::reverse_loop(loop) : loop;
}

LoopPath rotate_loop(const LoopPath& p, int r) {
  int n = static_cast<int>(p.points.size());
  LoopPath out;
  out.target = p.target;
  for (int i = 0; i < n; ++i) {
    out.points.push_back(p.points[(i + r) % n]);
    out.windings.push_back(p.windings[(i + r) % n]);
  }
  return out;
}

Complex bundle_trace(const gerbe::GerbeModule& mod, const LoopPath& loop) {
  if (mod.rank == 1) return fields::line_holonomy_u1(mod.conn.a, loop);
  return fields::line_holonomy(mod.conn, loop).trace();
}

void require_same_target(const fields::TargetSpace& a, const fields::TargetSpace& b,
                         const char* what) {
  if (!a.same_as(b)) throw HolonomyError(std::string(what) + ": target spaces differ");
}

}  // namespace

// ---------------------------------------------------------------------------

HolonomyResult holonomy_closed(const fields::FormOracle& omega, const SurfaceMap& map) {
  if (omega.degree != 2) throw HolonomyError("closed holonomy needs a two-form");
  require_same_target(omega.target, map.target, "closed holonomy");
  if (!map.surface.closed()) throw HolonomyError("closed holonomy needs a closed surface");
  if (!map.surface.oriented()) throw HolonomyError("closed holonomy needs an oriented surface");
  double i0 = fields::pullback_integrate(omega, map);
  double i1 = fields::pullback_integrate(omega, fields::subdivide_map(map));
  HolonomyResult r;
  r.value = phase(i0);
  r.quadrature_error = std::abs(i1 - i0);
  std::ostringstream os;
  os << "surface integral " << i0 << ", refined " << i1;
  r.diagnostics.push_back(os.str());
  return r;
}

HolonomyResult holonomy_deligne(const gerbe::DeligneSurfaceData& data,
                                const std::optional<DeligneLiftStructure>& unoriented) {
  auto report = gerbe::validate_cocycle(data);
  if (!report.pass) throw HolonomyError("cocycle validation failed: " + report_summary(report));
  const TriangulatedSurface& s = data.surface;
  HolonomyResult r;
  if (!unoriented) {
    double expo = 0;
    for (double bf : data.b) expo += bf;
    for (int e = 0; e < s.num_edges(); ++e)
      if (!s.edges[e].boundary()) expo += data.a[e];
    Complex g(1, 0);
    for (const auto& gv : data.g) g *= gv;
    r.value = phase(expo) * g;
    return r;
  }

  // unoriented evaluation through the orientation double cover
  const DeligneLiftStructure& ls = *unoriented;
  if (!s.closed()) throw HolonomyError("unoriented evaluation needs a closed surface");
  if (static_cast<int>(ls.eta.size()) != s.num_edges() ||
      static_cast<int>(ls.phi.size()) != s.num_vertices)
    throw HolonomyError("lift structure inconsistent with double cover: eta is per edge, phi per "
                        "vertex");
  mesh::DoubleCover cover = mesh::orientation_double_cover(s);
  LiftPlan plan = plan_lifts(cover, ls.face_sheet);

  // face terms: the chosen lift's value in the cover orientation (sheet -1
  // lifts reverse the face's own vertex order)
  double expo = 0;
  std::vector<double> tau(s.num_faces());
  for (int f = 0; f < s.num_faces(); ++f) {
    tau[f] = cover.total.orient_sign[plan.chosen[f]] * (ls.face_sheet[f] == 1 ? 1.0 : -1.0);
    expo += tau[f] * data.b[f];
  }
  // connection terms on non-reversing edges ride their side-0 face's lift so
  // that lambda gauges keep telescoping exactly
  std::vector<char> reversing(s.num_edges(), 0);
  for (const auto& cp : plan.circles)
    for (int e : cp.support) reversing[e] = 1;
  for (int e = 0; e < s.num_edges(); ++e)
    if (!reversing[e]) expo += tau[s.edges[e].sides[0].face] * data.a[e];
  // circle terms: eta along the canonical base direction of each circle, and
  // a point phase where the circle's preimage is a single doubled circuit
  Complex pts(1, 0);
  for (const auto& cp : plan.circles) {
    std::map<int, int> base_dir;
    for (const auto& st : cp.circuits[0])
      base_dir[cover.base_edge[st.edge]] = st.dir * cover.base_edge_dir[st.edge];
    for (int e : cp.support) expo += base_dir[e] * ls.eta[e];
    if (cp.doubled) {
      int pc = s.num_vertices;
      for (const auto& st : cp.circuits[0]) pc = std::min(pc, cover.base_vertex[st.tail]);
      pts *= ls.phi[pc];
    }
  }
  Complex g(1, 0);
  for (const auto& gv : data.g) g *= gv;
  r.value = phase(expo) * g * pts;
  std::ostringstream os;
  os << plan.circles.size() << " reversing circle(s)";
  r.diagnostics.push_back(os.str());
  return r;
}

int count_reversing_circles(const mesh::DoubleCover& cover, const std::vector<int>& face_sheet) {
  return static_cast<int>(plan_lifts(cover, face_sheet).circles.size());
}

HolonomyResult holonomy_unoriented(const gerbe::JandlTrivialData& data, const fields::SmoothMap& k,
                                   const mesh::DoubleCover& cover, const SurfaceMap& map,
                                   const UnorientedLifts& lifts) {
  if (data.omega.degree != 2 || data.line_a.degree != 1)
    throw HolonomyError("jandl data needs a two-form and a one-form");
  require_same_target(data.omega.target, map.target, "unoriented holonomy");
  require_same_target(k.domain, map.target, "unoriented holonomy involution");
  if (map.surface.faces != cover.total.faces ||
      map.surface.num_vertices != cover.total.num_vertices)
    throw HolonomyError("map is not defined on the cover's total surface");

  // deck-equivariance on vertex images
  for (int v = 0; v < cover.total.num_vertices; ++v) {
    Point kv = fields::reduce_point(map.target, k.apply(map.vertex_images[v]));
    double d = point_dist(map.target, map.vertex_images[cover.deck_vertex[v]], kv);
    if (d > 1e-9) {
      std::ostringstream os;
      os << "map is not deck-equivariant at vertex " << v << " (residual " << d << ")";
      throw HolonomyError(os.str());
    }
  }

  std::vector<int> sheets = lifts.face_sheet;
  if (sheets.empty()) sheets.assign(cover.base.num_faces(), 1);
  LiftPlan plan = plan_lifts(cover, sheets);
  std::vector<int> start = lifts.circle_start;
  if (start.empty()) start.assign(plan.circles.size(), 0);
  if (start.size() != plan.circles.size())
    throw HolonomyError("lift structure inconsistent with double cover: expected " +
                        std::to_string(plan.circles.size()) + " circle choices");

  HolonomyResult r;
  fields::IntegrateOptions opt;
  opt.faces = &plan.chosen;
  double iface = fields::pullback_integrate(data.omega, map, opt);
  r.value = phase(iface);

  int closed_lifts = 0, doubled_lifts = 0;
  for (size_t c = 0; c < plan.circles.size(); ++c) {
    const CirclePlan& cp = plan.circles[c];
    int bit = start[c];
    if (bit != 0 && bit != 1)
      throw HolonomyError("lift structure inconsistent with double cover: circle choices are 0/1");
    if (!cp.doubled) {
      // the preimage is two closed circles; the bit picks the lift and the
      // descended holonomy is a plain loop integral
      r.value *= fields::line_holonomy_u1(data.line_a, loop_of_circuit(map, cp.circuits[bit]));
      ++closed_lifts;
    } else {
      // single doubled circuit: integrate along one half (each base edge
      // once), then close up with phi at the image of the starting preimage
      const auto& circ = cp.circuits[0];
      int n = static_cast<int>(cp.support.size());
      auto valid = doubled_split_starts(cover, circ, n);
      if (valid.empty()) {
        std::ostringstream os;
        os << "a reversing circle lift alternates sheets more than once (base edges";
        for (int e : cp.support) os << " " << e;
        os << "); refine the mesh";
        throw HolonomyError(os.str());
      }
      int best = valid[0];
      for (int i : valid) {
        auto key = [&](int j) { return std::pair(cover.base_vertex[circ[j].tail], j); };
        if (key(i) < key(best)) best = i;
      }
      int s0 = bit == 0 ? best : (best + n) % static_cast<int>(circ.size());
      LoopPath path = path_of_circuit(map, circ, s0, n);
      double ic = fields::open_line_integral_u1(data.line_a, path);
      r.value *= phase(ic) * data.phi.eval(map.vertex_images[circ[s0].tail]);
      ++doubled_lifts;
    }
  }
  std::ostringstream os;
  os << plan.circles.size() << " reversing circle(s): " << closed_lifts << " with closed lifts, "
     << doubled_lifts << " doubled";
  r.diagnostics.push_back(os.str());
  return r;
}

HolonomyResult holonomy_boundary(const fields::FormOracle& rho, const gerbe::DBraneRecord& brane,
                                 const SurfaceMap& map) {
  if (rho.degree != 2) throw HolonomyError("boundary holonomy needs a two-form");
  require_same_target(rho.target, map.target, "boundary holonomy");
  require_same_target(brane.world_volume.target, map.target, "boundary holonomy world volume");
  if (!map.surface.oriented()) throw HolonomyError("boundary holonomy needs an oriented surface");
  if (map.surface.closed())
    throw HolonomyError("surface has no boundary; use the closed engine");
  if (brane.module.rank < 1) throw HolonomyError("rank 0 module");

  for (const auto& c : map.surface.boundary_circles)
    for (int i = 0; i < c.length(); ++i) {
      const mesh::Edge& ed = map.surface.edges[c.edges[i]];
      int v = c.dirs[i] == 1 ? ed.tail : ed.head;
      if (!brane.world_volume.contains(map.vertex_images[v], 1e-9)) {
        std::ostringstream os;
        os << "boundary leaves the brane world volume at vertex " << v;
        throw HolonomyError(os.str());
      }
    }

  HolonomyResult r;
  r.value = phase(fields::pullback_integrate(rho, map));
  for (const auto& c : map.surface.boundary_circles)
    r.value *= bundle_trace(brane.module, induced_boundary_loop(map, c));
  std::ostringstream os;
  os << map.surface.boundary_circles.size() << " boundary circle(s), rank " << brane.module.rank;
  r.diagnostics.push_back(os.str());
  return r;
}

HolonomyResult holonomy_defect(const fields::FormOracle& rho1, const fields::FormOracle& rho2,
                               const gerbe::BiBraneRecord& bibrane, const SurfaceMap& map1,
                               const SurfaceMap& map2) {
  if (rho1.degree != 2 || rho2.degree != 2) throw HolonomyError("defect holonomy needs two-forms");
  require_same_target(rho1.target, map1.target, "defect holonomy (piece 1)");
  require_same_target(rho2.target, map2.target, "defect holonomy (piece 2)");
  require_same_target(bibrane.world_volume.target,
                      fields::TargetSpace::product(map1.target, map2.target),
                      "defect holonomy world volume");
  if (!map1.surface.oriented() || !map2.surface.oriented())
    throw HolonomyError("defect holonomy needs oriented pieces");
  if (map1.surface.closed() || map2.surface.closed())
    throw HolonomyError("defect holonomy needs pieces with boundary");
  if (bibrane.bundle.rank < 1) throw HolonomyError("rank 0 module");
  if (map1.surface.boundary_circles.size() != map2.surface.boundary_circles.size())
    throw HolonomyError("defect circle counts differ between the pieces");

  HolonomyResult r;
  r.value = phase(fields::pullback_integrate(rho1, map1)) *
            phase(fields::pullback_integrate(rho2, map2));

  for (size_t c = 0; c < map1.surface.boundary_circles.size(); ++c) {
    const mesh::Circle& c1 = map1.surface.boundary_circles[c];
    const mesh::Circle& c2 = map2.surface.boundary_circles[c];
    LoopPath l1 = fields::loop_of_circle(map1, c1);
    LoopPath l2 = fields::loop_of_circle(map2, c2);
    int n = static_cast<int>(l1.points.size());
    if (static_cast<int>(l2.points.size()) != n)
      throw HolonomyError("defect circles do not match edge for edge");
    auto aligns = [&](const LoopPath& cand, int rot) {
      LoopPath rc = rotate_loop(cand, rot);
      for (int j = 0; j < n; ++j) {
        Point p = l1.points[j];
        p.insert(p.end(), rc.points[j].begin(), rc.points[j].end());
        if (!bibrane.world_volume.contains(p, 1e-9)) return false;
      }
      return true;
    };
    // Align the parameterizations: same stored direction first, reversed as a
    // fallback for inputs whose circles are stored in opposite order.
    int offset = -1, hits = 0, flip = 1;
    for (int rot = 0; rot < n; ++rot)
      if (aligns(l2, rot)) {
        ++hits;
        if (offset < 0) offset = rot;
      }
    if (offset < 0) {
      LoopPath rev = fields::reverse_loop(l2);
      flip = -1;
      for (int rot = 0; rot < n; ++rot)
        if (aligns(rev, rot)) {
          ++hits;
          if (offset < 0) {
            offset = rot;
            l2 = rev;
          }
        }
    }
    if (offset < 0) {
      std::ostringstream os;
      os << "defect circle " << c << " pair leaves the bi-brane world volume";
      throw HolonomyError(os.str());
    }
    if (hits > 1) {
      std::ostringstream os;
      os << "seam " << c << ": " << hits << " alignments fit the world volume; using offset "
         << offset;
      r.diagnostics.push_back(os.str());
    }
    // The stored circle direction is the defect orientation; the trace runs
    // along it, and the two pieces must sit on opposite sides of it.
    int rel1 = induced_direction(map1.surface, c1);
    int rel2 = induced_direction(map2.surface, c2) * flip;
    if (rel1 != -rel2)
      throw HolonomyError("defect circle orientation mismatch: the pieces must induce opposite "
                          "directions along the seam");
    r.value *= bundle_trace(bibrane.bundle, fields::product_loop(l1, rotate_loop(l2, offset)));
  }
  std::ostringstream os;
  os << map1.surface.boundary_circles.size() << " defect circle(s), rank " << bibrane.bundle.rank;
  r.diagnostics.push_back(os.str());
  return r;
}

// ---------------------------------------------------------------------------
// independence harness

IndependenceReport independence_harness(const std::vector<Variant>& variants) {
  IndependenceReport rep;
  int n = static_cast<int>(variants.size());
  rep.variants = n;
  if (n == 0) {
    rep.notes.push_back("no variants");
    return rep;
  }
  std::vector<Complex> vals(n);
  std::vector<std::string> errs(n);
  std::vector<char> ok(n, 0);
  auto run_range = [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      try {
        vals[i] = variants[i]();
        ok[i] = 1;
      } catch (const std::exception& e) {
        errs[i] = e.what();
      }
    }
  };
  unsigned hw = std::thread::hardware_concurrency();
  int workers = std::min<int>(n, hw == 0 ? 1 : static_cast<int>(hw));
  if (n < 4 || workers < 2) {
    run_range(0, n);
  } else {
    std::vector<std::thread> pool;
    int chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      int lo = w * chunk, hi = std::min(n, lo + chunk);
      if (lo < hi) pool.emplace_back(run_range, lo, hi);
    }
    for (auto& t : pool) t.join();
  }
  bool have_base = false;
  for (int i = 0; i < n; ++i) {
    if (!ok[i]) {
      rep.notes.push_back("variant " + std::to_string(i) + " failed: " + errs[i]);
      continue;
    }
    if (!have_base) {
      rep.base_value = vals[i];
      have_base = true;
    }
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (ok[i] && ok[j]) rep.spread = std::max(rep.spread, std::abs(vals[i] - vals[j]));
  return rep;
}

std::vector<Variant> deligne_gauge_variants(const gerbe::DeligneSurfaceData& data, int count,
                                            unsigned seed) {
  auto base = std::make_shared<const gerbe::DeligneSurfaceData>(data);
  std::vector<Variant> out;
  out.push_back([base] { return holonomy_deligne(*base).value; });
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> lam(-2.0, 2.0), ang(0.0, 1.0);
  for (int i = 0; i < count; ++i) {
    gerbe::DeligneGauge gauge;
    for (int e = 0; e < base->surface.num_edges(); ++e) {
      gauge.lambda.push_back(base->surface.edges[e].boundary() ? 0.0 : lam(rng));
      gauge.u.push_back(phase(ang(rng)));
    }
    out.push_back([base, gauge] { return holonomy_deligne(gauge_transform(*base, gauge)).value; });
  }
  return out;
}

std::vector<Variant> subdivision_variants(const fields::FormOracle& omega, const SurfaceMap& map,
                                          int levels) {
  auto maps = std::make_shared<std::vector<SurfaceMap>>();
  maps->push_back(map);
  for (int i = 0; i < levels; ++i) maps->push_back(fields::subdivide_map(maps->back()));
  std::vector<Variant> out;
  for (size_t i = 0; i < maps->size(); ++i)
    out.push_back([omega, maps, i] { return holonomy_closed(omega, (*maps)[i]).value; });
  return out;
}

std::vector<Variant> unoriented_lift_variants(const gerbe::JandlTrivialData& data,
                                              const fields::SmoothMap& k,
                                              const mesh::DoubleCover& cover, const SurfaceMap& map,
                                              int max_variants) {
  int nf = cover.base.num_faces();
  std::vector<std::vector<int>> sheets;
  if (nf < 20 && (1LL << nf) <= max_variants) {
    for (long long mask = 0; mask < (1LL << nf); ++mask) {
      std::vector<int> fs(nf);
      for (int f = 0; f < nf; ++f) fs[f] = (mask >> f) & 1 ? -1 : 1;
      sheets.push_back(fs);
    }
  } else {
    std::mt19937 rng(987654321u);
    sheets.push_back(std::vector<int>(nf, 1));
    for (int i = 1; i < max_variants; ++i) {
      std::vector<int> fs(nf);
      for (int f = 0; f < nf; ++f) fs[f] = rng() & 1 ? -1 : 1;
      sheets.push_back(fs);
    }
  }
  auto shared_data = std::make_shared<const gerbe::JandlTrivialData>(data);
  auto shared_k = std::make_shared<const fields::SmoothMap>(k);
  auto shared_cover = std::make_shared<const mesh::DoubleCover>(cover);
  auto shared_map = std::make_shared<const SurfaceMap>(map);
  std::vector<Variant> out;
  for (const auto& fs : sheets) {
    if (static_cast<int>(out.size()) >= max_variants) break;
    int nc = count_reversing_circles(cover, fs);
    long long patterns = nc >= 12 ? (1LL << 12) : (1LL << nc);
    for (long long p = 0; p < patterns; ++p) {
      if (static_cast<int>(out.size()) >= max_variants) break;
      std::vector<int> bits(nc);
      for (int c = 0; c < nc; ++c) bits[c] = (p >> c) & 1;
      UnorientedLifts lifts{fs, bits};
      out.push_back([shared_data, shared_k, shared_cover, shared_map, lifts] {
        return holonomy_unoriented(*shared_data, *shared_k, *shared_cover, *shared_map, lifts)
            .value;
      });
    }
  }
  return out;
}

std::vector<Variant> boundary_rotation_variants(const fields::FormOracle& rho,
                                                const gerbe::DBraneRecord& brane,
                                                const SurfaceMap& map) {
  const auto& s = map.surface;
  // Circle steps as declarations; a boundary edge has one side, and the
  // declaration direction is relative to that side.
  auto decl_of = [&](const mesh::Circle& c) {
    std::vector<mesh::CircleRef> refs;
    for (int i = 0; i < c.length(); ++i) {
      const auto& e = s.edges[c.edges[i]];
      refs.push_back(mesh::CircleRef(e.sides[0], s.side_dir(e.sides[0]) != c.dirs[i]));
    }
    return refs;
  };
  std::vector<std::vector<mesh::CircleRef>> base_decl;
  for (const auto& c : s.boundary_circles) base_decl.push_back(decl_of(c));

  auto shared_rho = std::make_shared<const fields::FormOracle>(rho);
  auto shared_brane = std::make_shared<const gerbe::DBraneRecord>(brane);
  std::vector<Variant> out;
  auto add = [&](size_t circle, int rot) {
    auto decl = base_decl;
    if (rot > 0)
      std::rotate(decl[circle].begin(), decl[circle].begin() + rot, decl[circle].end());
    mesh::BuildOptions opt;
    opt.boundary_decl = decl;
    for (const auto& c : s.defect_circles) opt.defect_decl.push_back(decl_of(c));
    auto rebuilt = mesh::build_surface(s.num_vertices, s.faces, opt);
    for (size_t e = 0; e < s.edges.size(); ++e)
      if (rebuilt.edges[e].tail != s.edges[e].tail || rebuilt.edges[e].head != s.edges[e].head)
        throw HolonomyError("surface gluing is not implied by shared vertices; cannot rotate");
    auto m2 = std::make_shared<const SurfaceMap>(
        fields::make_surface_map(rebuilt, map.target, map.vertex_images, map.edge_windings));
    out.push_back([shared_rho, shared_brane, m2] {
      return holonomy_boundary(*shared_rho, *shared_brane, *m2).value;
    });
  };
  add(0, 0);
  for (size_t c = 0; c < base_decl.size(); ++c)
    for (int r = 1; r < static_cast<int>(base_decl[c].size()); ++r) add(c, r);
  return out;
}

}  // namespace gerbecalc::holonomy
