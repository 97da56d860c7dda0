// Reference complexes and chart-built maps onto the standard targets: the
// minimal closed/unoriented/bounded surfaces, grid tori and Klein bottles,
// and map builders that recover edge windings from plane charts.  Shared by
// the unit tests and the built-in acceptance suite.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "gerbecalc/fields.hpp"
#include "gerbecalc/mesh.hpp"

namespace gerbecalc::fixtures {

using namespace mesh;
namespace gf = fields;

// Boundary of a tetrahedron: the faces are already coherently oriented.
inline TriangulatedSurface sphere_tetra() {
  return build_surface(4, {{0, 1, 2}, {0, 2, 3}, {0, 3, 1}, {1, 3, 2}});
}

// One-vertex torus from two triangles glued along three edges.
inline TriangulatedSurface torus_2f() {
  BuildOptions opt;
  opt.gluing = {{{0, 0}, Side{1, 1}, false},
                {{0, 1}, Side{1, 2}, false},
                {{0, 2}, Side{1, 0}, false}};
  return build_surface(1, {{0, 0, 0}, {0, 0, 0}}, opt);
}

// Two-triangle projective plane.
inline TriangulatedSurface rp2_min() {
  BuildOptions opt;
  opt.gluing = {{{0, 0}, Side{1, 1}, true},
                {{0, 1}, Side{1, 2}, true},
                {{0, 2}, Side{1, 0}, false}};
  return build_surface(2, {{0, 1, 0}, {0, 0, 1}}, opt);
}

// One-vertex Klein bottle.
inline TriangulatedSurface klein_min() {
  BuildOptions opt;
  opt.gluing = {{{0, 0}, Side{1, 1}, false},
                {{0, 1}, Side{1, 2}, true},
                {{0, 2}, Side{1, 0}, false}};
  return build_surface(1, {{0, 0, 0}, {0, 0, 0}}, opt);
}

// Fan disk: four triangles around a hub, square boundary.
inline TriangulatedSurface disk() {
  return build_surface(5, {{0, 1, 2}, {0, 2, 3}, {0, 3, 4}, {0, 4, 1}});
}

// Two-triangle Moebius band (two boundary edges forming one circle).
inline TriangulatedSurface moebius() {
  BuildOptions opt;
  opt.gluing = {{{0, 2}, Side{1, 0}, false},
                {{1, 2}, Side{0, 1}, true},
                {{0, 0}, std::nullopt, false},
                {{1, 1}, std::nullopt, false}};
  return build_surface(2, {{0, 1, 0}, {0, 0, 1}}, opt);
}

// n x n grid Klein bottle (n >= 3; below that the flipped seam collapses onto
// the straight one).  Plane model [0,n]^2 with (n,y) ~ (0,n-y) and
// (x,n) ~ (x,0); kvid reduces a plane grid point to its vertex id.
inline int kvid(int n, int i, int j) {
  j = ((j % n) + n) % n;
  int wrap = ((i % n) + n) % n;
  int cross = (i - wrap) / n;
  if (((cross % 2) + 2) % 2 != 0) j = (n - j) % n;
  return n * wrap + j;
}

inline TriangulatedSurface grid_klein(int n) {
  std::vector<std::array<int, 3>> faces;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      faces.push_back({kvid(n, i, j), kvid(n, i + 1, j), kvid(n, i + 1, j + 1)});
      faces.push_back({kvid(n, i, j), kvid(n, i + 1, j + 1), kvid(n, i, j + 1)});
    }
  return build_surface(n * n, faces, {});
}

// n x n grid torus (n >= 3); each square split into two triangles.  Optional
// defect circles run along given horizontal rows.
inline TriangulatedSurface grid_torus(int n, const std::vector<int>& defect_rows = {}) {
  auto vid = [n](int i, int j) { return n * ((i % n + n) % n) + ((j % n + n) % n); };
  std::vector<std::array<int, 3>> faces;
  // square (i,j): lower triangle 2*(n*i+j), upper 2*(n*i+j)+1
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      faces.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      faces.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  BuildOptions opt;
  for (int row : defect_rows) {
    std::vector<CircleRef> circle;
    for (int i = 0; i < n; ++i) circle.push_back({2 * (n * i + row), 0});
    opt.defect_decl.push_back(circle);
  }
  return build_surface(n * n, faces, opt);
}

// Annulus: an n x n band of squares closing up in the i direction, open in j.
// Face layout matches grid_torus.
inline TriangulatedSurface annulus_grid(int n) {
  auto vid = [n](int i, int j) { return (i % n) * (n + 1) + j; };
  std::vector<std::array<int, 3>> faces;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      faces.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      faces.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  return build_surface(n * (n + 1), faces, {});
}

// Rebuild with boundary circle k stored in the opposite direction.  Only for
// surfaces whose gluing is implied by shared vertices.
inline TriangulatedSurface with_flipped_boundary_circle(const TriangulatedSurface& s, int k) {
  auto decl_of = [&](const Circle& c, bool flip) {
    std::vector<CircleRef> refs;
    for (int i = 0; i < c.length(); ++i) {
      const Edge& e = s.edges[c.edges[i]];
      refs.push_back(CircleRef(e.sides[0], s.side_dir(e.sides[0]) != c.dirs[i]));
    }
    if (flip) {
      std::reverse(refs.begin(), refs.end());
      for (auto& r : refs) r.against = !r.against;
    }
    return refs;
  };
  BuildOptions opt;
  opt.boundary_decl = std::vector<std::vector<CircleRef>>{};
  for (size_t c = 0; c < s.boundary_circles.size(); ++c)
    opt.boundary_decl->push_back(decl_of(s.boundary_circles[c], static_cast<int>(c) == k));
  for (const auto& c : s.defect_circles) opt.defect_decl.push_back(decl_of(c, false));
  return build_surface(s.num_vertices, s.faces, opt);
}

// corners(F, c) -> plane position of corner c of face F; phi -> raw target
// coordinates.  Vertex images are reduced and cross-checked between charts.
inline gf::SurfaceMap chart_map(const TriangulatedSurface& s, const gf::TargetSpace& t,
                                const std::function<std::array<double, 2>(int, int)>& corners,
                                const std::function<gf::Point(double, double)>& phi) {
  auto wcoords = t.winding_coords();
  auto periods = t.periods();
  int V = s.num_vertices;
  std::vector<gf::Point> img(V);
  std::vector<char> have(V, 0);
  std::vector<std::vector<gf::Point>> raw(s.num_faces());
  for (int F = 0; F < s.num_faces(); ++F) {
    raw[F].resize(3);
    for (int c = 0; c < 3; ++c) {
      auto xy = corners(F, c);
      raw[F][c] = phi(xy[0], xy[1]);
      gf::Point p = gf::reduce_point(t, raw[F][c]);
      int v = s.faces[F][c];
      if (have[v]) {
        for (size_t k = 0; k < p.size(); ++k) {
          double d = p[k] - img[v][k];
          for (size_t w = 0; w < wcoords.size(); ++w)
            if (wcoords[w] == static_cast<int>(k)) d = gf::principal(d, periods[w]);
          if (std::abs(d) > 1e-9) throw std::runtime_error("chart_map: charts disagree at a vertex");
        }
      } else {
        img[v] = p;
        have[v] = 1;
      }
    }
  }
  // Edge windings: the raw chart displacement along a side is the true lift.
  std::vector<std::vector<int>> wind(s.num_edges(), std::vector<int>(wcoords.size(), 0));
  std::vector<char> seen(s.num_edges(), 0);
  for (int F = 0; F < s.num_faces(); ++F)
    for (int l = 0; l < 3; ++l) {
      int e = s.face_edge[F][l];
      int dir = s.side_dir(Side{F, l});
      for (size_t w = 0; w < wcoords.size(); ++w) {
        int k = wcoords[w];
        double along = raw[F][(l + 1) % 3][k] - raw[F][l][k];  // side tail -> head
        double truth = dir * along;                            // edge canonical direction
        double prin = gf::principal(img[s.edges[e].head][k] - img[s.edges[e].tail][k], periods[w]);
        int n = static_cast<int>(std::lround((truth - prin) / periods[w]));
        if (std::abs(truth - prin - n * periods[w]) > 1e-6)
          throw std::runtime_error("chart_map: displacement is not a lattice shift");
        if (seen[e] && wind[e][w] != n)
          throw std::runtime_error("chart_map: the two sides of an edge disagree on winding");
        wind[e][w] = n;
      }
      seen[e] = 1;
    }
  return gf::make_surface_map(s, t, img, wind);
}

// Plane corner of face F of an n x n grid (squares split lower/upper).
inline std::array<double, 2> grid_corner(int n, int F, int c) {
  int sq = F / 2, upper = F % 2, i = sq / n, j = sq % n;
  static const int lo[3][2] = {{0, 0}, {1, 0}, {1, 1}};
  static const int up[3][2] = {{0, 0}, {1, 1}, {0, 1}};
  return {double(i + (upper ? up[c][0] : lo[c][0])), double(j + (upper ? up[c][1] : lo[c][1]))};
}

// annulus_grid(n) -> torus target: winds once around x, spans [y0, y0+h] in y.
inline gf::SurfaceMap annulus_map(const TriangulatedSurface& s, int n, const gf::TargetSpace& t,
                                  double y0, double h) {
  auto per = t.periods();
  return chart_map(
      s, t, [n](int F, int c) { return grid_corner(n, F, c); },
      [&, y0, h, n](double x, double y) { return gf::Point{per[0] * x / n, y0 + h * y / n}; });
}

// grid_torus(n) -> torus target, wrapping dx times around the first circle and
// dy times around the second.
inline gf::SurfaceMap grid_torus_map(const TriangulatedSurface& s, int n, const gf::TargetSpace& t,
                                     int dx, int dy) {
  auto per = t.periods();
  return chart_map(
      s, t, [n](int F, int c) { return grid_corner(n, F, c); },
      [&, dx, dy, n](double x, double y) {
        return gf::Point{dx * per[0] * x / n, dy * per[1] * y / n};
      });
}

// grid_torus(n) -> circle target; every horizontal row circle winds w times.
inline gf::SurfaceMap grid_circle_map(const TriangulatedSurface& s, int n,
                                      const gf::TargetSpace& t, int w) {
  auto per = t.periods();
  return chart_map(
      s, t, [n](int F, int c) { return grid_corner(n, F, c); },
      [&, w, n](double x, double) { return gf::Point{w * per[0] * x / n}; });
}

// Orientation double cover of grid_klein(n) -> torus target, as the standard
// torus-to-Klein quotient: the deck transformation covers (x, y) -> (x + P1/2, -y).
inline gf::SurfaceMap klein_cover_map(const DoubleCover& cover, int n, const gf::TargetSpace& t) {
  auto per = t.periods();
  double ax = per[0] / (2.0 * n), by = per[1] / n;
  return chart_map(
      cover.total, t,
      [&cover, n](int F, int c) {
        auto xy = grid_corner(n, cover.base_face[F], cover.base_corner_perm[F][c]);
        if (cover.face_sheet[F] == -1) return std::array<double, 2>{xy[0] + n, n - xy[1]};
        return xy;
      },
      [ax, by](double x, double y) { return gf::Point{ax * x, by * y}; });
}

// A lopsided 2-form on su2 (quaternion coordinates), nothing special about it.
inline gf::FormOracle su2_test_form() {
  gf::FormOracle f;
  f.degree = 2;
  f.target = gf::TargetSpace::su2();
  f.name = "su2 test 2-form";
  f.eval = [](const gf::Point& p, const std::vector<gf::Tangent>& ts) {
    const auto &u = ts[0], &v = ts[1];
    auto wedge = [&](int a, int b) { return u[a] * v[b] - u[b] * v[a]; };
    return (1.0 + 0.7 * p[0] + 0.3 * p[2]) * wedge(1, 2) + (0.5 - 0.4 * p[3]) * wedge(1, 3) +
           (0.25 + 0.6 * p[1] * p[0]) * wedge(2, 3) + 0.15 * wedge(0, 1);
  };
  return f;
}

// f - k^* f, which pulls back to -itself under k for any involution k.
inline gf::FormOracle odd_part(const gf::FormOracle& f, const gf::SmoothMap& k) {
  return gf::sum_form(f, gf::scaled_form(gf::pullback_form(k, f), -1.0));
}

// Deck-equivariant su2 map on a double cover: base vertex v goes to g[v] on
// the +1 sheet and to k(g[v]) on the other.  Points should stay near the
// identity so the face spread check passes.
inline gf::SurfaceMap equivariant_su2_map(const DoubleCover& cover, const gf::SmoothMap& k,
                                          const std::vector<gf::Point>& base_images) {
  auto su2 = gf::TargetSpace::su2();
  std::vector<gf::Point> img(cover.total.num_vertices);
  for (int v = 0; v < cover.base.num_vertices; ++v) {
    img[cover.vertex_lifts[v][0]] = gf::reduce_point(su2, base_images[v]);
    img[cover.vertex_lifts[v][1]] = gf::reduce_point(su2, k.apply(base_images[v]));
  }
  std::vector<std::vector<int>> wind(cover.total.num_edges());
  return gf::make_surface_map(cover.total, su2, img, wind);
}

// Small unit quaternion exp(theta * (nx i + ny j + nz k)) without normalizing
// the axis; reduce_point renormalizes anyway.
inline gf::Point quat(double w, double x, double y, double z) { return {w, x, y, z}; }

}  // namespace gerbecalc::fixtures
