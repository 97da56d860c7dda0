#include <doctest.h>

#include <cmath>
#include <complex>
#include <functional>

#include "fixtures.hpp"
#include "gerbecalc/fields.hpp"

using namespace gerbecalc;
using namespace gerbecalc::fields;
using namespace fixtures;

namespace {

// map a grid torus into a circle/torus target from an explicit lift function
// on unwrapped grid corners (i, j in 0..n); windings are recovered from the
// true lifted displacements
SurfaceMap grid_map(const mesh::TriangulatedSurface& s, int n, const TargetSpace& t,
                    const std::function<std::vector<double>(int, int)>& lift) {
  auto periods = t.periods();
  int wr = t.winding_rank();
  std::vector<Point> images(s.num_vertices);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) images[n * i + j] = reduce_point(t, lift(i, j));

  std::vector<std::vector<int>> windings(s.num_edges(), std::vector<int>(wr, 0));
  std::vector<bool> seen(s.num_edges(), false);
  auto corner_of = [&](int f, int l) -> std::array<int, 2> {
    int sq = f / 2, i = sq / n, j = sq % n;
    bool lower = f % 2 == 0;
    std::array<std::array<int, 2>, 3> c =
        lower ? std::array<std::array<int, 2>, 3>{{{i, j}, {i + 1, j}, {i + 1, j + 1}}}
              : std::array<std::array<int, 2>, 3>{{{i, j}, {i + 1, j + 1}, {i, j + 1}}};
    return c[l];
  };
  for (int f = 0; f < s.num_faces(); ++f) {
    for (int l = 0; l < 3; ++l) {
      int e = s.face_edge[f][l];
      int dir = s.face_edge_dir[f][l];
      auto tc = corner_of(f, l), hc = corner_of(f, (l + 1) % 3);
      auto lt = lift(tc[0], tc[1]), lh = lift(hc[0], hc[1]);
      const auto& ed = s.edges[e];
      for (int k = 0; k < wr; ++k) {
        double dtrue = dir * (lh[k] - lt[k]);  // along the canonical direction
        double pr = principal(images[ed.head][k] - images[ed.tail][k], periods[k]);
        int w = static_cast<int>(std::llround((dtrue - pr) / periods[k]));
        if (seen[e]) {
          REQUIRE(windings[e][k] == w);  // both adjacent faces must agree
        }
        windings[e][k] = w;
      }
      seen[e] = true;
    }
  }
  return make_surface_map(s, t, std::move(images), std::move(windings));
}

Point qpoint(const Quat& q) { return {q.w, q.x, q.y, q.z}; }

// tetrahedron on the equator two-sphere of unit quaternions
std::array<Quat, 4> tetra_dirs() {
  double s = 1.0 / std::sqrt(3.0);
  return {Quat{0, s, s, s}, Quat{0, s, -s, -s}, Quat{0, -s, s, -s}, Quat{0, -s, -s, s}};
}

// round sphere mapped onto the equator of su2 (built one level down from the
// tetrahedron, whose faces would span more than pi/2)
SurfaceMap sphere_equator_map() {
  auto s0 = sphere_tetra();
  auto s1 = mesh::subdivide(s0);
  auto q = tetra_dirs();
  const int V = s0.num_vertices, E = s0.num_edges();
  std::vector<Point> images(s1.num_vertices);
  for (int v = 0; v < V; ++v) images[v] = qpoint(q[v]);
  for (int e = 0; e < E; ++e) {
    const auto& ed = s0.edges[e];
    images[V + e] = qpoint((q[ed.tail] + q[ed.head]).normalized());
  }
  for (int f = 0; f < s0.num_faces(); ++f) {
    const auto& fv = s0.faces[f];
    images[V + E + f] = qpoint((q[fv[0]] + q[fv[1]] + q[fv[2]]).normalized());
  }
  return make_surface_map(s1, TargetSpace::su2(), std::move(images), {});
}

// normalized area form of the equator sphere, written ambiently
FormOracle equator_area_form() {
  FormOracle f;
  f.degree = 2;
  f.target = TargetSpace::su2();
  f.name = "eq.area";
  f.eval = [](const Point& p, const std::vector<Tangent>& ts) {
    double cx = ts[0][2] * ts[1][3] - ts[0][3] * ts[1][2];
    double cy = ts[0][3] * ts[1][1] - ts[0][1] * ts[1][3];
    double cz = ts[0][1] * ts[1][2] - ts[0][2] * ts[1][1];
    return (p[1] * cx + p[2] * cy + p[3] * cz) / (4 * kPi);
  };
  return f;
}

double cdist(double a, double b, double period) { return std::abs(principal(a - b, period)); }

}  // namespace

TEST_CASE("principal values and quaternion exp/log") {
  CHECK(principal(3.6, 2.0) == doctest::Approx(-0.4).epsilon(1e-14));
  CHECK(principal(-1.0, 2.0) == doctest::Approx(1.0).epsilon(1e-14));  // half-period lands positive
  CHECK(principal(0.3, 2.0) == doctest::Approx(0.3).epsilon(1e-14));

  Quat u{0, 0.3, -0.2, 0.5};
  Quat g = qexp(u);
  CHECK(g.norm() == doctest::Approx(1.0).epsilon(1e-14));
  Quat l = qlog(g);
  CHECK(l.x == doctest::Approx(u.x).epsilon(1e-12));
  CHECK(l.y == doctest::Approx(u.y).epsilon(1e-12));
  CHECK(l.z == doctest::Approx(u.z).epsilon(1e-12));
  CHECK_THROWS_AS(qlog(Quat{-1, 0, 0, 0}), FieldError);
}

TEST_CASE("target space layout") {
  auto t = TargetSpace::product(TargetSpace::circle(2.0), TargetSpace::su2());
  CHECK(t.point_dim() == 5);
  CHECK(t.chart_dim() == 4);
  CHECK(t.winding_rank() == 1);
  CHECK(t.periods() == std::vector<double>{4 * kPi});
  CHECK(t.winding_coords() == std::vector<int>{0});

  auto tt = TargetSpace::torus(1.0, 0.5);
  CHECK(tt.periods().size() == 2);
  CHECK(tt.periods()[1] == doctest::Approx(kPi).epsilon(1e-15));
  CHECK(tt.same_as(TargetSpace::torus(1.0, 0.5)));
  CHECK_FALSE(tt.same_as(TargetSpace::torus(1.0, 0.6)));

  Point p = reduce_point(t, {4 * kPi + 1.0, 1, 0, 0, 0});
  CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(reduce_point(t, {0, 2, 0, 0, 0}), FieldError);  // non-unit quaternion
}

TEST_CASE("charts round-trip") {
  auto t = TargetSpace::product(TargetSpace::circle(2.0), TargetSpace::su2());
  Halton h(4);
  for (int it = 0; it < 10; ++it) {
    Point c = sample_point(t, h);
    std::vector<double> u = {0.3, -0.2, 0.1, 0.25};
    Point p = chart_point(t, c, u);
    auto back = chart_coords(t, c, p);
    for (int i = 0; i < 4; ++i) CHECK(back[i] == doctest::Approx(u[i]).epsilon(1e-12));
  }
  // tangent_to_chart inverts chart_tangent
  Point c = sample_point(t, h);
  std::vector<double> at = {0.1, 0.05, -0.1, 0.2};
  std::vector<double> dc = {0.7, -0.3, 0.4, 0.1};
  Tangent v = chart_tangent(t, c, at, dc);
  auto back = tangent_to_chart(t, c, at, v);
  for (int i = 0; i < 4; ++i) CHECK(back[i] == doctest::Approx(dc[i]).epsilon(1e-6));
}

TEST_CASE("exterior derivative on a torus matches the closed form") {
  auto t = TargetSpace::torus(1.0, 1.0);
  FormOracle alpha;
  alpha.degree = 1;
  alpha.target = t;
  alpha.name = "sin(x)dy";
  alpha.eval = [](const Point& p, const std::vector<Tangent>& ts) {
    return std::sin(p[0]) * ts[0][1];
  };
  Halton h(2);
  for (int it = 0; it < 20; ++it) {
    Point p = sample_point(t, h);
    Tangent u = sample_tangent(t, p, h), v = sample_tangent(t, p, h);
    double got = exterior_derivative_fd(alpha, p, {u, v});
    double want = std::cos(p[0]) * (u[0] * v[1] - u[1] * v[0]);
    CHECK(got == doctest::Approx(want).epsilon(1e-6).scale(1.0));
  }
  // antisymmetry of the fd derivative
  Point p = sample_point(t, h);
  Tangent u = sample_tangent(t, p, h), v = sample_tangent(t, p, h);
  CHECK(exterior_derivative_fd(alpha, p, {u, v}) ==
        doctest::Approx(-exterior_derivative_fd(alpha, p, {v, u})).epsilon(1e-9).scale(1.0));
  // d^2 = 0
  FormOracle dalpha = d_form(alpha);
  Tangent w = sample_tangent(t, p, h);
  CHECK(std::abs(exterior_derivative_fd(dalpha, p, {u, v, w})) < 1e-3);
}

TEST_CASE("exterior derivative on su2: Maurer-Cartan relation") {
  auto t = TargetSpace::su2();
  FormOracle beta;
  beta.degree = 1;
  beta.target = t;
  beta.name = "theta1";
  beta.eval = [](const Point& p, const std::vector<Tangent>& ts) {
    Quat g{p[0], p[1], p[2], p[3]}, u{ts[0][0], ts[0][1], ts[0][2], ts[0][3]};
    return (g.conj() * u).x;  // i-component of g^-1 u
  };
  Halton h(4);
  for (int it = 0; it < 10; ++it) {
    Point p = sample_point(t, h);
    Quat g{p[0], p[1], p[2], p[3]};
    // d(theta^1)(U,V) = -[theta U, theta V]^1
    Tangent u = qpoint(g * Quat{0, 0, 1, 0});
    Tangent v = qpoint(g * Quat{0, 0, 0, 1});
    double got = exterior_derivative_fd(beta, p, {u, v});
    CHECK(got == doctest::Approx(-2.0).epsilon(2e-4));
    // chart independence: recompute in a chart centered elsewhere
    Point c = chart_point(t, p, {0.2, -0.1, 0.15});
    double got2 = exterior_derivative_fd(beta, p, {u, v}, c);
    CHECK(got2 == doctest::Approx(got).epsilon(1e-5));
  }
}

TEST_CASE("torus maps integrate to their degree") {
  auto t = TargetSpace::torus(1.0, 2.0);
  auto P = t.periods();
  int n = 3;
  auto s = grid_torus(n);
  auto ident = grid_map(s, n, t, [&](int i, int j) {
    return std::vector<double>{i * P[0] / n, j * P[1] / n};
  });
  FormOracle vol = torus_volume_form(t, 1.0 / (P[0] * P[1]));
  double I1 = pullback_integrate(vol, ident);
  CHECK(std::abs(I1) == doctest::Approx(1.0).epsilon(1e-12));

  auto deg2 = grid_map(s, n, t, [&](int i, int j) {
    return std::vector<double>{2.0 * i * P[0] / n, j * P[1] / n};
  });
  double I2 = pullback_integrate(vol, deg2);
  CHECK(std::abs(I2) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(I2 / I1 == doctest::Approx(2.0).epsilon(1e-12));  // same orientation

  // nontrivial windings appear for the degree-2 lift
  bool any = false;
  for (const auto& w : deg2.edge_windings) any = any || w[0] != 0;
  CHECK(any);
  // and the integral survives subdivision exactly (affine pieces)
  double I2s = pullback_integrate(vol, subdivide_map(deg2));
  CHECK(I2s == doctest::Approx(I2).epsilon(1e-12));
}

TEST_CASE("lifted interpolation respects windings") {
  auto t = TargetSpace::circle(1.0);
  double P = t.periods()[0];
  int n = 3;
  auto s = grid_torus(n);
  auto m = grid_map(s, n, t, [&](int i, int) {
    return std::vector<double>{2.0 * i * P / n};
  });
  // face 0 = lower triangle of square (0,0): corners lift to 0, 2P/3, 2P/3
  std::array<double, 3> mid01{0.5, 0.5, 0.0};
  Point q = interpolate(m, 0, mid01);
  CHECK(cdist(q[0], P / 3, P) < 1e-12);  // the long way around would give -P/3
  // closure rejects a tampered lift
  auto wind = m.edge_windings;
  wind[0][0] += 1;
  CHECK_THROWS_WITH_AS(
      (void)make_surface_map(s, t, m.vertex_images, wind),
      doctest::Contains("edge lifts inconsistent"), FieldError);
}

TEST_CASE("seams agree at edge midpoints") {
  auto check_seams = [](const SurfaceMap& m) {
    auto periods = m.target.periods();
    auto coords = m.target.winding_coords();
    for (int e = 0; e < m.surface.num_edges(); ++e) {
      const auto& ed = m.surface.edges[e];
      if (ed.boundary()) continue;
      Point val[2];
      for (int k = 0; k < 2; ++k) {
        std::array<double, 3> b{0, 0, 0};
        b[ed.sides[k].local] = 0.5;
        b[(ed.sides[k].local + 1) % 3] = 0.5;
        val[k] = interpolate(m, ed.sides[k].face, b);
      }
      for (size_t i = 0; i < val[0].size(); ++i) {
        double d = val[0][i] - val[1][i];
        for (size_t k = 0; k < coords.size(); ++k)
          if (coords[k] == static_cast<int>(i)) d = principal(d, periods[k]);
        CHECK(std::abs(d) < 1e-9);
      }
    }
  };
  check_seams(sphere_equator_map());
  auto t = TargetSpace::torus(1.0, 1.0);
  auto P = t.periods();
  check_seams(grid_map(grid_torus(3), 3, t, [&](int i, int j) {
    return std::vector<double>{2.0 * i * P[0] / 3, j * P[1] / 3};
  }));
}

TEST_CASE("sphere area converges at fourth order under subdivision") {
  auto m1 = sphere_equator_map();
  FormOracle area = equator_area_form();
  double I1 = pullback_integrate(area, m1);
  double e1 = std::abs(std::abs(I1) - 1.0);
  CHECK(e1 < 0.02);

  auto m2 = subdivide_map(m1);
  double I2 = pullback_integrate(area, m2);
  double e2 = std::abs(std::abs(I2) - 1.0);
  CHECK(I2 * I1 > 0);  // orientation preserved
  CHECK(e2 < e1 / 4 + 1e-12);

  auto m3 = subdivide_map(m2);
  double e3 = std::abs(std::abs(pullback_integrate(area, m3)) - 1.0);
  CHECK(e3 < e2 / 4 + 1e-12);
}

TEST_CASE("su2 spread guard rejects the coarse tetrahedron") {
  auto s0 = sphere_tetra();
  auto q = tetra_dirs();
  std::vector<Point> images;
  for (int v = 0; v < 4; ++v) images.push_back(qpoint(q[v]));
  CHECK_THROWS_WITH_AS((void)make_surface_map(s0, TargetSpace::su2(), images, {}),
                       doctest::Contains("spans more than pi/2"), FieldError);
}

TEST_CASE("defect cut splits a map consistently") {
  auto t = TargetSpace::torus(1.0, 1.0);
  auto P = t.periods();
  int n = 4;
  auto s = grid_torus(n, {0, 2});
  auto m = grid_map(s, n, t, [&](int i, int j) {
    return std::vector<double>{2.0 * i * P[0] / n, j * P[1] / n};
  });
  FormOracle vol = torus_volume_form(t, 1.0 / (P[0] * P[1]));
  double total = pullback_integrate(vol, m);

  auto cut = mesh::cut_along_defects(s);
  auto parts = split_map(m, cut);
  REQUIRE(parts.size() == 2);
  double sum = 0;
  for (size_t p = 0; p < parts.size(); ++p) {
    // piece orientation is seeded from its first face; align with the parent
    int f0 = cut.face_map[p][0];
    sum += s.orient_sign[f0] * pullback_integrate(vol, parts[p]);
  }
  CHECK(sum == doctest::Approx(total).epsilon(1e-12));
}

TEST_CASE("line holonomy of circle one-forms") {
  auto t = TargetSpace::circle(1.5);
  double P = t.periods()[0];
  int n = 3;
  auto s = grid_torus(n);
  auto deg1 = grid_map(s, n, t, [&](int i, int) {
    return std::vector<double>{i * P / n};
  });
  // the i-direction row of the grid is a circle winding once
  mesh::Circle row;
  for (int i = 0; i < n; ++i) {
    mesh::Side side{2 * (n * i + 0), 0};
    row.edges.push_back(s.edge_of(side));
    row.dirs.push_back(s.side_dir(side));
  }
  LoopPath loop = loop_of_circle(deg1, row);

  // oint of dx/P is the winding number
  Complex h1 = line_holonomy_u1(circle_one_form(t, 1.0 / P), loop);
  CHECK(std::abs(h1 - Complex(1, 0)) < 1e-12);
  Complex hhalf = line_holonomy_u1(circle_one_form(t, 0.5 / P), loop);
  CHECK(std::abs(hhalf - Complex(-1, 0)) < 1e-12);

  // reversal conjugates
  Complex a = line_holonomy_u1(circle_one_form(t, 0.3 / P), loop);
  Complex b = line_holonomy_u1(circle_one_form(t, 0.3 / P), reverse_loop(loop));
  CHECK(std::abs(a - std::conj(b)) < 1e-12);

  // basepoint rotation is exact
  LoopPath rot = loop;
  std::rotate(rot.points.begin(), rot.points.begin() + 1, rot.points.end());
  std::rotate(rot.windings.begin(), rot.windings.begin() + 1, rot.windings.end());
  Complex c = line_holonomy_u1(circle_one_form(t, 0.3 / P), rot);
  CHECK(a.real() == c.real());
  CHECK(a.imag() == c.imag());
}

TEST_CASE("product loops multiply holonomies") {
  auto t = TargetSpace::circle(1.0);
  double P = t.periods()[0];
  int n = 3;
  auto s = grid_torus(n);
  auto m = grid_map(s, n, t, [&](int i, int) {
    return std::vector<double>{i * P / n};
  });
  mesh::Circle row;
  for (int i = 0; i < n; ++i) {
    mesh::Side side{2 * (n * i + 0), 0};
    row.edges.push_back(s.edge_of(side));
    row.dirs.push_back(s.side_dir(side));
  }
  LoopPath loop = loop_of_circle(m, row);
  LoopPath pair = product_loop(loop, reverse_loop(loop));

  auto tp = pair.target;
  FormOracle mix;
  mix.degree = 1;
  mix.target = tp;
  mix.name = "a1-a2";
  mix.eval = [P](const Point&, const std::vector<Tangent>& ts) {
    return 0.3 / P * ts[0][0] - 0.1 / P * ts[0][1];
  };
  Complex got = line_holonomy_u1(mix, pair);
  Complex want = std::exp(Complex(0, 2 * kPi * (0.3 + 0.1)));
  CHECK(std::abs(got - want) < 1e-10);
}

TEST_CASE("higher-rank holonomy on a flat diagonal module") {
  auto t = TargetSpace::circle(1.0);
  double P = t.periods()[0];
  LoopPath loop;
  loop.target = t;
  loop.points = {{0.0}, {P / 3}, {2 * P / 3}};
  loop.windings = {{0}, {0}, {0}};

  auto conn = flat_diagonal_connection(
      t, {circle_one_form(t, 0.3 / P), circle_one_form(t, 0.7 / P)});
  CMat u = line_holonomy(conn, loop);
  CHECK(std::abs(u.at(0, 0) - std::exp(Complex(0, 2 * kPi * 0.3))) < 1e-7);
  CHECK(std::abs(u.at(1, 1) - std::exp(Complex(0, 2 * kPi * 0.7))) < 1e-7);
  CHECK(std::abs(u.at(0, 1)) < 1e-9);

  // trace is basepoint independent
  LoopPath rot = loop;
  std::rotate(rot.points.begin(), rot.points.begin() + 1, rot.points.end());
  std::rotate(rot.windings.begin(), rot.windings.begin() + 1, rot.windings.end());
  CHECK(std::abs(line_holonomy(conn, rot).trace() - u.trace()) < 1e-7);

  // rank 1 path reproduces the quadrature engine
  auto c1 = u1_connection(circle_one_form(t, 0.3 / P));
  CHECK(std::abs(line_holonomy(c1, loop).at(0, 0) -
                 line_holonomy_u1(circle_one_form(t, 0.3 / P), loop)) < 1e-12);
}

TEST_CASE("named involutions square to the identity and pull forms back") {
  Halton h(4);
  auto check_invol = [&](const TargetSpace& t, const std::string& name) {
    auto k = named_involution(t, name);
    for (int it = 0; it < 5; ++it) {
      Point p = sample_point(t, h);
      Point pp = reduce_point(t, k.apply(reduce_point(t, k.apply(p))));
      auto periods = t.periods();
      auto coords = t.winding_coords();
      for (size_t i = 0; i < p.size(); ++i) {
        double d = pp[i] - p[i];
        for (size_t j = 0; j < coords.size(); ++j)
          if (coords[j] == static_cast<int>(i)) d = principal(d, periods[j]);
        CHECK(std::abs(d) < 1e-12);
      }
    }
  };
  check_invol(TargetSpace::circle(2.0), "circle.flip");
  check_invol(TargetSpace::torus(1.0, 1.0), "torus.klein");
  check_invol(TargetSpace::su2(), "su2.inverse");
  check_invol(TargetSpace::su2(), "su2.minus-inverse");
  CHECK_THROWS_AS(named_involution(TargetSpace::su2(), "circle.flip"), FieldError);

  // the klein involution reverses the torus volume form
  auto t = TargetSpace::torus(1.0, 1.0);
  auto k = named_involution(t, "torus.klein");
  FormOracle vol = torus_volume_form(t, 1.0);
  FormOracle pulled = pullback_form(k, vol);
  for (int it = 0; it < 5; ++it) {
    Point p = sample_point(t, h);
    Tangent u = sample_tangent(t, p, h), v = sample_tangent(t, p, h);
    CHECK(pulled(p, {u, v}) == doctest::Approx(-vol(p, {u, v})).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("phase function log-derivative") {
  auto t = TargetSpace::circle(2.0);
  PhaseFunction phi;
  phi.target = t;
  phi.name = "e^{3ix/R}";
  phi.eval = [](const Point& p) { return std::exp(Complex(0, 1.5 * p[0])); };  // m=3, R=2
  Halton h(1);
  for (int it = 0; it < 10; ++it) {
    Point p = sample_point(t, h);
    Tangent v = sample_tangent(t, p, h);
    CHECK(dlog_im(phi, p, v) == doctest::Approx(1.5 * v[0]).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("halton sampling is deterministic and on-manifold") {
  Halton h1(2), h2(2);
  auto a = h1.next(), b = h2.next();
  CHECK(a == b);
  CHECK(a[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(a[1] == doctest::Approx(1.0 / 3).epsilon(1e-15));

  auto t = TargetSpace::product(TargetSpace::su2(), TargetSpace::circle(1.0));
  Halton h(4);
  for (int it = 0; it < 20; ++it) {
    Point p = sample_point(t, h);
    double qn = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2] + p[3] * p[3]);
    CHECK(qn == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p[4] >= 0.0);
    CHECK(p[4] < 2 * kPi + 1e-12);
    Tangent v = sample_tangent(t, p, h);
    double vn = 0, pv = 0;
    for (size_t i = 0; i < 4; ++i) pv += p[i] * v[i];
    for (double x : v) vn += x * x;
    CHECK(std::sqrt(vn) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(pv) < 1e-9);
  }
}
