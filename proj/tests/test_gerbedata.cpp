#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "fixtures.hpp"
#include "gerbecalc/gerbedata.hpp"
#include "gerbecalc/wzw.hpp"

using namespace gerbecalc;
using fields::Complex;
using fields::kPi;
using fields::Point;
using fields::Tangent;
using namespace fixtures;

namespace {

gerbe::DeligneSurfaceData trivial_data(const mesh::TriangulatedSurface& s) {
  gerbe::DeligneSurfaceData d;
  d.surface = s;
  d.chart_of_face.assign(s.num_faces(), 0);
  d.b.assign(s.num_faces(), 0.0);
  d.a.assign(s.num_edges(), 0.0);
  d.g.assign(s.num_vertices, Complex(1, 0));
  return d;
}

gerbe::DeligneGauge random_gauge(const mesh::TriangulatedSurface& s, std::mt19937_64& rng,
                                 bool with_lambda = true) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  gerbe::DeligneGauge gauge;
  for (int e = 0; e < s.num_edges(); ++e) {
    gauge.lambda.push_back(with_lambda && !s.edges[e].boundary() ? uni(rng) : 0.0);
    gauge.u.push_back(std::polar(1.0, kPi * uni(rng)));
  }
  return gauge;
}

double holonomy_exponent(const gerbe::DeligneSurfaceData& d) {
  double x = 0;
  for (double bf : d.b) x += bf;
  for (int e = 0; e < d.surface.num_edges(); ++e)
    if (!d.surface.edges[e].boundary()) x += d.a[e];
  return x;
}

}  // namespace

TEST_CASE("gauge transform: identity, inverse, invariants") {
  auto s = sphere_tetra();
  auto d = trivial_data(s);
  d.b = {0.25, -0.5, 1.0, 0.125};
  for (int e = 0; e < s.num_edges(); ++e) d.a[e] = 0.1 * (e + 1);
  d.g = {Complex(1, 0), std::polar(1.0, 0.3), std::polar(1.0, -1.2), std::polar(1.0, 2.0)};

  gerbe::DeligneGauge zero;
  zero.lambda.assign(s.num_edges(), 0.0);
  zero.u.assign(s.num_edges(), Complex(1, 0));
  auto same = gerbe::gauge_transform(d, zero);
  for (int f = 0; f < s.num_faces(); ++f) CHECK(same.b[f] == d.b[f]);
  for (int e = 0; e < s.num_edges(); ++e) CHECK(same.a[e] == d.a[e]);
  for (int v = 0; v < s.num_vertices; ++v) CHECK(same.g[v] == d.g[v]);

  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    auto gauge = random_gauge(s, rng);
    auto moved = gerbe::gauge_transform(d, gauge);

    // exact invariance of the holonomy ingredients
    Complex gv(1, 0), gv0(1, 0);
    for (auto z : moved.g) gv *= z;
    for (auto z : d.g) gv0 *= z;
    CHECK(holonomy_exponent(moved) == doctest::Approx(holonomy_exponent(d)).epsilon(1e-13));
    CHECK(std::abs(gv - gv0) < 1e-12);

    gerbe::DeligneGauge inv;
    for (int e = 0; e < s.num_edges(); ++e) {
      inv.lambda.push_back(-gauge.lambda[e]);
      inv.u.push_back(std::conj(gauge.u[e]));
    }
    auto back = gerbe::gauge_transform(moved, inv);
    for (int f = 0; f < s.num_faces(); ++f)
      CHECK(back.b[f] == doctest::Approx(d.b[f]).epsilon(1e-12));
    for (int e = 0; e < s.num_edges(); ++e)
      CHECK(back.a[e] == doctest::Approx(d.a[e]).epsilon(1e-12));
    for (int v = 0; v < s.num_vertices; ++v) CHECK(std::abs(back.g[v] - d.g[v]) < 1e-12);
  }

  // pure vertex-phase gauge: only g moves
  auto phase_only = random_gauge(s, rng, false);
  auto moved = gerbe::gauge_transform(d, phase_only);
  for (int f = 0; f < s.num_faces(); ++f) CHECK(moved.b[f] == d.b[f]);
  for (int e = 0; e < s.num_edges(); ++e) CHECK(moved.a[e] == d.a[e]);
  bool changed = false;
  for (int v = 0; v < s.num_vertices; ++v) changed = changed || std::abs(moved.g[v] - d.g[v]) > 0.1;
  CHECK(changed);

  gerbe::DeligneGauge bad;
  bad.lambda.assign(s.num_edges() - 1, 0.0);
  bad.u.assign(s.num_edges() - 1, Complex(1, 0));
  CHECK_THROWS_AS(gerbe::gauge_transform(d, bad), gerbe::GerbeError);

  auto nonunit = random_gauge(s, rng);
  nonunit.u[2] = Complex(1.5, 0);
  CHECK_THROWS_AS(gerbe::gauge_transform(d, nonunit), gerbe::GerbeError);
}

TEST_CASE("gauge transform respects boundary edges") {
  auto s = disk();
  auto d = trivial_data(s);
  std::mt19937_64 rng(5);
  auto gauge = random_gauge(s, rng);  // helper zeroes boundary lambda
  CHECK_NOTHROW(gerbe::gauge_transform(d, gauge));
  for (int e = 0; e < s.num_edges(); ++e)
    if (s.edges[e].boundary()) {
      gauge.lambda[e] = 0.3;
      CHECK_THROWS_AS(gerbe::gauge_transform(d, gauge), gerbe::GerbeError);
      gauge.lambda[e] = 0;
    }
}

TEST_CASE("cocycle validation: locality and gauge stability") {
  auto s = torus_2f();
  auto d = trivial_data(s);
  auto rep = gerbe::validate_cocycle(d);
  CHECK(rep.pass);
  CHECK(rep.max_residual <= 1e-12);
  CHECK(rep.failing_cells.empty());

  auto bad = d;
  bad.g[0] *= 1.05;  // modulus off at vertex 0 only
  auto rep2 = gerbe::validate_cocycle(bad);
  CHECK(!rep2.pass);
  REQUIRE(rep2.failing_cells.size() == 1);
  CHECK(rep2.failing_cells[0] == 0);

  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto moved = gerbe::gauge_transform(d, random_gauge(s, rng));
    CHECK(gerbe::validate_cocycle(moved).pass);
  }

  auto short_data = d;
  short_data.g.pop_back();
  auto rep3 = gerbe::validate_cocycle(short_data);
  CHECK(!rep3.pass);
  CHECK(!rep3.notes.empty());
}

TEST_CASE("trivial gerbe wants a two-form") {
  auto t = fields::TargetSpace::torus(1.0, 1.0);
  CHECK_NOTHROW(gerbe::trivial_gerbe(fields::torus_volume_form(t, 1.0)));
  CHECK_THROWS_AS(gerbe::trivial_gerbe(fields::circle_one_form(t, 1.0)), gerbe::GerbeError);
}

TEST_CASE("jandl validation on the torus") {
  auto t = fields::TargetSpace::torus(1.0, 0.5);
  auto k = fields::named_involution(t, "torus.klein");
  double p2 = t.periods()[1];

  fields::FormOracle omega;
  omega.degree = 2;
  omega.target = t;
  omega.eval = [p2](const Point& p, const std::vector<Tangent>& ts) {
    return std::sin(2 * kPi * p[1] / p2) * (ts[0][0] * ts[1][1] - ts[0][1] * ts[1][0]);
  };
  fields::FormOracle a;
  a.degree = 1;
  a.target = t;
  a.eval = [p2](const Point& p, const std::vector<Tangent>& ts) {
    return -(p2 / kPi) * std::cos(2 * kPi * p[1] / p2) * ts[0][0];
  };
  fields::PhaseFunction one{t, "one", [](const Point&) { return Complex(1, 0); }};

  auto rep = gerbe::validate_jandl({omega, a, one}, k);
  CHECK(rep.pass);
  CHECK(rep.max_residual < 1e-5);

  fields::PhaseFunction minus{t, "minus", [](const Point&) { return Complex(-1, 0); }};
  CHECK(gerbe::validate_jandl({omega, a, minus}, k).pass);

  fields::PhaseFunction eye{t, "i", [](const Point&) { return Complex(0, 1); }};
  auto bad = gerbe::validate_jandl({omega, a, eye}, k);
  CHECK(!bad.pass);
  for (auto& [name, r] : bad.parts)
    if (name == "equivariance") CHECK(r > 1.9);

  auto scaled = a;
  scaled.eval = [a](const Point& p, const std::vector<Tangent>& ts) {
    return 1.1 * a.eval(p, ts);
  };
  CHECK(!gerbe::validate_jandl({omega, scaled, one}, k).pass);

  // equivariance of the validator itself: pulled-back data, same verdict
  auto komega = fields::pullback_form(k, omega);
  auto ka = fields::pullback_form(k, a);
  auto pulled = gerbe::validate_jandl({komega, ka, one}, k);
  CHECK(pulled.pass == rep.pass);
}

TEST_CASE("jandl sign conventions pinned on the circle") {
  auto c = fields::TargetSpace::circle(1 / (2 * kPi));  // circumference 1
  auto k = fields::named_involution(c, "circle.flip");
  auto zero2 = fields::zero_form(c, 2);
  auto half = fields::circle_one_form(c, 0.5);
  fields::PhaseFunction phi{c, "e(x)",
                            [](const Point& p) { return std::polar(1.0, 2 * kPi * p[0]); }};
  auto rep = gerbe::validate_jandl({zero2, half, phi}, k);
  CHECK(rep.pass);

  fields::PhaseFunction wrong{c, "e(-x)",
                              [](const Point& p) { return std::polar(1.0, -2 * kPi * p[0]); }};
  auto bad = gerbe::validate_jandl({zero2, half, wrong}, k);
  CHECK(!bad.pass);
  for (auto& [name, r] : bad.parts)
    if (name == "isomorphism") CHECK(r > 0.1);

  auto t = fields::TargetSpace::torus(1.0, 1.0);
  CHECK_THROWS_AS(gerbe::validate_jandl({zero2, half, phi}, fields::named_involution(t, "torus.klein")),
                  gerbe::GerbeError);
}

TEST_CASE("world volumes: membership and sampling") {
  auto su2 = fields::TargetSpace::su2();
  auto whole = gerbe::whole_world_volume(su2);
  fields::Halton h(4);
  CHECK(whole.contains(fields::sample_point(su2, h)));

  auto cls = gerbe::class_world_volume(kPi / 3);
  for (int i = 0; i < 30; ++i) {
    auto p = cls.sample(h);
    CHECK(cls.contains(p));
    CHECK(std::abs(p[0] - 0.5) < 1e-12);
  }
  CHECK(!cls.contains({1, 0, 0, 0}));
  CHECK_THROWS_AS(gerbe::class_world_volume(4.0), gerbe::GerbeError);

  auto circ = fields::TargetSpace::circle(2.0);
  auto pt = gerbe::point_world_volume(circ, {1.0});
  CHECK(pt.contains({1.0}));
  CHECK(pt.contains({1.0 + 4 * kPi}));  // same point round the circle
  CHECK(!pt.contains({2.0}));
  CHECK(pt.sample(h)[0] == doctest::Approx(1.0).epsilon(1e-12));

  gerbe::WorldVolume empty;
  empty.target = circ;
  empty.kind = gerbe::WorldVolume::Kind::Point;
  CHECK_THROWS_AS(empty.sample(h), gerbe::GerbeError);

  auto bi = gerbe::biclass_world_volume(1.2);
  for (int i = 0; i < 30; ++i) {
    auto p = bi.sample(h);
    CHECK(bi.contains(p));
  }
  auto diag = gerbe::shifted_diagonal_world_volume(circ, 0.7);
  for (int i = 0; i < 10; ++i) {
    auto p = diag.sample(h);
    CHECK(diag.contains(p));
    CHECK(std::abs(fields::principal(p[0] - p[1] - 0.7, 4 * kPi)) < 1e-12);
  }
  CHECK(!diag.contains({0.0, 0.1}));
  CHECK_THROWS_AS(gerbe::shifted_diagonal_world_volume(su2, 0.0), gerbe::GerbeError);
}

TEST_CASE("d-brane validation against the level-k curvature") {
  auto su2 = fields::TargetSpace::su2();
  auto zero3 = fields::zero_form(su2, 3);
  auto zero2 = fields::zero_form(su2, 2);
  gerbe::GerbeModule triv{1, fields::u1_connection(fields::zero_form(su2, 1))};

  gerbe::DBraneRecord flat{gerbe::whole_world_volume(su2), zero2, triv};
  CHECK(gerbe::validate_dbrane(zero3, flat).pass);

  for (int k : {1, 2}) {
    auto H = wzw::canonical_three_form(k);
    for (double theta : wzw::brane_angles(k)) {
      gerbe::DBraneRecord brane{gerbe::class_world_volume(theta), wzw::ambient_primitive(k), triv};
      auto rep = gerbe::validate_dbrane(H, brane);
      CHECK(rep.pass);
      CHECK(rep.max_residual < 1e-4);

      gerbe::DBraneRecord wrong{gerbe::class_world_volume(theta),
                                fields::scaled_form(wzw::ambient_primitive(k), 2.0), triv};
      CHECK(!gerbe::validate_dbrane(H, wrong).pass);
    }
  }

  auto circ = fields::TargetSpace::circle(1.0);
  gerbe::DBraneRecord d0{gerbe::point_world_volume(circ, {0.5}), fields::zero_form(circ, 2),
                         gerbe::GerbeModule{1, fields::u1_connection(fields::zero_form(circ, 1))}};
  CHECK(gerbe::validate_dbrane(fields::zero_form(circ, 3), d0).pass);

  CHECK_THROWS_AS(gerbe::validate_dbrane(fields::zero_form(circ, 3), flat), gerbe::GerbeError);
  CHECK_THROWS_AS(gerbe::validate_dbrane(zero2, flat), gerbe::GerbeError);
}

TEST_CASE("bi-brane validation against the level-k curvature step") {
  auto su2 = fields::TargetSpace::su2();
  gerbe::GerbeModule triv{1, fields::u1_connection(fields::zero_form(su2, 1))};

  auto circ = fields::TargetSpace::circle(1.0);
  gerbe::BiBraneRecord flat{
      gerbe::shifted_diagonal_world_volume(circ, 0.3),
      fields::zero_form(fields::TargetSpace::product(circ, circ), 2),
      gerbe::GerbeModule{1, fields::u1_connection(fields::zero_form(circ, 1))}};
  CHECK(gerbe::validate_bibrane(fields::zero_form(circ, 3), fields::zero_form(circ, 3), flat).pass);

  for (int k : {1, 2}) {
    auto H = wzw::canonical_three_form(k);
    double theta = wzw::brane_angles(k)[0];
    gerbe::BiBraneRecord bib{gerbe::biclass_world_volume(theta), wzw::varpi_theta(theta, k), triv};
    auto rep = gerbe::validate_bibrane(H, H, bib);
    CHECK(rep.pass);
    CHECK(rep.max_residual < 1e-4);

    // omitting the cross term leaves mu*H instead of p1*H - p2*H
    auto amb = wzw::ambient_primitive(k);
    fields::FormOracle bare;
    bare.degree = 2;
    bare.target = bib.varpi.target;
    bare.eval = [amb](const Point& q, const std::vector<Tangent>& us) {
      fields::Quat g1{q[0], q[1], q[2], q[3]}, g2{q[4], q[5], q[6], q[7]};
      fields::Quat mm = g1 * g2.conj();
      auto push = [&](const Tangent& u) {
        fields::Quat u1{u[0], u[1], u[2], u[3]}, u2{u[4], u[5], u[6], u[7]};
        fields::Quat r = u1 * g2.conj() - mm * u2 * g2.conj();
        return Tangent{r.w, r.x, r.y, r.z};
      };
      return amb.eval({mm.w, mm.x, mm.y, mm.z}, {push(us[0]), push(us[1])});
    };
    gerbe::BiBraneRecord nocross{gerbe::biclass_world_volume(theta), bare, triv};
    auto bad = gerbe::validate_bibrane(H, H, nocross);
    CHECK(!bad.pass);
    CHECK(bad.max_residual > 1e-2);
  }

  auto H1 = wzw::canonical_three_form(1);
  gerbe::BiBraneRecord bib{gerbe::biclass_world_volume(0.9), wzw::varpi_theta(0.9, 1), triv};
  CHECK_THROWS_AS(gerbe::validate_bibrane(H1, fields::zero_form(circ, 3), bib), gerbe::GerbeError);
}
