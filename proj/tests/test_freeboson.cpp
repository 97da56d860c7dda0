#include <doctest.h>

#include <random>

#include "gerbecalc/freeboson.hpp"

using namespace gerbecalc;
using freeboson::D0Brane;
using freeboson::D1Brane;
using freeboson::Frac;
using freeboson::FreeBosonBiBrane;
using freeboson::FreeBosonError;

TEST_CASE("fractions: construction, parsing, reduction") {
  CHECK(Frac::of(3, 12) == Frac::of(1, 4));
  CHECK(Frac::of(5, 4) == Frac::of(1, 4));    // wrapped into [0, 1)
  CHECK(Frac::of(-1, 3) == Frac::of(2, 3));   // negatives wrap too
  CHECK(Frac::of(4, -8) == Frac::of(1, 2));   // sign carried by the denominator
  CHECK(Frac::of(7, 7) == Frac{});
  CHECK(Frac::parse("3/8") == Frac::of(3, 8));
  CHECK(Frac::parse("-1/3") == Frac::of(2, 3));
  CHECK(Frac::parse("0.375") == Frac::of(3, 8));
  CHECK(Frac::parse("1.25") == Frac::of(1, 4));
  CHECK(Frac::parse("2") == Frac{});
  CHECK(Frac::of(1, 3).value() == doctest::Approx(1.0 / 3).epsilon(1e-15));

  CHECK_THROWS_AS(Frac::of(1, 0), FreeBosonError);
  CHECK_THROWS_AS(Frac::parse("a/b"), FreeBosonError);
  CHECK_THROWS_AS(Frac::parse("1/2/3"), FreeBosonError);
  CHECK_THROWS_AS(Frac::parse(""), FreeBosonError);
  CHECK_THROWS_AS(Frac::parse("1.2.3"), FreeBosonError);

  // exact arithmetic refuses to wrap around on overflow
  auto huge = Frac::of(1, (1LL << 60) - 1);
  auto huge2 = Frac::of(1, 1LL << 60);
  CHECK_THROWS_AS(huge + huge2, FreeBosonError);
}

TEST_CASE("fractions: group structure") {
  CHECK(Frac::of(1, 4) + Frac::of(1, 2) == Frac::of(3, 4));
  CHECK(Frac::of(2, 3) + Frac::of(2, 3) == Frac::of(1, 3));
  CHECK(-Frac::of(1, 4) == Frac::of(3, 4));
  CHECK(-Frac{} == Frac{});
  CHECK(Frac::of(5, 8) + (-Frac::of(5, 8)) == Frac{});
  CHECK(Frac::of(5, 8) - Frac::of(1, 8) == Frac::of(1, 2));
}

TEST_CASE("defect fusion acts on D0-branes by translation") {
  double R = 1.0;
  D0Brane d{R, Frac::of(1, 2)};

  FreeBosonBiBrane identity{R, Frac{}, Frac::of(2, 7)};
  CHECK(freeboson::fuse_defect_d0(identity, d).x == d.x);

  FreeBosonBiBrane quarter{R, Frac::of(1, 4), Frac{}};
  auto moved = freeboson::fuse_defect_d0(quarter, d);
  CHECK(moved.x == Frac::of(3, 4));
  CHECK(moved.position() == doctest::Approx(0.75 * 2 * fields::kPi).epsilon(1e-15));

  FreeBosonBiBrane back{R, -quarter.x, Frac::of(1, 3)};
  CHECK(freeboson::fuse_defect_d0(back, moved).x == d.x);

  // the Wilson coordinate never touches positions
  FreeBosonBiBrane wilsoned{R, Frac::of(1, 4), Frac::of(5, 9)};
  CHECK(freeboson::fuse_defect_d0(wilsoned, d).x == moved.x);

  D0Brane other{2.0, Frac::of(1, 2)};
  CHECK_THROWS_WITH_AS(freeboson::fuse_defect_d0(quarter, other),
                       doctest::Contains("radius mismatch"), FreeBosonError);
}

TEST_CASE("defect fusion acts on D1-branes by Wilson translation") {
  double R = 0.7;
  D1Brane d{R, Frac::of(1, 2)};

  FreeBosonBiBrane identity{R, Frac::of(3, 5), Frac{}};
  CHECK(freeboson::fuse_defect_d1(identity, d).alpha == d.alpha);

  FreeBosonBiBrane half{R, Frac{}, Frac::of(1, 2)};
  CHECK(freeboson::fuse_defect_d1(half, d).alpha == Frac{});  // order-2 element

  FreeBosonBiBrane b{R, Frac::of(9, 11), Frac::of(2, 5)};
  auto out = freeboson::fuse_defect_d1(b, d);
  CHECK(out.alpha == Frac::of(9, 10));
  CHECK(out.wilson() == doctest::Approx(0.9 / (2 * fields::kPi * R)).epsilon(1e-15));

  // position coordinate is ignored
  FreeBosonBiBrane b2{R, Frac::of(1, 13), Frac::of(2, 5)};
  CHECK(freeboson::fuse_defect_d1(b2, d).alpha == out.alpha);

  D1Brane other{R + 0.1, d.alpha};
  CHECK_THROWS_AS(freeboson::fuse_defect_d1(b, other), FreeBosonError);
}

TEST_CASE("bi-brane fusion is an abelian group") {
  double R = 1.3;
  auto bb = [R](long long xn, long long xd, long long an, long long ad) {
    return FreeBosonBiBrane{R, Frac::of(xn, xd), Frac::of(an, ad)};
  };
  auto eq = [](const FreeBosonBiBrane& a, const FreeBosonBiBrane& b) {
    return a.x == b.x && a.alpha == b.alpha;
  };

  auto e = bb(0, 1, 0, 1);
  auto p = bb(3, 8, 2, 5);
  CHECK(eq(freeboson::fuse_defects(e, p), p));
  CHECK(eq(freeboson::fuse_defects(p, e), p));
  CHECK(eq(freeboson::fuse_defects(p, FreeBosonBiBrane{R, -p.x, -p.alpha}), e));

  std::mt19937 rng(2024u);
  std::uniform_int_distribution<long long> num(-30, 30), den(1, 30);
  for (int i = 0; i < 100; ++i) {
    auto a = bb(num(rng), den(rng), num(rng), den(rng));
    auto b = bb(num(rng), den(rng), num(rng), den(rng));
    auto c = bb(num(rng), den(rng), num(rng), den(rng));
    CHECK(eq(freeboson::fuse_defects(a, b), freeboson::fuse_defects(b, a)));
    CHECK(eq(freeboson::fuse_defects(freeboson::fuse_defects(a, b), c),
             freeboson::fuse_defects(a, freeboson::fuse_defects(b, c))));
  }

  CHECK_THROWS_AS(freeboson::fuse_defects(p, FreeBosonBiBrane{R + 1, p.x, p.alpha}),
                  FreeBosonError);
}

TEST_CASE("correspondence projections reproduce the closed-form laws") {
  double R = 0.8;
  FreeBosonBiBrane b{R, Frac::of(2, 7), Frac::of(1, 3)};
  FreeBosonBiBrane b2{R, Frac::of(5, 9), Frac::of(3, 4)};
  D0Brane d{R, Frac::of(4, 5)};
  CHECK(freeboson::d0_fusion_residual(b, d) < 1e-10);
  CHECK(freeboson::d0_fusion_residual(b2, d) < 1e-10);
  CHECK(freeboson::defect_fusion_residual(b, b2, 16) < 1e-10);
}

TEST_CASE("gerbe-side records live where they should") {
  double R = 1.1;
  D0Brane d0{R, Frac::of(1, 3)};
  auto rec0 = freeboson::brane_record(d0);
  CHECK(rec0.world_volume.contains({d0.position()}));
  CHECK(!rec0.world_volume.contains({d0.position() + 0.5}));

  D1Brane d1{R, Frac::of(1, 4)};
  auto rec1 = freeboson::brane_record(d1);
  CHECK(rec1.world_volume.contains({2.2}));
  // Wilson line integral over one circumference is exactly the stored fraction
  fields::LoopPath loop;  // one turn: the short closing hop keeps every
  loop.target = fields::TargetSpace::circle(R);  // segment principal
  loop.points = {{0.0}, {2.0}, {4.0}, {6.0}};
  loop.windings = {{0}, {0}, {0}, {0}};
  auto hol = fields::line_holonomy_u1(rec1.module.conn.a, loop);
  CHECK(std::abs(hol - std::exp(fields::Complex(0, 2 * fields::kPi * 0.25))) < 1e-12);

  FreeBosonBiBrane b{R, Frac::of(2, 5), Frac::of(1, 6)};
  auto recb = freeboson::bibrane_record(b);
  double y = 1.7;
  CHECK(recb.world_volume.contains({y, y - b.position()}));
  CHECK(!recb.world_volume.contains({y, y}));
}
