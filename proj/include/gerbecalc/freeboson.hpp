// Compactified free boson at radius R: D0/D1-branes, bi-branes, and their
// fusion.  Positions live on the circle R mod 2 pi R, Wilson lines on the dual
// circle R mod 1/(2 pi R); both are stored as exact fractions of their period
// so the fusion group laws hold on the nose.

#pragma once

#include <stdexcept>
#include <string>

#include "gerbecalc/gerbedata.hpp"

namespace gerbecalc::freeboson {

class FreeBosonError : public std::runtime_error {
 public:
  explicit FreeBosonError(const std::string& what) : std::runtime_error(what) {}
};

// Reduced fraction of a period, kept in [0, 1).  Arithmetic is exact and
// throws on (absurdly large) overflow instead of silently wrapping.
struct Frac {
  long long num = 0;
  long long den = 1;

  static Frac of(long long num, long long den);
  // "3/8", "-1/3", or a plain decimal like "0.375"
  static Frac parse(const std::string& text);

  Frac operator+(const Frac& o) const;
  Frac operator-() const;
  Frac operator-(const Frac& o) const { return *this + (-o); }
  bool operator==(const Frac& o) const = default;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

struct D0Brane {
  double radius = 1.0;
  Frac x;                   // fraction of 2 pi R
  double position() const;  // angle in [0, 2 pi R)
};

struct D1Brane {
  double radius = 1.0;
  Frac alpha;             // fraction of 1/(2 pi R)
  double wilson() const;  // line in [0, 1/(2 pi R))
};

struct FreeBosonBiBrane {
  double radius = 1.0;
  Frac x;      // world volume {(y, y - x)}, fraction of 2 pi R
  Frac alpha;  // Wilson line, fraction of 1/(2 pi R)
  double position() const;
  double wilson() const;
};

// The three fusion laws.  All throw FreeBosonError on a radius mismatch.
D0Brane fuse_defect_d0(const FreeBosonBiBrane& b, const D0Brane& d);
D1Brane fuse_defect_d1(const FreeBosonBiBrane& b, const D1Brane& d);
FreeBosonBiBrane fuse_defects(const FreeBosonBiBrane& b, const FreeBosonBiBrane& b2);

// Correspondence-set cross-checks: compute the fusion through the projection
// prescription -- intersect the sampled sets, project, and recognize the
// result -- and return the worst distance from what the closed-form law
// predicts.  Positions only; the Wilson data rides along untouched.
double d0_fusion_residual(const FreeBosonBiBrane& b, const D0Brane& d, int grid = 1 << 10);
double defect_fusion_residual(const FreeBosonBiBrane& b, const FreeBosonBiBrane& b2,
                              int samples = 32, int grid = 1 << 10);

// Realizations on the gerbe side, for feeding the holonomy engines.
gerbe::DBraneRecord brane_record(const D0Brane& d);
gerbe::DBraneRecord brane_record(const D1Brane& d);
gerbe::BiBraneRecord bibrane_record(const FreeBosonBiBrane& b);

}  // namespace gerbecalc::freeboson
