#include "gerbecalc/freeboson.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

namespace gerbecalc::freeboson {

namespace {

using Wide = __int128;

long long narrow(Wide v, const char* what) {
  if (v > std::numeric_limits<long long>::max() || v < std::numeric_limits<long long>::min())
    throw FreeBosonError(std::string("exact fraction overflow in ") + what);
  return static_cast<long long>(v);
}

Wide wide_gcd(Wide a, Wide b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b) {
    Wide t = a % b;
    a = b;
    b = t;
  }
  return a;
}

Frac reduce_wide(Wide num, Wide den, const char* what) {
  if (den == 0) throw FreeBosonError("fraction with zero denominator");
  if (den < 0) {
    den = -den;
    num = -num;
  }
  num %= den;
  if (num < 0) num += den;
  Wide g = wide_gcd(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  return {narrow(num, what), narrow(den, what)};
}

double circumference(double radius) { return 2 * fields::kPi * radius; }

void require_same_radius(double a, double b) {
  if (a != b) {
    std::ostringstream os;
    os << "radius mismatch: " << a << " vs " << b;
    throw FreeBosonError(os.str());
  }
}

// distance between two angles on a circle of circumference p
double circ_dist(double a, double b, double p) { return std::abs(std::remainder(a - b, p)); }

// Argmin of a V-shaped circle-distance function: coarse scan, then shrink the
// bracketing interval by golden section.
double arg_closest(const std::function<double(double)>& dist, double p, int grid) {
  int best = 0;
  double best_d = dist(0);
  for (int i = 1; i < grid; ++i) {
    double d = dist(p * i / grid);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  double lo = p * (best - 1) / grid, hi = p * (best + 1) / grid;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
  double fa = dist(a), fb = dist(b);
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    if (fa < fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - phi * (hi - lo);
      fa = dist(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + phi * (hi - lo);
      fb = dist(b);
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

Frac Frac::of(long long num, long long den) { return reduce_wide(num, den, "construction"); }

Frac Frac::parse(const std::string& text) {
  auto bad = [&] { throw FreeBosonError("cannot parse fraction '" + text + "'"); };
  if (text.empty()) bad();
  auto slash = text.find('/');
  try {
    if (slash != std::string::npos) {
      size_t used1 = 0, used2 = 0;
      long long num = std::stoll(text.substr(0, slash), &used1);
      long long den = std::stoll(text.substr(slash + 1), &used2);
      if (used1 != slash || used2 != text.size() - slash - 1) bad();
      return of(num, den);
    }
    auto dot = text.find('.');
    if (dot == std::string::npos) {
      size_t used = 0;
      long long num = std::stoll(text, &used);
      if (used != text.size()) bad();
      return of(num, 1);
    }
    std::string digits = text.substr(0, dot) + text.substr(dot + 1);
    size_t frac_digits = text.size() - dot - 1;
    if (frac_digits == 0 || frac_digits > 17) bad();
    size_t used = 0;
    long long num = std::stoll(digits, &used);
    if (used != digits.size()) bad();
    long long den = 1;
    for (size_t i = 0; i < frac_digits; ++i) den *= 10;
    return of(num, den);
  } catch (const std::logic_error&) {  // stoll failures
    bad();
  }
  return {};
}

Frac Frac::operator+(const Frac& o) const {
  Wide n = Wide(num) * o.den + Wide(o.num) * den;
  return reduce_wide(n, Wide(den) * o.den, "addition");
}

Frac Frac::operator-() const { return {num == 0 ? 0 : den - num, num == 0 ? 1 : den}; }

double D0Brane::position() const { return x.value() * circumference(radius); }
double D1Brane::wilson() const { return alpha.value() / circumference(radius); }
double FreeBosonBiBrane::position() const { return x.value() * circumference(radius); }
double FreeBosonBiBrane::wilson() const { return alpha.value() / circumference(radius); }

D0Brane fuse_defect_d0(const FreeBosonBiBrane& b, const D0Brane& d) {
  require_same_radius(b.radius, d.radius);
  return {d.radius, b.x + d.x};
}

D1Brane fuse_defect_d1(const FreeBosonBiBrane& b, const D1Brane& d) {
  require_same_radius(b.radius, d.radius);
  return {d.radius, b.alpha + d.alpha};
}

FreeBosonBiBrane fuse_defects(const FreeBosonBiBrane& b, const FreeBosonBiBrane& b2) {
  require_same_radius(b.radius, b2.radius);
  return {b.radius, b.x + b2.x, b.alpha + b2.alpha};
}

// Fuse through the correspondence instead of the law: restrict the bi-brane
// set {(y, y - x)} to the fiber over the D0 position, project out the first
// coordinate, and measure how far the projected point is from the prediction.
double d0_fusion_residual(const FreeBosonBiBrane& b, const D0Brane& d, int grid) {
  require_same_radius(b.radius, d.radius);
  double p = circumference(b.radius);
  double shift = b.position(), at = d.position();
  double y1 = arg_closest([&](double t) { return circ_dist(t - shift, at, p); }, p, grid);
  return circ_dist(y1, fuse_defect_d0(b, d).position(), p);
}

// Same idea for two bi-branes: intersect over the middle coordinate, project
// to (first, last), and recognize the result as the graph of a shift.
double defect_fusion_residual(const FreeBosonBiBrane& b, const FreeBosonBiBrane& b2, int samples,
                              int grid) {
  require_same_radius(b.radius, b2.radius);
  double p = circumference(b.radius);
  double s1 = b.position(), s2 = b2.position();
  double predicted = fuse_defects(b, b2).position();
  double worst = 0;
  for (int i = 0; i < samples; ++i) {
    double y1 = p * i / samples;
    double y2 = arg_closest([&](double t) { return circ_dist(t, y1 - s1, p); }, p, grid);
    double y3 = arg_closest([&](double t) { return circ_dist(t, y2 - s2, p); }, p, grid);
    double recognized = y1 - y3;
    worst = std::max(worst, circ_dist(recognized, predicted, p));
  }
  return worst;
}

gerbe::DBraneRecord brane_record(const D0Brane& d) {
  auto t = fields::TargetSpace::circle(d.radius);
  return {gerbe::point_world_volume(t, {d.position()}), fields::zero_form(t, 2),
          {1, fields::u1_connection(fields::zero_form(t, 1))}};
}

gerbe::DBraneRecord brane_record(const D1Brane& d) {
  auto t = fields::TargetSpace::circle(d.radius);
  return {gerbe::whole_world_volume(t), fields::zero_form(t, 2),
          {1, fields::u1_connection(fields::circle_one_form(t, d.wilson()))}};
}

gerbe::BiBraneRecord bibrane_record(const FreeBosonBiBrane& b) {
  auto t = fields::TargetSpace::circle(b.radius);
  auto prod = fields::TargetSpace::product(t, t);
  return {gerbe::shifted_diagonal_world_volume(t, b.position()), fields::zero_form(prod, 2),
          {1, fields::u1_connection(fields::circle_one_form(prod, b.wilson(), 0))}};
}

}  // namespace gerbecalc::freeboson
