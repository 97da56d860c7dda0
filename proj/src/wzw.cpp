#include "gerbecalc/wzw.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace gerbecalc::wzw {

using fields::FieldError;
using fields::FormOracle;
using fields::Halton;
using fields::kPi;
using fields::Point;
using fields::Quat;
using fields::Tangent;
using fields::TargetSpace;

namespace {

Quat quat_of(const Point& p, int off = 0) { return {p[off], p[off + 1], p[off + 2], p[off + 3]}; }
Quat quat_of(const Tangent& v, int off, int) {
  return {v[off], v[off + 1], v[off + 2], v[off + 3]};
}

// <a,b> = -Re(a b) — the positive-definite pairing on pure quaternions
double pair_im(const Quat& a, const Quat& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z - a.w * b.w;
}

// scalar draws from a Halton stream of any dimension
struct Draw {
  Halton& h;
  std::vector<double> buf;
  size_t pos = 0;
  double operator()() {
    if (pos >= buf.size()) {
      buf = h.next();
      pos = 0;
    }
    return buf[pos++];
  }
};

std::array<double, 3> unit_from(double u1, double u2) {
  double z = 2 * u1 - 1;
  double r = std::sqrt(std::max(0.0, 1 - z * z));
  double ph = 2 * kPi * u2;
  return {r * std::cos(ph), r * std::sin(ph), z};
}

// the primitive two-form evaluated directly: u(t) times the pullback of the
// unit-sphere area form along g -> Im(g)/|Im(g)|
double primitive_val(int k, const Quat& p, const Quat& U, const Quat& V) {
  double s = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
  if (s < 1e-8) throw WzwError("brane two-form is singular at the center elements");
  double t = std::atan2(s, p.w);
  double nx = p.x / s, ny = p.y / s, nz = p.z / s;
  auto dn = [&](const Quat& w, double& ox, double& oy, double& oz) {
    double d = (w.x * nx + w.y * ny + w.z * nz);
    ox = (w.x - d * nx) / s;
    oy = (w.y - d * ny) / s;
    oz = (w.z - d * nz) / s;
  };
  double ax, ay, az, bx, by, bz;
  dn(U, ax, ay, az);
  dn(V, bx, by, bz);
  double cx = ay * bz - az * by, cy = az * bx - ax * bz, cz = ax * by - ay * bx;
  double area = nx * cx + ny * cy + nz * cz;
  double ut = k / (4 * kPi * kPi) * (t - std::sin(t) * std::cos(t));
  return ut * area;
}

double varpi_val(int k, const Point& p, const Tangent& uu, const Tangent& vv) {
  Quat g1 = quat_of(p, 0), g2 = quat_of(p, 4);
  Quat u1 = quat_of(uu, 0, 0), u2 = quat_of(uu, 4, 0);
  Quat v1 = quat_of(vv, 0, 0), v2 = quat_of(vv, 4, 0);
  Quat m = g1 * g2.conj();
  // pushforward along (g1, g2) -> g1 g2^-1
  Quat pu = u1 * g2.conj() - m * u2 * g2.conj();
  Quat pv = v1 * g2.conj() - m * v2 * g2.conj();
  double cross = pair_im(g1.conj() * u1, g2.conj() * v2) - pair_im(g1.conj() * v1, g2.conj() * u2);
  return primitive_val(k, m, pu, pv) - k / (4 * kPi * kPi) * cross;
}

TargetSpace g_target() { return TargetSpace::su2(); }
TargetSpace gg_target() { return TargetSpace::product(TargetSpace::su2(), TargetSpace::su2()); }

void check_level(int k) {
  if (k < 1) throw WzwError("level must be a positive integer");
}

double class_angle(const Quat& g) {
  double s = std::sqrt(g.x * g.x + g.y * g.y + g.z * g.z);
  return std::atan2(s, g.w);
}

}  // namespace

ConjugacyClass::ConjugacyClass(double th) : theta(th) {
  if (!(th >= 0 && th <= kPi)) throw WzwError("class angle must lie in [0, pi]");
}

bool ConjugacyClass::singleton() const { return theta < 1e-12 || kPi - theta < 1e-12; }

bool ConjugacyClass::contains(const Point& g, double tol) const {
  if (g.size() != 4) return false;
  Quat q = quat_of(g);
  if (std::abs(q.norm() - 1) > tol) return false;
  return std::abs(q.w - std::cos(theta)) <= tol;
}

Point ConjugacyClass::sample(Halton& h) const {
  Draw d{h, {}, 0};
  auto n = unit_from(d(), d());
  double s = std::sin(theta);
  return {std::cos(theta), s * n[0], s * n[1], s * n[2]};
}

BiconjugacyClass::BiconjugacyClass(double th) : theta(th) {
  if (!(th >= 0 && th <= kPi)) throw WzwError("class angle must lie in [0, pi]");
}

bool BiconjugacyClass::contains(const Point& g1, const Point& g2, double tol) const {
  Quat m = quat_of(g1) * quat_of(g2).conj();
  return std::abs(m.w - std::cos(theta)) <= tol &&
         std::abs(m.norm() - 1) <= tol;
}

BraneLabel::BraneLabel(int k_, int alpha_) : k(k_), alpha(alpha_) {
  check_level(k_);
  if (alpha_ < 0 || alpha_ > k_) throw WzwError("brane label out of range");
}

double BraneLabel::angle() const { return kPi * (alpha + 1) / (k + 2); }

FormOracle canonical_three_form(int k) {
  check_level(k);
  FormOracle f;
  f.degree = 3;
  f.target = g_target();
  f.name = "H_" + std::to_string(k);
  f.eval = [k](const Point& p, const std::vector<Tangent>& ts) {
    Quat g = quat_of(p);
    Quat a = g.conj() * quat_of(ts[0], 0, 0);
    Quat b = g.conj() * quat_of(ts[1], 0, 0);
    Quat c = g.conj() * quat_of(ts[2], 0, 0);
    Quat br = b * c - c * b;
    return k / (4 * kPi * kPi) * pair_im(a, br);
  };
  return f;
}

std::vector<double> brane_angles(int k) {
  check_level(k);
  std::vector<double> out;
  for (int a = 0; a <= k; ++a) out.push_back(kPi * (a + 1) / (k + 2));
  return out;
}

FormOracle ambient_primitive(int k) {
  check_level(k);
  FormOracle f;
  f.degree = 2;
  f.target = g_target();
  f.name = "omega~_" + std::to_string(k);
  f.eval = [k](const Point& p, const std::vector<Tangent>& ts) {
    return primitive_val(k, quat_of(p), quat_of(ts[0], 0, 0), quat_of(ts[1], 0, 0));
  };
  return f;
}

FormOracle omega_h(const ConjugacyClass& h, int k) {
  check_level(k);
  if (h.singleton()) {
    FormOracle z = fields::zero_form(g_target(), 2);
    z.name = "omega_h(singleton)";
    return z;
  }
  FormOracle f;
  f.degree = 2;
  f.target = g_target();
  f.name = "omega_h(theta=" + std::to_string(h.theta) + ")";
  f.eval = [h, k](const Point& p, const std::vector<Tangent>& ts) {
    if (!h.contains(p, 1e-6)) throw WzwError("point not on the conjugacy class");
    return primitive_val(k, quat_of(p), quat_of(ts[0], 0, 0), quat_of(ts[1], 0, 0));
  };
  return f;
}

FormOracle varpi_theta(double theta, int k) {
  check_level(k);
  if (theta < 1e-9 || kPi - theta < 1e-9)
    throw WzwError("bi-brane two-form needs a non-central class");
  FormOracle f;
  f.degree = 2;
  f.target = gg_target();
  f.name = "varpi(theta=" + std::to_string(theta) + ")";
  f.eval = [k](const Point& p, const std::vector<Tangent>& ts) {
    return varpi_val(k, p, ts[0], ts[1]);
  };
  return f;
}

FormOracle varpi(const Point& h, const Point& hprime, int k) {
  double theta = class_angle(quat_of(h) * quat_of(hprime).conj());
  return varpi_theta(theta, k);
}

std::array<Point, 2> FusionCell::sample(Halton& h) const {
  Draw d{h, {}, 0};
  double A = alpha.angle(), G = gamma.angle();
  auto n = unit_from(d(), d());
  // frame orthogonal to n
  int least = std::abs(n[0]) < std::abs(n[1]) ? 0 : 1;
  if (std::abs(n[2]) < std::abs(n[least])) least = 2;
  std::array<double, 3> axis{0, 0, 0};
  axis[least] = 1;
  std::array<double, 3> e1{n[1] * axis[2] - n[2] * axis[1], n[2] * axis[0] - n[0] * axis[2],
                           n[0] * axis[1] - n[1] * axis[0]};
  double e1n = std::sqrt(e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]);
  for (auto& x : e1) x /= e1n;
  std::array<double, 3> e2{n[1] * e1[2] - n[2] * e1[1], n[2] * e1[0] - n[0] * e1[2],
                           n[0] * e1[1] - n[1] * e1[0]};
  double ps = 2 * kPi * d();
  double w = std::sqrt(std::max(0.0, 1 - u * u));
  std::array<double, 3> m;
  for (int i = 0; i < 3; ++i) m[i] = u * n[i] + w * (std::cos(ps) * e1[i] + std::sin(ps) * e2[i]);
  Point g = {std::cos(A), std::sin(A) * n[0], std::sin(A) * n[1], std::sin(A) * n[2]};
  Point gp = {std::cos(G), std::sin(G) * m[0], std::sin(G) * m[1], std::sin(G) * m[2]};
  return {g, gp};
}

FormOracle FusionCell::form() const {
  int k = alpha.k;
  FormOracle f;
  f.degree = 2;
  f.target = gg_target();
  f.name = "omega_abc";
  f.eval = [k](const Point& p, const std::vector<Tangent>& ts) {
    double v = varpi_val(k, p, ts[0], ts[1]);
    v += primitive_val(k, quat_of(p, 0), quat_of(ts[0], 0, 0), quat_of(ts[1], 0, 0));
    v += primitive_val(k, quat_of(p, 4), quat_of(ts[0], 4, 0), quat_of(ts[1], 4, 0));
    return v;
  };
  return f;
}

FusionCell omega_abc(const BraneLabel& alpha, const BraneLabel& beta, const BraneLabel& gamma) {
  if (alpha.k != beta.k || alpha.k != gamma.k) throw WzwError("brane labels from different levels");
  double A = alpha.angle(), B = beta.angle(), G = gamma.angle();
  double sa = std::sin(A), sg = std::sin(G);
  double u = (std::cos(B) - std::cos(A) * std::cos(G)) / (sa * sg);
  if (!(std::abs(u) < 1 - 1e-12))
    throw WzwError("empty fusion fiber for the given labels");
  return {alpha, beta, gamma, u};
}

std::array<double, 2> class_product_interval(double theta1, double theta2) {
  if (!(theta1 >= 0 && theta1 <= kPi && theta2 >= 0 && theta2 <= kPi))
    throw WzwError("class angle must lie in [0, pi]");
  return {std::abs(theta1 - theta2), std::min(theta1 + theta2, 2 * kPi - theta1 - theta2)};
}

std::vector<int> verlinde_su2(int k, int a, int b) {
  check_level(k);
  if (a < 0 || a > k || b < 0 || b > k) throw WzwError("labels out of range");
  std::vector<int> out;
  auto S = [&](int x, int y) { return std::sin(kPi * (x + 1.0) * (y + 1.0) / (k + 2)); };
  for (int c = 0; c <= k; ++c) {
    double N = 0;
    for (int x = 0; x <= k; ++x) N += S(a, x) * S(b, x) * S(c, x) / S(0, x);
    N *= 2.0 / (k + 2);
    long long r = std::llround(N);
    if (std::abs(N - r) > 1e-6) throw WzwError("verlinde sum did not round to an integer");
    bool trunc = std::abs(a - b) <= c && c <= std::min(a + b, 2 * k - a - b) && (a + b + c) % 2 == 0;
    if ((r != 0) != trunc) throw WzwError("verlinde sum disagrees with the truncation rule");
    if (r != 0) out.push_back(c);
  }
  return out;
}

FusionBoundsReport fusion_bounds_check(int k) {
  check_level(k);
  FusionBoundsReport rep;
  rep.k = k;
  for (int a = 0; a <= k; ++a) {
    for (int b = 0; b <= k; ++b) {
      ++rep.pairs;
      // interval ends as exact integers: angles are C pi/(k+2) and the open
      // interval |A-B| < C < min(A+B, 2K-A-B) holds the allowed labels
      int A = a + 1, B = b + 1, K = k + 2;
      int lo = std::abs(A - B) + 1;
      int hi = std::min(A + B, 2 * K - A - B) - 1;
      auto v = verlinde_su2(k, a, b);
      if (!v.empty() && lo - 1 == v.front() && hi - 1 == v.back()) {
        ++rep.matches;
      } else {
        rep.mismatched.push_back({a, b});
      }
    }
  }
  return rep;
}

int jandl_census(const std::string& group, int level, const std::string& involution) {
  check_level(level);
  if (group == "SU2") {
    if (!involution.empty() && involution != "su2.inverse" && involution != "su2.minus-inverse")
      throw WzwError("unknown involution '" + involution + "' for SU2");
    return 2;
  }
  if (!involution.empty()) throw WzwError("unknown involution '" + involution + "' for " + group);
  if (group == "SO3") {
    if (level % 2 != 0) throw WzwError("SO3 requires an even level");
    return 4;
  }
  if (group == "PSO4n") {
    if (level % 2 != 0) throw WzwError("PSO4n requires an even level");
    return 16;
  }
  throw WzwError("unknown group '" + group + "'");
}

// ---------------------------------------------------------------------------
// Z2 cohomology with coefficients Z_{2m} twisted by inversion

namespace {

using Mat = std::vector<std::vector<long long>>;

Mat ident(int n) {
  Mat m(n, std::vector<long long>(n, 0));
  for (int i = 0; i < n; ++i) m[i][i] = 1;
  return m;
}

struct Snf {
  Mat u, v;  // unimodular: u * a * v = diag(d)
  std::vector<long long> d;
};

// Smith normal form with transform tracking (small matrices only)
Snf smith(Mat a) {
  int r = static_cast<int>(a.size());
  int c = r ? static_cast<int>(a[0].size()) : 0;
  Snf out{ident(r), ident(c), {}};
  auto row_op = [&](int i, int j, long long q) {  // row_i -= q row_j
    for (int t = 0; t < c; ++t) a[i][t] -= q * a[j][t];
    for (int t = 0; t < r; ++t) out.u[i][t] -= q * out.u[j][t];
  };
  auto col_op = [&](int i, int j, long long q) {  // col_i -= q col_j
    for (int t = 0; t < r; ++t) a[t][i] -= q * a[t][j];
    for (int t = 0; t < c; ++t) out.v[t][i] -= q * out.v[t][j];
  };
  auto row_swap = [&](int i, int j) {
    std::swap(a[i], a[j]);
    std::swap(out.u[i], out.u[j]);
  };
  auto col_swap = [&](int i, int j) {
    for (int t = 0; t < r; ++t) std::swap(a[t][i], a[t][j]);
    for (int t = 0; t < c; ++t) std::swap(out.v[t][i], out.v[t][j]);
  };

  int t = 0;
  while (t < std::min(r, c)) {
    // smallest nonzero pivot in the remaining block
    int pi = -1, pj = -1;
    for (int i = t; i < r; ++i)
      for (int j = t; j < c; ++j)
        if (a[i][j] != 0 && (pi < 0 || std::abs(a[i][j]) < std::abs(a[pi][pj]))) {
          pi = i;
          pj = j;
        }
    if (pi < 0) break;
    row_swap(t, pi);
    col_swap(t, pj);
    bool clean = false;
    while (!clean) {
      clean = true;
      for (int i = t + 1; i < r; ++i) {
        if (a[i][t] == 0) continue;
        row_op(i, t, a[i][t] / a[t][t]);
        if (a[i][t] != 0) {
          row_swap(i, t);
          clean = false;
        }
      }
      for (int j = t + 1; j < c; ++j) {
        if (a[t][j] == 0) continue;
        col_op(j, t, a[t][j] / a[t][t]);
        if (a[t][j] != 0) {
          col_swap(j, t);
          clean = false;
        }
      }
    }
    // enforce divisibility of later entries by the pivot
    bool redo = false;
    for (int i = t + 1; i < r && !redo; ++i)
      for (int j = t + 1; j < c && !redo; ++j)
        if (a[i][j] % a[t][t] != 0) {
          row_op(t, i, -1);  // add row i into row t
          redo = true;
        }
    if (redo) continue;
    if (a[t][t] < 0) {
      for (int j = 0; j < c; ++j) a[t][j] = -a[t][j];
      for (int j = 0; j < r; ++j) out.u[t][j] = -out.u[t][j];
    }
    ++t;
  }
  for (int i = 0; i < std::min(r, c); ++i) out.d.push_back(a[i][i]);
  return out;
}

std::vector<long long> mat_vec(const Mat& m, const std::vector<long long>& x) {
  std::vector<long long> y(m.size(), 0);
  for (size_t i = 0; i < m.size(); ++i)
    for (size_t j = 0; j < x.size(); ++j) y[i] += m[i][j] * x[j];
  return y;
}

// bar-resolution differential C^n -> C^{n+1}; tuples of group elements are
// bitmasks (bit i set = the reflection in slot i)
Mat bar_differential(int n) {
  int rows = 1 << (n + 1), cols = 1 << n;
  Mat d(rows, std::vector<long long>(cols, 0));
  for (int rho = 0; rho < rows; ++rho) {
    int g0 = rho & 1;
    d[rho][rho >> 1] += g0 ? -1 : 1;  // g0 acts by inversion
    for (int i = 1; i <= n; ++i) {
      // merge slots i-1 and i
      int low = rho & ((1 << (i - 1)) - 1);
      int merged = ((rho >> (i - 1)) & 1) ^ ((rho >> i) & 1);
      int high = rho >> (i + 1);
      int tau = low | (merged << (i - 1)) | (high << i);
      d[rho][tau] += (i % 2 == 0) ? 1 : -1;
    }
    d[rho][rho & ((1 << n) - 1)] += (n % 2 == 0) ? -1 : 1;  // drop the last slot
  }
  return d;
}

}  // namespace

long long AbelianGroup::order() const {
  long long o = 1;
  for (long long f : factors) o *= f;
  return o;
}

std::string AbelianGroup::describe() const {
  if (factors.empty()) return "0";
  std::ostringstream os;
  for (size_t i = 0; i < factors.size(); ++i) {
    if (i) os << " x ";
    os << "Z" << factors[i];
  }
  return os.str();
}

AbelianGroup cohomology_z2(int n, int m) {
  if (n < 0 || n > 4 || m < 1) throw WzwError("cohomology degree must be 0..4 with m >= 1");
  const long long M = 2 * m;
  const int cn = 1 << n;

  // kernel lattice of (d_n mod M): basis columns of K
  Snf s1 = smith(bar_differential(n));
  Mat K(cn, std::vector<long long>(cn, 0));
  for (int j = 0; j < cn; ++j) {
    long long sj = j < static_cast<int>(s1.d.size()) ? s1.d[j] : 0;
    long long f = sj == 0 ? 1 : M / std::gcd(sj, M);
    for (int i = 0; i < cn; ++i) K[i][j] = s1.v[i][j] * f;
  }

  // subgroup generators: the image of d_{n-1} plus M * identity
  std::vector<std::vector<long long>> gens;
  if (n > 0) {
    Mat dprev = bar_differential(n - 1);
    for (int j = 0; j < (1 << (n - 1)); ++j) {
      std::vector<long long> g(cn);
      for (int i = 0; i < cn; ++i) g[i] = dprev[i][j];
      gens.push_back(g);
    }
  }
  for (int i = 0; i < cn; ++i) {
    std::vector<long long> g(cn, 0);
    g[i] = M;
    gens.push_back(g);
  }

  // coordinates of each generator in the kernel basis: solve K c = v
  Snf sk = smith(K);
  Mat coeff(cn, std::vector<long long>(gens.size(), 0));
  for (size_t gi = 0; gi < gens.size(); ++gi) {
    auto w = mat_vec(sk.u, gens[gi]);
    std::vector<long long> y(cn);
    for (int i = 0; i < cn; ++i) {
      if (sk.d[i] == 0 || w[i] % sk.d[i] != 0)
        throw WzwError("internal: coboundary not contained in the cocycle lattice");
      y[i] = w[i] / sk.d[i];
    }
    auto cvec = mat_vec(sk.v, y);
    for (int i = 0; i < cn; ++i) coeff[i][gi] = cvec[i];
  }

  Snf sq = smith(coeff);
  AbelianGroup out;
  for (int i = 0; i < cn; ++i) {
    long long d = i < static_cast<int>(sq.d.size()) ? std::abs(sq.d[i]) : 0;
    if (d == 0) throw WzwError("internal: quotient has a free part");
    if (d > 1) out.factors.push_back(d);
  }
  std::sort(out.factors.begin(), out.factors.end());
  return out;
}

}  // namespace gerbecalc::wzw
