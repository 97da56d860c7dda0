#include "gerbecalc/fields.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gerbecalc::fields {

double principal(double x, double period) {
  double y = x - period * std::round(x / period);
  if (y <= -period / 2) y += period;  // round-half-even can land on the open end
  return y;
}

// ---------------------------------------------------------------------------
// quaternions

double Quat::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Quat Quat::normalized() const {
  double n = norm();
  if (n < 1e-300) throw FieldError("cannot normalize zero quaternion");
  return {w / n, x / n, y / n, z / n};
}

Quat Quat::operator*(const Quat& o) const {
  return {w * o.w - x * o.x - y * o.y - z * o.z, w * o.x + x * o.w + y * o.z - z * o.y,
          w * o.y - x * o.z + y * o.w + z * o.x, w * o.z + x * o.y - y * o.x + z * o.w};
}

double dot(const Quat& a, const Quat& b) { return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z; }

Quat qexp(const Quat& p) {
  double t = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
  double c = std::cos(t);
  double s = t < 1e-12 ? 1.0 - t * t / 6.0 : std::sin(t) / t;  // sin(t)/t
  return {c, s * p.x, s * p.y, s * p.z};
}

Quat qlog(const Quat& q) {
  double im = std::sqrt(q.x * q.x + q.y * q.y + q.z * q.z);
  if (im < 1e-12) {
    if (q.w < 0) throw FieldError("quaternion log at the antipode is undefined");
    return {0, q.x, q.y, q.z};  // log(1+e) ~ e near the identity
  }
  double s = std::atan2(im, q.w) / im;
  return {0, s * q.x, s * q.y, s * q.z};
}

namespace {

Quat quat_at(const Point& p, int off) { return {p[off], p[off + 1], p[off + 2], p[off + 3]}; }
void put_quat(Point& p, int off, const Quat& q) {
  p[off] = q.w;
  p[off + 1] = q.x;
  p[off + 2] = q.y;
  p[off + 3] = q.z;
}

// flattened component layout of a (possibly product) target
struct Comp {
  TargetSpace::Kind kind;
  double r1 = 0, r2 = 0;
  int coord = 0;  // offset into point vectors
  int chart = 0;  // offset into chart coordinate vectors
  int wind = 0;   // offset into winding vectors
};

void flatten_into(const TargetSpace& t, std::vector<Comp>& out, int& coord, int& chart,
                  int& wind) {
  switch (t.kind) {
    case TargetSpace::Kind::Circle:
      out.push_back({t.kind, t.radii[0], 0, coord, chart, wind});
      coord += 1;
      chart += 1;
      wind += 1;
      break;
    case TargetSpace::Kind::Torus:
      out.push_back({t.kind, t.radii[0], t.radii[1], coord, chart, wind});
      coord += 2;
      chart += 2;
      wind += 2;
      break;
    case TargetSpace::Kind::SU2:
      out.push_back({t.kind, 0, 0, coord, chart, wind});
      coord += 4;
      chart += 3;
      break;
    case TargetSpace::Kind::Product:
      for (const auto& f : t.factors) flatten_into(f, out, coord, chart, wind);
      break;
  }
}

std::vector<Comp> flatten(const TargetSpace& t) {
  std::vector<Comp> out;
  int coord = 0, chart = 0, wind = 0;
  flatten_into(t, out, coord, chart, wind);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// target spaces

TargetSpace TargetSpace::circle(double R) {
  if (R <= 0) throw FieldError("circle radius must be positive");
  TargetSpace t;
  t.kind = Kind::Circle;
  t.radii = {R};
  return t;
}

TargetSpace TargetSpace::torus(double R1, double R2) {
  if (R1 <= 0 || R2 <= 0) throw FieldError("torus radii must be positive");
  TargetSpace t;
  t.kind = Kind::Torus;
  t.radii = {R1, R2};
  return t;
}

TargetSpace TargetSpace::su2() {
  TargetSpace t;
  t.kind = Kind::SU2;
  return t;
}

TargetSpace TargetSpace::product(const TargetSpace& a, const TargetSpace& b) {
  TargetSpace t;
  t.kind = Kind::Product;
  t.factors = {a, b};
  return t;
}

int TargetSpace::point_dim() const {
  switch (kind) {
    case Kind::Circle: return 1;
    case Kind::Torus: return 2;
    case Kind::SU2: return 4;
    case Kind::Product: return factors[0].point_dim() + factors[1].point_dim();
  }
  return 0;
}

int TargetSpace::chart_dim() const {
  switch (kind) {
    case Kind::Circle: return 1;
    case Kind::Torus: return 2;
    case Kind::SU2: return 3;
    case Kind::Product: return factors[0].chart_dim() + factors[1].chart_dim();
  }
  return 0;
}

int TargetSpace::winding_rank() const {
  switch (kind) {
    case Kind::Circle: return 1;
    case Kind::Torus: return 2;
    case Kind::SU2: return 0;
    case Kind::Product: return factors[0].winding_rank() + factors[1].winding_rank();
  }
  return 0;
}

std::vector<double> TargetSpace::periods() const {
  std::vector<double> p;
  for (const auto& c : flatten(*this)) {
    if (c.kind == Kind::Circle) p.push_back(2 * kPi * c.r1);
    if (c.kind == Kind::Torus) {
      p.push_back(2 * kPi * c.r1);
      p.push_back(2 * kPi * c.r2);
    }
  }
  return p;
}

std::vector<int> TargetSpace::winding_coords() const {
  std::vector<int> out;
  for (const auto& c : flatten(*this)) {
    if (c.kind == Kind::Circle) out.push_back(c.coord);
    if (c.kind == Kind::Torus) {
      out.push_back(c.coord);
      out.push_back(c.coord + 1);
    }
  }
  return out;
}

bool TargetSpace::same_as(const TargetSpace& o, double tol) const {
  if (kind != o.kind) return false;
  if (radii.size() != o.radii.size()) return false;
  for (size_t i = 0; i < radii.size(); ++i)
    if (std::abs(radii[i] - o.radii[i]) > tol) return false;
  if (factors.size() != o.factors.size()) return false;
  for (size_t i = 0; i < factors.size(); ++i)
    if (!factors[i].same_as(o.factors[i], tol)) return false;
  return true;
}

std::string TargetSpace::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::Circle: os << "circle(R=" << radii[0] << ")"; break;
    case Kind::Torus: os << "torus(R1=" << radii[0] << ",R2=" << radii[1] << ")"; break;
    case Kind::SU2: os << "su2"; break;
    case Kind::Product:
      os << "product(" << factors[0].describe() << "," << factors[1].describe() << ")";
      break;
  }
  return os.str();
}

Point reduce_point(const TargetSpace& t, Point p) {
  check_point(t, p);
  for (const auto& c : flatten(t)) {
    if (c.kind == TargetSpace::Kind::Circle || c.kind == TargetSpace::Kind::Torus) {
      int n = c.kind == TargetSpace::Kind::Circle ? 1 : 2;
      for (int i = 0; i < n; ++i) {
        double period = 2 * kPi * (i == 0 ? c.r1 : c.r2);
        double v = std::fmod(p[c.coord + i], period);
        if (v < 0) v += period;
        p[c.coord + i] = v;
      }
    } else if (c.kind == TargetSpace::Kind::SU2) {
      Quat q = quat_at(p, c.coord);
      if (std::abs(q.norm() - 1.0) > 1e-9)
        throw FieldError("su2 point is not a unit quaternion");
      put_quat(p, c.coord, q.normalized());
    }
  }
  return p;
}

void check_point(const TargetSpace& t, const Point& p) {
  if (static_cast<int>(p.size()) != t.point_dim())
    throw FieldError("point dimension mismatch for target " + t.describe());
}

Point chart_point(const TargetSpace& t, const Point& center, const std::vector<double>& coords) {
  check_point(t, center);
  if (static_cast<int>(coords.size()) != t.chart_dim())
    throw FieldError("chart coordinate dimension mismatch");
  Point p = center;
  for (const auto& c : flatten(t)) {
    switch (c.kind) {
      case TargetSpace::Kind::Circle: p[c.coord] += coords[c.chart]; break;
      case TargetSpace::Kind::Torus:
        p[c.coord] += coords[c.chart];
        p[c.coord + 1] += coords[c.chart + 1];
        break;
      case TargetSpace::Kind::SU2: {
        Quat g = quat_at(center, c.coord);
        Quat e = qexp({0, coords[c.chart], coords[c.chart + 1], coords[c.chart + 2]});
        put_quat(p, c.coord, (g * e).normalized());
        break;
      }
      case TargetSpace::Kind::Product: break;
    }
  }
  return reduce_point(t, p);
}

std::vector<double> chart_coords(const TargetSpace& t, const Point& center, const Point& p) {
  check_point(t, center);
  check_point(t, p);
  std::vector<double> u(t.chart_dim(), 0.0);
  for (const auto& c : flatten(t)) {
    switch (c.kind) {
      case TargetSpace::Kind::Circle:
        u[c.chart] = principal(p[c.coord] - center[c.coord], 2 * kPi * c.r1);
        break;
      case TargetSpace::Kind::Torus:
        u[c.chart] = principal(p[c.coord] - center[c.coord], 2 * kPi * c.r1);
        u[c.chart + 1] = principal(p[c.coord + 1] - center[c.coord + 1], 2 * kPi * c.r2);
        break;
      case TargetSpace::Kind::SU2: {
        Quat g = quat_at(center, c.coord), q = quat_at(p, c.coord);
        Quat l = qlog(g.conj() * q);
        u[c.chart] = l.x;
        u[c.chart + 1] = l.y;
        u[c.chart + 2] = l.z;
        break;
      }
      case TargetSpace::Kind::Product: break;
    }
  }
  return u;
}

Tangent project_tangent(const TargetSpace& t, const Point& p, Tangent v) {
  for (const auto& c : flatten(t)) {
    if (c.kind == TargetSpace::Kind::SU2) {
      Quat q = quat_at(p, c.coord), w = quat_at(v, c.coord);
      double s = dot(q, w);
      put_quat(v, c.coord, w - q * s);
    }
  }
  return v;
}

Tangent chart_tangent(const TargetSpace& t, const Point& center, const std::vector<double>& at,
                      const std::vector<double>& dc) {
  const double h = 1e-5;
  std::vector<double> up = at, um = at;
  for (size_t i = 0; i < at.size(); ++i) {
    up[i] += h * dc[i];
    um[i] -= h * dc[i];
  }
  Point pp = chart_point(t, center, up), pm = chart_point(t, center, um);
  Tangent v(pp.size());
  auto periods_of = [&](int coord) -> double {
    for (const auto& c : flatten(t)) {
      if (c.kind == TargetSpace::Kind::Circle && c.coord == coord) return 2 * kPi * c.r1;
      if (c.kind == TargetSpace::Kind::Torus && (coord == c.coord || coord == c.coord + 1))
        return 2 * kPi * (coord == c.coord ? c.r1 : c.r2);
    }
    return 0;
  };
  for (size_t i = 0; i < v.size(); ++i) {
    double d = pp[i] - pm[i];
    double period = periods_of(static_cast<int>(i));
    if (period > 0) d = principal(d, period);
    v[i] = d / (2 * h);
  }
  return project_tangent(t, chart_point(t, center, at), v);
}

std::vector<double> tangent_to_chart(const TargetSpace& t, const Point& center,
                                     const std::vector<double>& at, const Tangent& v) {
  int d = t.chart_dim(), n = t.point_dim();
  // columns: pushforwards of chart basis vectors at `at`
  std::vector<Tangent> cols(d);
  for (int j = 0; j < d; ++j) {
    std::vector<double> e(d, 0.0);
    e[j] = 1.0;
    cols[j] = chart_tangent(t, center, at, e);
  }
  // least squares via normal equations (d <= 4 per factor block, well conditioned)
  std::vector<std::vector<double>> m(d, std::vector<double>(d + 1, 0.0));
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < n; ++k) m[i][j] += cols[i][k] * cols[j][k];
    for (int k = 0; k < n; ++k) m[i][d] += cols[i][k] * v[k];
  }
  // gaussian elimination with partial pivoting
  for (int c = 0; c < d; ++c) {
    int piv = c;
    for (int r = c + 1; r < d; ++r)
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    std::swap(m[c], m[piv]);
    if (std::abs(m[c][c]) < 1e-14) throw FieldError("degenerate chart Jacobian");
    for (int r = 0; r < d; ++r) {
      if (r == c) continue;
      double f = m[r][c] / m[c][c];
      for (int k = c; k <= d; ++k) m[r][k] -= f * m[c][k];
    }
  }
  std::vector<double> out(d);
  for (int c = 0; c < d; ++c) out[c] = m[c][d] / m[c][c];
  return out;
}

// ---------------------------------------------------------------------------
// forms

double FormOracle::operator()(const Point& p, const std::vector<Tangent>& ts) const {
  if (static_cast<int>(ts.size()) != degree)
    throw FieldError("form of degree " + std::to_string(degree) + " evaluated on " +
                     std::to_string(ts.size()) + " tangents");
  double v = eval(p, ts);
  if (!std::isfinite(v)) throw FieldError("non-finite form evaluation (" + name + ")");
  return v;
}

FormOracle zero_form(const TargetSpace& t, int degree) {
  FormOracle f;
  f.degree = degree;
  f.target = t;
  f.name = "zero";
  f.eval = [](const Point&, const std::vector<Tangent>&) { return 0.0; };
  return f;
}

FormOracle scaled_form(const FormOracle& f, double c) {
  FormOracle g = f;
  g.name = f.name + "*scale";
  g.eval = [f, c](const Point& p, const std::vector<Tangent>& ts) { return c * f.eval(p, ts); };
  return g;
}

FormOracle sum_form(const FormOracle& f, const FormOracle& g) {
  if (f.degree != g.degree) throw FieldError("cannot add forms of different degree");
  FormOracle h = f;
  h.name = f.name + "+" + g.name;
  h.eval = [f, g](const Point& p, const std::vector<Tangent>& ts) {
    return f.eval(p, ts) + g.eval(p, ts);
  };
  return h;
}

FormOracle torus_volume_form(const TargetSpace& t, double c) {
  if (t.kind != TargetSpace::Kind::Torus) throw FieldError("torus_volume_form needs a torus");
  FormOracle f;
  f.degree = 2;
  f.target = t;
  f.name = "torus.vol";
  f.eval = [c](const Point&, const std::vector<Tangent>& ts) {
    return c * (ts[0][0] * ts[1][1] - ts[0][1] * ts[1][0]);
  };
  return f;
}

FormOracle circle_one_form(const TargetSpace& t, double c, int coord) {
  if (coord < 0 || coord >= t.point_dim()) throw FieldError("coordinate index out of range");
  FormOracle f;
  f.degree = 1;
  f.target = t;
  f.name = "dx";
  f.eval = [c, coord](const Point&, const std::vector<Tangent>& ts) { return c * ts[0][coord]; };
  return f;
}

double exterior_derivative_fd(const FormOracle& f, const Point& p,
                              const std::vector<Tangent>& tangents,
                              const std::optional<Point>& chart_center) {
  const double h = 1e-4;
  const TargetSpace& t = f.target;
  if (static_cast<int>(tangents.size()) != f.degree + 1)
    throw FieldError("exterior derivative needs degree+1 tangents");
  Point center = chart_center ? *chart_center : p;
  std::vector<double> u0 = chart_coords(t, center, p);
  // chart coordinates of every tangent at p
  std::vector<std::vector<double>> cs;
  for (const auto& v : tangents) cs.push_back(tangent_to_chart(t, center, u0, v));

  double total = 0.0;
  for (size_t i = 0; i < tangents.size(); ++i) {
    // directional derivative along tangent i of f evaluated on the others
    double vals[2];
    for (int sgn = 0; sgn < 2; ++sgn) {
      std::vector<double> u = u0;
      double step = sgn == 0 ? h : -h;
      for (size_t k = 0; k < u.size(); ++k) u[k] += step * cs[i][k];
      Point q = chart_point(t, center, u);
      std::vector<Tangent> args;
      for (size_t j = 0; j < tangents.size(); ++j) {
        if (j == i) continue;
        args.push_back(chart_tangent(t, center, u, cs[j]));
      }
      vals[sgn] = f.degree == 0 ? f.eval(q, {}) : f.eval(q, args);
    }
    double deriv = (vals[0] - vals[1]) / (2 * h);
    total += (i % 2 == 0 ? 1.0 : -1.0) * deriv;
  }
  return total;
}

FormOracle d_form(const FormOracle& f) {
  FormOracle g;
  g.degree = f.degree + 1;
  g.target = f.target;
  g.name = "d(" + f.name + ")";
  g.eval = [f](const Point& p, const std::vector<Tangent>& ts) {
    return exterior_derivative_fd(f, p, ts);
  };
  return g;
}

Tangent pushforward_fd(const SmoothMap& m, const Point& p, const Tangent& v) {
  const double h = 1e-5;
  std::vector<double> c = tangent_to_chart(m.domain, p, std::vector<double>(m.domain.chart_dim(), 0.0), v);
  std::vector<double> up(m.domain.chart_dim()), um(m.domain.chart_dim());
  for (int i = 0; i < m.domain.chart_dim(); ++i) {
    up[i] = h * c[i];
    um[i] = -h * c[i];
  }
  Point pp = m.apply(chart_point(m.domain, p, up));
  Point pm = m.apply(chart_point(m.domain, p, um));
  auto periods = m.codomain.periods();
  auto coords = m.codomain.winding_coords();
  Tangent out(pp.size());
  for (size_t i = 0; i < out.size(); ++i) {
    double d = pp[i] - pm[i];
    for (size_t k = 0; k < coords.size(); ++k)
      if (coords[k] == static_cast<int>(i)) d = principal(d, periods[k]);
    out[i] = d / (2 * h);
  }
  return project_tangent(m.codomain, m.apply(p), out);
}

FormOracle pullback_form(const SmoothMap& m, const FormOracle& f) {
  if (!f.target.same_as(m.codomain)) throw FieldError("pullback target mismatch");
  FormOracle g;
  g.degree = f.degree;
  g.target = m.domain;
  g.name = m.name + "*(" + f.name + ")";
  g.eval = [m, f](const Point& p, const std::vector<Tangent>& ts) {
    Point q = reduce_point(m.codomain, m.apply(p));
    std::vector<Tangent> pushed;
    for (const auto& v : ts) pushed.push_back(pushforward_fd(m, p, v));
    return f.eval(q, pushed);
  };
  return g;
}

SmoothMap named_involution(const TargetSpace& t, const std::string& name) {
  SmoothMap m;
  m.domain = t;
  m.codomain = t;
  m.name = name;
  if (name == "circle.flip" && t.kind == TargetSpace::Kind::Circle) {
    m.apply = [t](const Point& p) { return reduce_point(t, {-p[0]}); };
  } else if (name == "torus.klein" && t.kind == TargetSpace::Kind::Torus) {
    double half = kPi * t.radii[0];  // half the first period
    m.apply = [t, half](const Point& p) { return reduce_point(t, {p[0] + half, -p[1]}); };
  } else if (name == "su2.inverse" && t.kind == TargetSpace::Kind::SU2) {
    m.apply = [](const Point& p) { return Point{p[0], -p[1], -p[2], -p[3]}; };
  } else if (name == "su2.minus-inverse" && t.kind == TargetSpace::Kind::SU2) {
    m.apply = [](const Point& p) { return Point{-p[0], p[1], p[2], p[3]}; };
  } else {
    throw FieldError("unknown involution '" + name + "' for target " + t.describe());
  }
  return m;
}

double dlog_im(const PhaseFunction& phi, const Point& p, const Tangent& v) {
  const double h = 1e-5;
  std::vector<double> c =
      tangent_to_chart(phi.target, p, std::vector<double>(phi.target.chart_dim(), 0.0), v);
  std::vector<double> up(c.size()), um(c.size());
  for (size_t i = 0; i < c.size(); ++i) {
    up[i] = h * c[i];
    um[i] = -h * c[i];
  }
  Complex fp = phi.eval(chart_point(phi.target, p, up));
  Complex fm = phi.eval(chart_point(phi.target, p, um));
  return std::arg(fp / fm) / (2 * h);
}

// ---------------------------------------------------------------------------
// complex matrices and connections

CMat CMat::identity(int n) {
  CMat m(n);
  for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

CMat CMat::operator*(const CMat& o) const {
  CMat r(n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      Complex s = at(i, k);
      if (s == Complex(0)) continue;
      for (int j = 0; j < n; ++j) r.at(i, j) += s * o.at(k, j);
    }
  return r;
}

CMat CMat::operator+(const CMat& o) const {
  CMat r = *this;
  for (size_t i = 0; i < a.size(); ++i) r.a[i] += o.a[i];
  return r;
}

CMat CMat::operator*(Complex s) const {
  CMat r = *this;
  for (auto& v : r.a) v *= s;
  return r;
}

Complex CMat::trace() const {
  Complex s = 0;
  for (int i = 0; i < n; ++i) s += at(i, i);
  return s;
}

double CMat::max_abs_diff(const CMat& o) const {
  double m = 0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - o.a[i]));
  return m;
}

Connection u1_connection(const FormOracle& a) {
  if (a.degree != 1) throw FieldError("connection 1-form must have degree 1");
  Connection c;
  c.rank = 1;
  c.target = a.target;
  c.a = a;
  return c;
}

Connection flat_diagonal_connection(const TargetSpace& t, const std::vector<FormOracle>& diag) {
  if (diag.empty()) throw FieldError("rank 0 connection");
  Connection c;
  c.rank = static_cast<int>(diag.size());
  c.target = t;
  c.a = diag[0];
  c.matrix = [diag](const Point& p, const Tangent& v) {
    CMat m(static_cast<int>(diag.size()));
    for (size_t i = 0; i < diag.size(); ++i) m.at(static_cast<int>(i), static_cast<int>(i)) = diag[i].eval(p, {v});
    return m;
  };
  return c;
}

// ---------------------------------------------------------------------------
// surface maps

namespace {

// lifted coordinates of the three corners of a face, for one circle coordinate
struct LiftedCorner {
  double l[3];
};

double canonical_delta(const SurfaceMap& m, int edge, int coord_index, int coord, double period) {
  const auto& e = m.surface.edges[edge];
  double d = principal(m.vertex_images[e.head][coord] - m.vertex_images[e.tail][coord], period);
  return d + period * m.edge_windings[edge][coord_index];
}

LiftedCorner lifted_corners(const SurfaceMap& m, int face, int coord_index, int coord,
                            double period) {
  LiftedCorner lc;
  const auto& fv = m.surface.faces[face];
  lc.l[0] = m.vertex_images[fv[0]][coord];
  double d0 = m.surface.face_edge_dir[face][0] *
              canonical_delta(m, m.surface.face_edge[face][0], coord_index, coord, period);
  double d1 = m.surface.face_edge_dir[face][1] *
              canonical_delta(m, m.surface.face_edge[face][1], coord_index, coord, period);
  lc.l[1] = lc.l[0] + d0;
  lc.l[2] = lc.l[1] + d1;
  return lc;
}

Quat geodesic_mean(const Quat q[3], const std::array<double, 3>& w) {
  // exact corners
  for (int i = 0; i < 3; ++i)
    if (w[i] > 1.0 - 1e-15) return q[i];
  Quat p = (q[0] * w[0] + q[1] * w[1] + q[2] * w[2]);
  if (p.norm() < 1e-8) throw FieldError("su2 interpolation degenerate (near-antipodal corners)");
  p = p.normalized();
  for (int it = 0; it < 200; ++it) {
    Quat u{0, 0, 0, 0};
    for (int i = 0; i < 3; ++i) {
      if (w[i] == 0.0) continue;
      Quat l = qlog(p.conj() * q[i]);
      u = u + l * w[i];
    }
    double n = std::sqrt(u.x * u.x + u.y * u.y + u.z * u.z);
    p = (p * qexp(u)).normalized();
    if (n < 1e-14) return p;
  }
  throw FieldError("su2 geodesic mean did not converge");
}

}  // namespace

SurfaceMap make_surface_map(const mesh::TriangulatedSurface& s, const TargetSpace& t,
                            std::vector<Point> vertex_images,
                            std::vector<std::vector<int>> edge_windings) {
  if (static_cast<int>(vertex_images.size()) != s.num_vertices)
    throw FieldError("vertex image count mismatch");
  int wr = t.winding_rank();
  if (wr == 0 && edge_windings.empty())
    edge_windings.assign(s.num_edges(), {});
  if (static_cast<int>(edge_windings.size()) != s.num_edges())
    throw FieldError("edge winding count mismatch");
  for (auto& w : edge_windings)
    if (static_cast<int>(w.size()) != wr) throw FieldError("edge winding rank mismatch");
  for (auto& p : vertex_images) p = reduce_point(t, p);

  SurfaceMap m{s, t, std::move(vertex_images), std::move(edge_windings)};

  // per-face closure of circle-coordinate lifts
  auto periods = t.periods();
  auto coords = t.winding_coords();
  for (int f = 0; f < s.num_faces(); ++f) {
    for (size_t k = 0; k < coords.size(); ++k) {
      double sum = 0;
      for (int l = 0; l < 3; ++l)
        sum += s.face_edge_dir[f][l] *
               canonical_delta(m, s.face_edge[f][l], static_cast<int>(k), coords[k], periods[k]);
      if (std::abs(sum) > periods[k] * 1e-9)
        throw FieldError("edge lifts inconsistent on face " + std::to_string(f));
    }
  }
  // su2 spread bound
  for (const auto& c : flatten(t)) {
    if (c.kind != TargetSpace::Kind::SU2) continue;
    for (int f = 0; f < s.num_faces(); ++f) {
      const auto& fv = s.faces[f];
      for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
          Quat a = quat_at(m.vertex_images[fv[i]], c.coord);
          Quat b = quat_at(m.vertex_images[fv[j]], c.coord);
          if (dot(a, b) < -1e-12)
            throw FieldError("su2 face " + std::to_string(f) +
                             " spans more than pi/2; subdivide the map");
        }
    }
  }
  return m;
}

Point interpolate(const SurfaceMap& m, int face, const std::array<double, 3>& bary) {
  double sum = bary[0] + bary[1] + bary[2];
  if (bary[0] < -1e-12 || bary[1] < -1e-12 || bary[2] < -1e-12 || std::abs(sum - 1) > 1e-9)
    throw FieldError("barycentric coordinates invalid");
  const auto& fv = m.surface.faces[face];
  Point out(m.target.point_dim(), 0.0);
  auto comps = flatten(m.target);
  for (const auto& c : comps) {
    switch (c.kind) {
      case TargetSpace::Kind::Circle:
      case TargetSpace::Kind::Torus: {
        int n = c.kind == TargetSpace::Kind::Circle ? 1 : 2;
        for (int i = 0; i < n; ++i) {
          double period = 2 * kPi * (i == 0 ? c.r1 : c.r2);
          LiftedCorner lc = lifted_corners(m, face, c.wind + i, c.coord + i, period);
          out[c.coord + i] = bary[0] * lc.l[0] + bary[1] * lc.l[1] + bary[2] * lc.l[2];
        }
        break;
      }
      case TargetSpace::Kind::SU2: {
        Quat q[3];
        for (int i = 0; i < 3; ++i) q[i] = quat_at(m.vertex_images[fv[i]], c.coord);
        put_quat(out, c.coord, geodesic_mean(q, bary));
        break;
      }
      case TargetSpace::Kind::Product: break;
    }
  }
  return reduce_point(m.target, out);
}

SurfaceMap subdivide_map(const SurfaceMap& m) {
  const auto& s = m.surface;
  mesh::TriangulatedSurface sub = mesh::subdivide(s);
  const int V = s.num_vertices, E = s.num_edges();
  auto periods = m.target.periods();
  auto coords = m.target.winding_coords();
  int wr = m.target.winding_rank();

  std::vector<Point> images(sub.num_vertices);
  for (int v = 0; v < V; ++v) images[v] = m.vertex_images[v];
  // midpoints: evaluate on the first adjacent face at the side midpoint
  for (int e = 0; e < E; ++e) {
    const auto& side = s.edges[e].sides[0];
    std::array<double, 3> bary{0, 0, 0};
    bary[side.local] = 0.5;
    bary[(side.local + 1) % 3] = 0.5;
    images[V + e] = interpolate(m, side.face, bary);
  }
  for (int f = 0; f < s.num_faces(); ++f)
    images[V + E + f] = interpolate(m, f, {1.0 / 3, 1.0 / 3, 1.0 / 3});

  // windings: compute lifted displacement of every sub-edge inside a parent
  // face chart, then recover the integer from the principal part
  std::vector<std::vector<int>> windings(sub.num_edges(), std::vector<int>(wr, 0));
  auto set_winding = [&](int sub_edge, int k, double delta, int tail_v, int head_v) {
    double pr = principal(images[head_v][coords[k]] - images[tail_v][coords[k]], periods[k]);
    windings[sub_edge][k] = static_cast<int>(std::llround((delta - pr) / periods[k]));
  };
  for (int f = 0; f < s.num_faces(); ++f) {
    for (size_t k = 0; k < coords.size(); ++k) {
      LiftedCorner lc = lifted_corners(m, f, static_cast<int>(k), coords[k], periods[k]);
      // lifted values of the six boundary points and the centroid
      const auto& fv = s.faces[f];
      double mid[3], cen = (lc.l[0] + lc.l[1] + lc.l[2]) / 3.0;
      for (int l = 0; l < 3; ++l) mid[l] = (lc.l[l] + lc.l[(l + 1) % 3]) / 2.0;
      int vcen = V + E + f;
      for (int l = 0; l < 3; ++l) {
        int vmid = V + s.face_edge[f][l];
        // fan edges: sub-face 6f+2l side 1 runs mid_l -> centroid;
        // 6f+2l+1 side 1 runs corner_{l+1} -> centroid
        int e1 = sub.edge_of({6 * f + 2 * l, 1});
        int d1 = sub.side_dir({6 * f + 2 * l, 1});
        set_winding(e1, static_cast<int>(k), (cen - mid[l]) * d1,
                    d1 == 1 ? vmid : vcen, d1 == 1 ? vcen : vmid);
        int e2 = sub.edge_of({6 * f + 2 * l + 1, 1});
        int d2 = sub.side_dir({6 * f + 2 * l + 1, 1});
        set_winding(e2, static_cast<int>(k), (cen - lc.l[(l + 1) % 3]) * d2,
                    d2 == 1 ? fv[(l + 1) % 3] : vcen, d2 == 1 ? vcen : fv[(l + 1) % 3]);
        // halves of the parent side: 6f+2l side 0 runs corner_l -> mid_l,
        // 6f+2l+1 side 0 runs mid_l -> corner_{l+1}
        int ea = sub.edge_of({6 * f + 2 * l, 0});
        int da = sub.side_dir({6 * f + 2 * l, 0});
        set_winding(ea, static_cast<int>(k), (mid[l] - lc.l[l]) * da,
                    da == 1 ? fv[l] : vmid, da == 1 ? vmid : fv[l]);
        int eb = sub.edge_of({6 * f + 2 * l + 1, 0});
        int db = sub.side_dir({6 * f + 2 * l + 1, 0});
        set_winding(eb, static_cast<int>(k), (lc.l[(l + 1) % 3] - mid[l]) * db,
                    db == 1 ? vmid : fv[(l + 1) % 3], db == 1 ? fv[(l + 1) % 3] : vmid);
      }
    }
  }
  return make_surface_map(sub, m.target, std::move(images), std::move(windings));
}

std::vector<SurfaceMap> split_map(const SurfaceMap& m, const mesh::CutResult& cut) {
  std::vector<SurfaceMap> out;
  int wr = m.target.winding_rank();
  auto periods = m.target.periods();
  auto coords = m.target.winding_coords();
  for (size_t p = 0; p < cut.pieces.size(); ++p) {
    const auto& piece = cut.pieces[p];
    std::vector<Point> images(piece.num_vertices, Point(m.target.point_dim(), 0.0));
    for (int lf = 0; lf < piece.num_faces(); ++lf) {
      int f = cut.face_map[p][lf];
      for (int k = 0; k < 3; ++k) images[piece.faces[lf][k]] = m.vertex_images[m.surface.faces[f][k]];
    }
    std::vector<std::vector<int>> windings(piece.num_edges(), std::vector<int>(wr, 0));
    for (int lf = 0; lf < piece.num_faces(); ++lf) {
      int f = cut.face_map[p][lf];
      for (int l = 0; l < 3; ++l) {
        int le = piece.edge_of({lf, l});
        int oe = m.surface.edge_of({f, l});
        // the lifted displacement transfers with the relative direction; the
        // winding is recovered against the piece's own principal part
        int sign = piece.side_dir({lf, l}) * m.surface.side_dir({f, l});
        const auto& ped = piece.edges[le];
        for (int k = 0; k < wr; ++k) {
          double dtrue = sign * canonical_delta(m, oe, k, coords[k], periods[k]);
          double pr = principal(
              images[ped.head][coords[k]] - images[ped.tail][coords[k]], periods[k]);
          windings[le][k] = static_cast<int>(std::llround((dtrue - pr) / periods[k]));
        }
      }
    }
    out.push_back(make_surface_map(piece, m.target, std::move(images), std::move(windings)));
  }
  return out;
}

// degree-4 symmetric triangle rule (6 points)
namespace {
struct QPoint {
  double l0, l1, l2, w;
};
const QPoint kTriRule[6] = {
    {0.108103018168070, 0.445948490915965, 0.445948490915965, 0.223381589678011},
    {0.445948490915965, 0.108103018168070, 0.445948490915965, 0.223381589678011},
    {0.445948490915965, 0.445948490915965, 0.108103018168070, 0.223381589678011},
    {0.816847572980459, 0.091576213509771, 0.091576213509771, 0.109951743655322},
    {0.091576213509771, 0.816847572980459, 0.091576213509771, 0.109951743655322},
    {0.091576213509771, 0.091576213509771, 0.816847572980459, 0.109951743655322},
};

// pushforward of the barycentric frame at an interior quadrature point
void face_frame(const SurfaceMap& m, int f, const QPoint& q, Point& p, Tangent& tu, Tangent& tv) {
  const double h = 1e-5;
  p = interpolate(m, f, {q.l0, q.l1, q.l2});
  auto periods = m.target.periods();
  auto coords = m.target.winding_coords();
  auto diff = [&](const Point& a, const Point& b) {
    Tangent d(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
      d[i] = a[i] - b[i];
      for (size_t k = 0; k < coords.size(); ++k)
        if (coords[k] == static_cast<int>(i)) d[i] = principal(d[i], periods[k]);
      d[i] /= 2 * h;
    }
    return project_tangent(m.target, p, d);
  };
  // u direction: l1 grows at the expense of l0; v: l2 grows at the expense of l0
  Point pu = interpolate(m, f, {q.l0 - h, q.l1 + h, q.l2});
  Point mu = interpolate(m, f, {q.l0 + h, q.l1 - h, q.l2});
  Point pv = interpolate(m, f, {q.l0 - h, q.l1, q.l2 + h});
  Point mv = interpolate(m, f, {q.l0 + h, q.l1, q.l2 - h});
  tu = diff(pu, mu);
  tv = diff(pv, mv);
}

}  // namespace

double pullback_integrate(const FormOracle& form, const SurfaceMap& m,
                          const IntegrateOptions& opt) {
  if (form.degree != 2) throw FieldError("pullback_integrate needs a 2-form");
  if (!form.target.same_as(m.target)) throw FieldError("form/map target mismatch");
  std::vector<int> all_faces;
  const std::vector<int>* faces = opt.faces;
  if (!faces) {
    all_faces.resize(m.surface.num_faces());
    for (int f = 0; f < m.surface.num_faces(); ++f) all_faces[f] = f;
    faces = &all_faces;
  }
  const std::vector<int>* signs = opt.face_signs;
  if (!signs && !m.surface.orientable())
    throw FieldError("integration over a non-orientable surface needs explicit face signs");
  double total = 0;
  for (int f : *faces) {
    double sgn = signs ? static_cast<double>((*signs)[f])
                       : static_cast<double>(m.surface.orient_sign[f]);
    if (sgn == 0) continue;
    double acc = 0;
    Point p;
    Tangent tu, tv;
    for (const auto& q : kTriRule) {
      face_frame(m, f, q, p, tu, tv);
      acc += q.w * form(p, {tu, tv});
    }
    total += sgn * acc * 0.5;  // reference triangle area
  }
  return total;
}

// ---------------------------------------------------------------------------
// loops

LoopPath loop_of_circle(const SurfaceMap& m, const mesh::Circle& c) {
  LoopPath loop;
  loop.target = m.target;
  int wr = m.target.winding_rank();
  for (int i = 0; i < c.length(); ++i) {
    const auto& e = m.surface.edges[c.edges[i]];
    int tail = c.dirs[i] == 1 ? e.tail : e.head;
    loop.points.push_back(m.vertex_images[tail]);
    std::vector<int> w(wr);
    for (int k = 0; k < wr; ++k) w[k] = c.dirs[i] * m.edge_windings[c.edges[i]][k];
    loop.windings.push_back(w);
  }
  return loop;
}

LoopPath reverse_loop(const LoopPath& p) {
  LoopPath r;
  r.target = p.target;
  int n = static_cast<int>(p.points.size());
  for (int i = 0; i < n; ++i) {
    // reversed loop visits points n-1-i, segments reversed with flipped windings
    r.points.push_back(p.points[(n - i) % n]);
    std::vector<int> w = p.windings[(n - 1 - i + n) % n];
    for (auto& x : w) x = -x;
    r.windings.push_back(w);
  }
  return r;
}

LoopPath product_loop(const LoopPath& a, const LoopPath& b) {
  if (a.points.size() != b.points.size())
    throw FieldError("product loop needs equal segment counts");
  LoopPath r;
  r.target = TargetSpace::product(a.target, b.target);
  for (size_t i = 0; i < a.points.size(); ++i) {
    Point p = a.points[i];
    p.insert(p.end(), b.points[i].begin(), b.points[i].end());
    r.points.push_back(p);
    std::vector<int> w = a.windings[i];
    w.insert(w.end(), b.windings[i].begin(), b.windings[i].end());
    r.windings.push_back(w);
  }
  return r;
}

namespace {

// evaluate one segment: circle coordinates move along the declared lift,
// su2 coordinates slerp
Point segment_eval(const LoopPath& loop, int i, double s, const std::vector<Comp>& comps) {
  int n = static_cast<int>(loop.points.size());
  const Point& a = loop.points[i];
  const Point& b = loop.points[(i + 1) % n];
  Point out(loop.target.point_dim(), 0.0);
  for (const auto& c : comps) {
    switch (c.kind) {
      case TargetSpace::Kind::Circle:
      case TargetSpace::Kind::Torus: {
        int k = c.kind == TargetSpace::Kind::Circle ? 1 : 2;
        for (int j = 0; j < k; ++j) {
          double period = 2 * kPi * (j == 0 ? c.r1 : c.r2);
          double delta = principal(b[c.coord + j] - a[c.coord + j], period) +
                         period * loop.windings[i][c.wind + j];
          out[c.coord + j] = a[c.coord + j] + s * delta;
        }
        break;
      }
      case TargetSpace::Kind::SU2: {
        Quat qa = quat_at(a, c.coord), qb = quat_at(b, c.coord);
        if (dot(qa, qb) < -1e-12)
          throw FieldError("loop segment spans more than pi/2 on su2");
        Quat rel = qa.conj() * qb;
        put_quat(out, c.coord, (qa * qexp(qlog(rel) * s)).normalized());
        break;
      }
      case TargetSpace::Kind::Product: break;
    }
  }
  return reduce_point(loop.target, out);
}

Tangent segment_velocity(const LoopPath& loop, int i, double s, const std::vector<Comp>& comps,
                         const Point& at) {
  int n = static_cast<int>(loop.points.size());
  const Point& a = loop.points[i];
  const Point& b = loop.points[(i + 1) % n];
  Tangent v(loop.target.point_dim(), 0.0);
  for (const auto& c : comps) {
    switch (c.kind) {
      case TargetSpace::Kind::Circle:
      case TargetSpace::Kind::Torus: {
        int k = c.kind == TargetSpace::Kind::Circle ? 1 : 2;
        for (int j = 0; j < k; ++j) {
          double period = 2 * kPi * (j == 0 ? c.r1 : c.r2);
          v[c.coord + j] = principal(b[c.coord + j] - a[c.coord + j], period) +
                           period * loop.windings[i][c.wind + j];
        }
        break;
      }
      case TargetSpace::Kind::SU2: {
        // d/ds of qa exp(s log(qa^-1 qb)) is the point times the log
        Quat qa = quat_at(a, c.coord), qb = quat_at(b, c.coord);
        Quat l = qlog(qa.conj() * qb);
        Quat q = (qa * qexp(l * s)).normalized();
        put_quat(v, c.coord, q * l);
        break;
      }
      case TargetSpace::Kind::Product: break;
    }
  }
  (void)at;
  return v;
}

// 8-point Gauss-Legendre on [0,1]
const double kGLNode[8] = {0.01985507175123186, 0.10166676129318664, 0.2372337950418355,
                           0.40828267875217505, 0.5917173212478249,  0.7627662049581645,
                           0.8983332387068134,  0.9801449282487682};
const double kGLWeight[8] = {0.05061426814518813, 0.11119051722668723, 0.15685332293894364,
                             0.18134189168918097, 0.18134189168918097, 0.15685332293894364,
                             0.11119051722668723, 0.05061426814518813};

}  // namespace

Point loop_eval(const LoopPath& p, int segment, double s) {
  auto comps = flatten(p.target);
  return segment_eval(p, segment, s, comps);
}

Complex line_holonomy_u1(const FormOracle& a, const LoopPath& loop) {
  if (a.degree != 1) throw FieldError("line holonomy needs a 1-form");
  if (loop.points.empty()) throw FieldError("empty loop");
  auto comps = flatten(loop.target);
  // per-segment integrals accumulated in a fixed order so that basepoint
  // rotations are exactly invariant
  std::vector<double> seg(loop.points.size(), 0.0);
  for (size_t i = 0; i < loop.points.size(); ++i) {
    double acc = 0;
    for (int g = 0; g < 8; ++g) {
      Point p = segment_eval(loop, static_cast<int>(i), kGLNode[g], comps);
      Tangent v = segment_velocity(loop, static_cast<int>(i), kGLNode[g], comps, p);
      acc += kGLWeight[g] * a(p, {v});
    }
    seg[i] = acc;
  }
  // summing in sorted order makes the result independent of where the loop
  // starts (rotations permute identical segment values)
  std::sort(seg.begin(), seg.end());
  double total = 0;
  for (double x : seg) total += x;
  return std::exp(Complex(0, 2 * kPi * total));
}

double open_line_integral_u1(const FormOracle& a, const LoopPath& path) {
  if (a.degree != 1) throw FieldError("line integral needs a 1-form");
  if (path.points.size() < 2) throw FieldError("open path needs at least two points");
  auto comps = flatten(path.target);
  double total = 0;
  for (size_t i = 0; i + 1 < path.points.size(); ++i) {
    for (int g = 0; g < 8; ++g) {
      Point p = segment_eval(path, static_cast<int>(i), kGLNode[g], comps);
      Tangent v = segment_velocity(path, static_cast<int>(i), kGLNode[g], comps, p);
      total += kGLWeight[g] * a(p, {v});
    }
  }
  return total;
}

CMat line_holonomy(const Connection& conn, const LoopPath& loop) {
  if (conn.rank < 1) throw FieldError("rank 0 module");
  if (conn.rank == 1) {
    CMat m(1);
    m.at(0, 0) = line_holonomy_u1(conn.a, loop);
    return m;
  }
  auto comps = flatten(loop.target);
  auto rhs = [&](int i, double s, const CMat& u) {
    Point p = segment_eval(loop, i, s, comps);
    Tangent v = segment_velocity(loop, i, s, comps, p);
    return conn.matrix(p, v) * u * Complex(0, 2 * kPi);
  };
  auto run = [&](int steps_per_segment) {
    CMat u = CMat::identity(conn.rank);
    for (size_t i = 0; i < loop.points.size(); ++i) {
      double h = 1.0 / steps_per_segment;
      for (int k = 0; k < steps_per_segment; ++k) {
        double s = k * h;
        CMat k1 = rhs(static_cast<int>(i), s, u);
        CMat k2 = rhs(static_cast<int>(i), s + h / 2, u + k1 * Complex(h / 2));
        CMat k3 = rhs(static_cast<int>(i), s + h / 2, u + k2 * Complex(h / 2));
        CMat k4 = rhs(static_cast<int>(i), s + h, u + k3 * Complex(h));
        u = u + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * Complex(h / 6);
      }
    }
    return u;
  };
  int steps = 8;
  CMat prev = run(steps);
  for (int it = 0; it < 6; ++it) {
    steps *= 2;
    CMat next = run(steps);
    if (next.max_abs_diff(prev) < 1e-8) return next;
    prev = next;
  }
  return prev;
}

// ---------------------------------------------------------------------------
// sampling

std::vector<double> Halton::next() {
  static const int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
  if (dim > 12) throw FieldError("halton dimension too large");
  std::vector<double> out(dim);
  for (int d = 0; d < dim; ++d) {
    int base = primes[d];
    double f = 1.0, r = 0.0;
    long long i = index;
    while (i > 0) {
      f /= base;
      r += f * (i % base);
      i /= base;
    }
    out[d] = r;
  }
  ++index;
  return out;
}

namespace {

// flatten a multi-dimensional Halton stream into scalar draws
struct ScalarStream {
  Halton& h;
  std::vector<double> buf;
  size_t pos = 0;
  double draw() {
    if (pos >= buf.size()) {
      buf = h.next();
      pos = 0;
    }
    return buf[pos++];
  }
};

// two uniforms to two gaussians
void box_muller(double u1, double u2, double& g1, double& g2) {
  u1 = std::max(u1, 1e-12);
  double r = std::sqrt(-2.0 * std::log(u1));
  g1 = r * std::cos(2 * kPi * u2);
  g2 = r * std::sin(2 * kPi * u2);
}

}  // namespace

Point sample_point(const TargetSpace& t, Halton& h) {
  ScalarStream st{h, {}, 0};
  Point p(t.point_dim(), 0.0);
  for (const auto& c : flatten(t)) {
    switch (c.kind) {
      case TargetSpace::Kind::Circle:
        p[c.coord] = st.draw() * 2 * kPi * c.r1;
        break;
      case TargetSpace::Kind::Torus:
        p[c.coord] = st.draw() * 2 * kPi * c.r1;
        p[c.coord + 1] = st.draw() * 2 * kPi * c.r2;
        break;
      case TargetSpace::Kind::SU2: {
        double g[4];
        box_muller(st.draw(), st.draw(), g[0], g[1]);
        box_muller(st.draw(), st.draw(), g[2], g[3]);
        Quat q{g[0], g[1], g[2], g[3]};
        put_quat(p, c.coord, q.normalized());
        break;
      }
      case TargetSpace::Kind::Product: break;
    }
  }
  return reduce_point(t, p);
}

Tangent sample_tangent(const TargetSpace& t, const Point& p, Halton& h) {
  ScalarStream st{h, {}, 0};
  int d = t.chart_dim();
  std::vector<double> c(d);
  for (int i = 0; i < d; ++i) c[i] = st.draw() - 0.5;
  double n2 = 0;
  for (double x : c) n2 += x * x;
  if (n2 < 1e-12) c[0] = 0.5;
  Tangent v = chart_tangent(t, p, std::vector<double>(d, 0.0), c);
  double n = 0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n < 1e-12) throw FieldError("degenerate sampled tangent");
  for (double& x : v) x /= n;
  return v;
}

}  // namespace gerbecalc::fields
