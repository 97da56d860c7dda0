#include "gerbecalc/gerbedata.hpp"

#include <algorithm>
#include <cmath>

namespace gerbecalc::gerbe {

using fields::FormOracle;
using fields::Halton;
using fields::kPi;
using fields::Point;
using fields::Tangent;

namespace {

void check_shapes(const DeligneSurfaceData& d) {
  const auto& s = d.surface;
  if (static_cast<int>(d.chart_of_face.size()) != s.num_faces() ||
      static_cast<int>(d.b.size()) != s.num_faces() ||
      static_cast<int>(d.a.size()) != s.num_edges() ||
      static_cast<int>(d.g.size()) != s.num_vertices)
    throw GerbeError("local data shapes do not match the surface");
}

double rel(double lhs, double rhs) {
  return std::abs(lhs - rhs) / std::max({1.0, std::abs(lhs), std::abs(rhs)});
}

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

}  // namespace

DeligneSurfaceData gauge_transform(const DeligneSurfaceData& data, const DeligneGauge& gauge) {
  check_shapes(data);
  const auto& s = data.surface;
  if (static_cast<int>(gauge.lambda.size()) != s.num_edges() ||
      static_cast<int>(gauge.u.size()) != s.num_edges())
    throw GerbeError("gauge shapes do not match the surface");

  DeligneSurfaceData out = data;
  for (int e = 0; e < s.num_edges(); ++e) {
    const auto& edge = s.edges[e];
    if (std::abs(std::abs(gauge.u[e]) - 1) > 1e-9)
      throw GerbeError("gauge phases must be unit complex numbers");
    if (edge.boundary()) {
      if (gauge.lambda[e] != 0)
        throw GerbeError("lambda gauge on a boundary edge has nowhere to telescope");
    } else {
      out.a[e] += gauge.lambda[e];
      out.b[edge.sides[0].face] -= gauge.lambda[e];
    }
    out.g[edge.head] *= gauge.u[e];
    out.g[edge.tail] *= std::conj(gauge.u[e]);
  }
  return out;
}

ValidationReport validate_cocycle(const DeligneSurfaceData& data) {
  ValidationReport rep;
  rep.check = "cocycle";
  rep.tolerance = 1e-9;

  const auto& s = data.surface;
  if (static_cast<int>(data.chart_of_face.size()) != s.num_faces() ||
      static_cast<int>(data.b.size()) != s.num_faces() ||
      static_cast<int>(data.a.size()) != s.num_edges() ||
      static_cast<int>(data.g.size()) != s.num_vertices) {
    rep.notes.push_back("local data shapes do not match the surface");
    rep.pass = false;
    return rep;
  }

  double worst_phase = 0, sum = 0;
  for (int v = 0; v < s.num_vertices; ++v) {
    double r = std::abs(std::abs(data.g[v]) - 1);
    sum += r;
    worst_phase = std::max(worst_phase, r);
    if (r > rep.tolerance) rep.failing_cells.push_back(v);
  }
  rep.parts.emplace_back("vertex_phase_modulus", worst_phase);

  double worst_boundary = 0;
  for (int e = 0; e < s.num_edges(); ++e)
    if (s.edges[e].boundary()) worst_boundary = std::max(worst_boundary, std::abs(data.a[e]));
  rep.parts.emplace_back("boundary_a_zero", worst_boundary);

  bool finite = true;
  for (double x : data.b) finite = finite && std::isfinite(x);
  for (double x : data.a) finite = finite && std::isfinite(x);
  for (auto z : data.g) finite = finite && std::isfinite(z.real()) && std::isfinite(z.imag());
  if (!finite) rep.notes.push_back("non-finite entries");

  rep.max_residual = std::max(worst_phase, worst_boundary);
  rep.mean_residual = s.num_vertices ? sum / s.num_vertices : 0;
  rep.pass = finite && rep.max_residual <= rep.tolerance;
  return rep;
}

TrivialGerbe trivial_gerbe(FormOracle omega) {
  if (omega.degree != 2) throw GerbeError("a curving must be a two-form");
  return {std::move(omega)};
}

ValidationReport validate_jandl(const JandlTrivialData& data, const fields::SmoothMap& k,
                                int n_samples) {
  if (!k.domain.same_as(data.omega.target) || !k.codomain.same_as(data.omega.target))
    throw GerbeError("involution does not act on the data's target");
  if (data.omega.degree != 2 || data.line_a.degree != 1)
    throw GerbeError("jandl data needs a two-form curving and a one-form connection");

  ValidationReport rep;
  rep.check = "jandl";
  rep.tolerance = 1e-4;
  const auto& t = data.omega.target;
  auto komega = fields::pullback_form(k, data.omega);
  auto ka = fields::pullback_form(k, data.line_a);

  double curv = 0, equi = 0, iso = 0, sum = 0;
  Halton h(std::max(2, t.chart_dim() + 2));
  for (int i = 0; i < n_samples; ++i) {
    Point p = fields::sample_point(t, h);
    Tangent u = fields::sample_tangent(t, p, h);
    Tangent v = fields::sample_tangent(t, p, h);

    double lhs = fields::exterior_derivative_fd(data.line_a, p, {u, v});
    double rhs = -data.omega.eval(p, {u, v}) - komega.eval(p, {u, v});
    double r1 = rel(lhs, rhs);

    double r2 = std::abs(data.phi.eval(k.apply(p)) * data.phi.eval(p) - 1.0);

    double shift = data.line_a.eval(p, {u}) - ka.eval(p, {u});
    double r3 = rel(shift, fields::dlog_im(data.phi, p, u) / (2 * kPi));

    curv = std::max(curv, r1);
    equi = std::max(equi, r2);
    iso = std::max(iso, r3);
    sum += std::max({r1, r2, r3});
  }
  rep.parts.emplace_back("curvature", curv);
  rep.parts.emplace_back("equivariance", equi);
  rep.parts.emplace_back("isomorphism", iso);
  rep.notes.push_back("equivariance tolerance 1e-9");
  rep.max_residual = std::max({curv, equi, iso});
  rep.mean_residual = n_samples ? sum / n_samples : 0;
  rep.pass = curv <= 1e-4 && equi <= 1e-9 && iso <= 1e-4;
  return rep;
}

bool WorldVolume::contains(const Point& p, double tol) const {
  if (static_cast<int>(p.size()) != target.point_dim()) return false;
  switch (kind) {
    case Kind::Whole:
      return true;
    case Kind::ClassAngle: {
      double n = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2] + p[3] * p[3]);
      return std::abs(n - 1) <= tol && std::abs(p[0] - std::cos(theta)) <= tol;
    }
    case Kind::Point: {
      auto periods = target.periods();
      auto coords = target.winding_coords();
      for (int i = 0; i < target.point_dim(); ++i) {
        double d = p[i] - at[i];
        auto it = std::find(coords.begin(), coords.end(), i);
        if (it != coords.end()) d = fields::principal(d, periods[it - coords.begin()]);
        if (std::abs(d) > tol) return false;
      }
      return true;
    }
  }
  return false;
}

Point WorldVolume::sample(Halton& h) const {
  switch (kind) {
    case Kind::Whole:
      return fields::sample_point(target, h);
    case Kind::ClassAngle: {
      Draw d{h, {}, 0};
      double z = 2 * d() - 1;
      double r = std::sqrt(std::max(0.0, 1 - z * z));
      double ph = 2 * kPi * d();
      double s = std::sin(theta);
      return {std::cos(theta), s * r * std::cos(ph), s * r * std::sin(ph), s * z};
    }
    case Kind::Point:
      if (at.empty()) throw GerbeError("sampling descriptor empty");
      return fields::reduce_point(target, at);
  }
  throw GerbeError("sampling descriptor empty");
}

WorldVolume whole_world_volume(const fields::TargetSpace& t) {
  WorldVolume w;
  w.target = t;
  w.kind = WorldVolume::Kind::Whole;
  return w;
}

WorldVolume class_world_volume(double theta) {
  if (!(theta >= 0 && theta <= kPi)) throw GerbeError("class angle must lie in [0, pi]");
  WorldVolume w;
  w.target = fields::TargetSpace::su2();
  w.kind = WorldVolume::Kind::ClassAngle;
  w.theta = theta;
  return w;
}

WorldVolume point_world_volume(const fields::TargetSpace& t, Point at) {
  WorldVolume w;
  w.target = t;
  w.kind = WorldVolume::Kind::Point;
  w.at = fields::reduce_point(t, std::move(at));
  return w;
}

ValidationReport validate_dbrane(const FormOracle& h, const DBraneRecord& brane, int n_samples) {
  if (!h.target.same_as(brane.world_volume.target) ||
      !brane.omega_q.target.same_as(brane.world_volume.target))
    throw GerbeError("curvature, brane form and world volume must share a target");
  if (h.degree != 3 || brane.omega_q.degree != 2)
    throw GerbeError("expected a three-form curvature and a two-form on the brane");

  ValidationReport rep;
  rep.check = "dbrane";
  rep.tolerance = 1e-4;
  const auto& t = h.target;
  Halton hal(std::max(2, t.chart_dim() + 3));
  double sum = 0;
  for (int i = 0; i < n_samples; ++i) {
    Point p = brane.world_volume.sample(hal);
    std::vector<Tangent> ts;
    for (int j = 0; j < 3; ++j) ts.push_back(fields::sample_tangent(t, p, hal));
    double lhs = h.eval(p, ts);
    double rhs = fields::exterior_derivative_fd(brane.omega_q, p, ts);
    double r = rel(lhs, rhs);
    rep.max_residual = std::max(rep.max_residual, r);
    sum += r;
  }
  rep.parts.emplace_back("curvature_restriction", rep.max_residual);
  rep.mean_residual = n_samples ? sum / n_samples : 0;
  rep.pass = rep.max_residual <= rep.tolerance;
  return rep;
}

bool BiWorldVolume::contains(const Point& p, double tol) const {
  if (static_cast<int>(p.size()) != target.point_dim()) return false;
  switch (kind) {
    case Kind::BiClass: {
      fields::Quat g1{p[0], p[1], p[2], p[3]}, g2{p[4], p[5], p[6], p[7]};
      fields::Quat m = g1 * g2.conj();
      return std::abs(m.norm() - 1) <= tol && std::abs(m.w - std::cos(theta)) <= tol;
    }
    case Kind::ShiftedDiagonal: {
      double period = target.periods()[0];
      return std::abs(fields::principal(p[0] - p[1] - shift, period)) <= tol;
    }
  }
  return false;
}

Point BiWorldVolume::sample(Halton& h) const {
  switch (kind) {
    case Kind::BiClass: {
      Draw d{h, {}, 0};
      double z = 2 * d() - 1;
      double r = std::sqrt(std::max(0.0, 1 - z * z));
      double ph = 2 * kPi * d();
      double s = std::sin(theta);
      fields::Quat m{std::cos(theta), s * r * std::cos(ph), s * r * std::sin(ph), s * z};
      Point q = fields::sample_point(fields::TargetSpace::su2(), h);
      fields::Quat g2{q[0], q[1], q[2], q[3]};
      fields::Quat g1 = (m * g2).normalized();
      return {g1.w, g1.x, g1.y, g1.z, g2.w, g2.x, g2.y, g2.z};
    }
    case Kind::ShiftedDiagonal: {
      Draw d{h, {}, 0};
      double period = target.periods()[0];
      double y = d() * period;
      return fields::reduce_point(target, {y, y - shift});
    }
  }
  throw GerbeError("sampling descriptor empty");
}

BiWorldVolume biclass_world_volume(double theta) {
  if (!(theta >= 0 && theta <= kPi)) throw GerbeError("class angle must lie in [0, pi]");
  BiWorldVolume w;
  auto su2 = fields::TargetSpace::su2();
  w.target = fields::TargetSpace::product(su2, su2);
  w.kind = BiWorldVolume::Kind::BiClass;
  w.theta = theta;
  return w;
}

BiWorldVolume shifted_diagonal_world_volume(const fields::TargetSpace& circle, double shift) {
  if (circle.kind != fields::TargetSpace::Kind::Circle)
    throw GerbeError("shifted diagonal needs a circle target");
  BiWorldVolume w;
  w.target = fields::TargetSpace::product(circle, circle);
  w.kind = BiWorldVolume::Kind::ShiftedDiagonal;
  w.shift = shift;
  return w;
}

ValidationReport validate_bibrane(const FormOracle& h1, const FormOracle& h2,
                                  const BiBraneRecord& bibrane, int n_samples) {
  const auto& t = bibrane.world_volume.target;
  if (t.kind != fields::TargetSpace::Kind::Product || !bibrane.varpi.target.same_as(t) ||
      !h1.target.same_as(t.factors[0]) || !h2.target.same_as(t.factors[1]))
    throw GerbeError("bi-brane targets do not match the two curvatures");
  if (h1.degree != 3 || h2.degree != 3 || bibrane.varpi.degree != 2)
    throw GerbeError("expected three-form curvatures and a two-form on the bi-brane");

  ValidationReport rep;
  rep.check = "bibrane";
  rep.tolerance = 1e-4;
  int n1 = t.factors[0].point_dim();
  int nt = t.point_dim();
  Halton hal(std::max(2, t.chart_dim() + 3));
  double sum = 0;
  for (int i = 0; i < n_samples; ++i) {
    Point p = bibrane.world_volume.sample(hal);
    std::vector<Tangent> ts;
    for (int j = 0; j < 3; ++j) ts.push_back(fields::sample_tangent(t, p, hal));
    Point p1(p.begin(), p.begin() + n1), p2(p.begin() + n1, p.end());
    std::vector<Tangent> t1, t2;
    for (auto& v : ts) {
      t1.emplace_back(v.begin(), v.begin() + n1);
      t2.emplace_back(v.begin() + n1, v.begin() + nt);
    }
    double lhs = h1.eval(p1, t1) - h2.eval(p2, t2);
    double rhs = fields::exterior_derivative_fd(bibrane.varpi, p, ts);
    double r = rel(lhs, rhs);
    rep.max_residual = std::max(rep.max_residual, r);
    sum += r;
  }
  rep.parts.emplace_back("curvature_step", rep.max_residual);
  rep.mean_residual = n_samples ? sum / n_samples : 0;
  rep.pass = rep.max_residual <= rep.tolerance;
  return rep;
}

}  // namespace gerbecalc::gerbe
