#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gerbecalc/mesh.hpp"

// Target spaces (circle, torus, SU(2), products), differential forms as
// closed-form oracles, and piecewise-smooth maps from triangulated surfaces.
// Points are flat coordinate vectors: circle = one coordinate of period 2*pi*R,
// torus = two such, su2 = a unit quaternion (w,x,y,z), products concatenate.
// Circle-valued coordinates carry explicit per-edge winding integers so that
// degrees and Wilson phases are exact and never inferred from shortest arcs.

namespace gerbecalc::fields {

class FieldError : public std::runtime_error {
public:
  explicit FieldError(const std::string& what) : std::runtime_error(what) {}
};

using Point = std::vector<double>;
using Tangent = std::vector<double>;
using Complex = std::complex<double>;

constexpr double kPi = 3.14159265358979323846;

// reduce to (-P/2, P/2]
double principal(double x, double period);

// ---------------------------------------------------------------------------
// quaternions

struct Quat {
  double w = 1, x = 0, y = 0, z = 0;
  Quat() = default;
  Quat(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}
  Quat conj() const { return {w, -x, -y, -z}; }
  double norm() const;
  Quat normalized() const;
  Quat operator*(const Quat& o) const;
  Quat operator+(const Quat& o) const { return {w + o.w, x + o.x, y + o.y, z + o.z}; }
  Quat operator-(const Quat& o) const { return {w - o.w, x - o.x, y - o.y, z - o.z}; }
  Quat operator*(double s) const { return {w * s, x * s, y * s, z * s}; }
};
double dot(const Quat& a, const Quat& b);
Quat qexp(const Quat& pure);   // exp of a purely imaginary quaternion
Quat qlog(const Quat& unit);   // principal log of a unit quaternion (pure result)

// ---------------------------------------------------------------------------
// target spaces

struct TargetSpace {
  enum class Kind { Circle, Torus, SU2, Product };
  Kind kind = Kind::Circle;
  std::vector<double> radii;          // Circle {R}; Torus {R1, R2}
  std::vector<TargetSpace> factors;   // Product: exactly two

  static TargetSpace circle(double R);
  static TargetSpace torus(double R1, double R2);
  static TargetSpace su2();
  static TargetSpace product(const TargetSpace& a, const TargetSpace& b);

  int point_dim() const;
  int chart_dim() const;
  int winding_rank() const;              // number of circle-valued coordinates
  std::vector<double> periods() const;   // period of each circle-valued coordinate
  // offsets of circle-valued coordinates within the point vector
  std::vector<int> winding_coords() const;
  bool same_as(const TargetSpace& o, double tol = 1e-12) const;
  std::string describe() const;
};

Point reduce_point(const TargetSpace& t, Point p);   // wrap/renormalize
void check_point(const TargetSpace& t, const Point& p);

// chart centered at `center`: circle/torus translate coordinates, su2 maps
// (x1,x2,x3) to center * exp(x1 i + x2 j + x3 k), products act blockwise
Point chart_point(const TargetSpace& t, const Point& center, const std::vector<double>& coords);
// chart coordinates of a point near the center (principal values / su2 log)
std::vector<double> chart_coords(const TargetSpace& t, const Point& center, const Point& p);
// express a tangent at chart(center, at) in chart coordinate velocities
// (finite-difference Jacobian + least squares)
std::vector<double> tangent_to_chart(const TargetSpace& t, const Point& center,
                                     const std::vector<double>& at, const Tangent& v);
// push a chart coordinate velocity to an ambient tangent at chart(center, at)
Tangent chart_tangent(const TargetSpace& t, const Point& center,
                      const std::vector<double>& at, const std::vector<double>& dc);
// project an ambient vector onto the tangent space at p (su2 components)
Tangent project_tangent(const TargetSpace& t, const Point& p, Tangent v);

// ---------------------------------------------------------------------------
// forms

struct FormOracle {
  int degree = 0;
  TargetSpace target;
  std::string name;
  std::function<double(const Point&, const std::vector<Tangent>&)> eval;

  double operator()(const Point& p, const std::vector<Tangent>& ts) const;
};

FormOracle zero_form(const TargetSpace& t, int degree);
FormOracle scaled_form(const FormOracle& f, double c);
FormOracle sum_form(const FormOracle& f, const FormOracle& g);
// c * dx ^ dy on a torus target
FormOracle torus_volume_form(const TargetSpace& t, double c);
// c * dx on a circle target (or a named coordinate of a torus)
FormOracle circle_one_form(const TargetSpace& t, double c, int coord = 0);

// exterior derivative via central finite differences in a chart (step 1e-4);
// optional chart_center recomputes in a chart centered elsewhere (results must
// agree -- used to test chart independence)
double exterior_derivative_fd(const FormOracle& f, const Point& p,
                              const std::vector<Tangent>& tangents,
                              const std::optional<Point>& chart_center = std::nullopt);
FormOracle d_form(const FormOracle& f);

// smooth target maps (involutions and the like), with FD pushforward/pullback
struct SmoothMap {
  TargetSpace domain;
  TargetSpace codomain;
  std::string name;
  std::function<Point(const Point&)> apply;
};
Tangent pushforward_fd(const SmoothMap& m, const Point& p, const Tangent& v);  // step 1e-5
FormOracle pullback_form(const SmoothMap& m, const FormOracle& f);

// named involutions: "circle.flip" (x -> -x), "torus.klein" ((x,y) -> (x+P1/2, -y)),
// "su2.inverse" (g -> g^-1), "su2.minus-inverse" (g -> -g^-1)
SmoothMap named_involution(const TargetSpace& t, const std::string& name);

// unit-complex function on the target
struct PhaseFunction {
  TargetSpace target;
  std::string name;
  std::function<Complex(const Point&)> eval;
};
// Im d(log phi) evaluated on a tangent, by finite differences along a chart curve
double dlog_im(const PhaseFunction& phi, const Point& p, const Tangent& v);

// ---------------------------------------------------------------------------
// small complex matrices (connections of rank > 1 and their holonomies)

struct CMat {
  int n = 0;
  std::vector<Complex> a;  // row-major
  CMat() = default;
  explicit CMat(int n_) : n(n_), a(n_ * n_, Complex(0)) {}
  static CMat identity(int n);
  Complex& at(int i, int j) { return a[i * n + j]; }
  const Complex& at(int i, int j) const { return a[i * n + j]; }
  CMat operator*(const CMat& o) const;
  CMat operator+(const CMat& o) const;
  CMat operator*(Complex s) const;
  Complex trace() const;
  double max_abs_diff(const CMat& o) const;
};

struct Connection {
  int rank = 1;
  TargetSpace target;
  FormOracle a;  // rank 1: real 1-form, holonomy exp(2 pi i oint a)
  // rank > 1: Hermitian matrix-valued 1-form, linear in the tangent
  std::function<CMat(const Point&, const Tangent&)> matrix;
};
Connection u1_connection(const FormOracle& a);
Connection flat_diagonal_connection(const TargetSpace& t, const std::vector<FormOracle>& diag);

// ---------------------------------------------------------------------------
// surface maps

struct SurfaceMap {
  mesh::TriangulatedSurface surface;
  TargetSpace target;
  std::vector<Point> vertex_images;             // reduced, one per vertex
  std::vector<std::vector<int>> edge_windings;  // per edge (canonical direction), one int per circle coordinate
};

// validates shapes, reduces images, checks per-face closure of edge lifts and
// the su2 spread bound (faces spanning more than pi/2 are rejected)
SurfaceMap make_surface_map(const mesh::TriangulatedSurface& s, const TargetSpace& t,
                            std::vector<Point> vertex_images,
                            std::vector<std::vector<int>> edge_windings);

// barycentric evaluation: affine in lifted coordinates for circle factors,
// geodesic (spherical weighted mean) for su2 factors
Point interpolate(const SurfaceMap& m, int face, const std::array<double, 3>& bary);

// map on the subdivided surface agreeing with m (midpoints and centroids
// evaluated through interpolate, windings split accordingly)
SurfaceMap subdivide_map(const SurfaceMap& m);

// restriction of a map to the pieces of a defect cut
std::vector<SurfaceMap> split_map(const SurfaceMap& m, const mesh::CutResult& cut);

struct IntegrateOptions {
  const std::vector<int>* faces = nullptr;       // subset of faces (default: all)
  const std::vector<int>* face_signs = nullptr;  // per-face orientation signs (default: coherent orientation)
};
// sum over faces of the degree-4 triangle quadrature of the pulled-back form,
// pushing tangents forward by central differences of interpolate (step 1e-5)
double pullback_integrate(const FormOracle& form, const SurfaceMap& m,
                          const IntegrateOptions& opt = {});

// ---------------------------------------------------------------------------
// loops and line holonomy

// closed polygonal loop in the target: segment i runs from points[i] to
// points[(i+1) % n] with the given winding lift, interpolated like map edges
struct LoopPath {
  TargetSpace target;
  std::vector<Point> points;
  std::vector<std::vector<int>> windings;
};
LoopPath loop_of_circle(const SurfaceMap& m, const mesh::Circle& c);
LoopPath reverse_loop(const LoopPath& p);
// pointwise pair of two loops of equal length, target = product
LoopPath product_loop(const LoopPath& a, const LoopPath& b);
Point loop_eval(const LoopPath& p, int segment, double s);

// rank 1: exp(2 pi i oint a) with Gauss-Legendre segment quadrature and a
// basepoint-independent accumulation order; rank > 1: path-ordered integration
// of U' = 2 pi i A U by RK4 with step halving to 1e-8
Complex line_holonomy_u1(const FormOracle& a, const LoopPath& loop);
CMat line_holonomy(const Connection& conn, const LoopPath& loop);
// integral of a 1-form along the open polygonal path p0..p_{n-1} (n-1
// segments, no closing segment; the last winding entry is ignored)
double open_line_integral_u1(const FormOracle& a, const LoopPath& path);

// ---------------------------------------------------------------------------
// sampling

struct Halton {
  int dim = 1;
  long long index = 1;
  explicit Halton(int d) : dim(d) {}
  std::vector<double> next();
};

// low-discrepancy point on the target (uniform in coordinates; su2 via
// gaussian-shaped inverse transform, adequate for residual sampling)
Point sample_point(const TargetSpace& t, Halton& h);
// random-ish unit tangent from the same stream
Tangent sample_tangent(const TargetSpace& t, const Point& p, Halton& h);

}  // namespace gerbecalc::fields
