#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gerbecalc/fields.hpp"
#include "gerbecalc/mesh.hpp"

// Gerbe-with-connection data in two guises: discrete Deligne-style local data
// on a triangulated surface (pre-integrated cell quantities, exact gauge
// arithmetic) and geometric records (trivial gerbes, Jandl triples, D-branes,
// bi-branes) with report-producing validators for their defining identities.

namespace gerbecalc::gerbe {

class GerbeError : public std::runtime_error {
public:
  explicit GerbeError(const std::string& what) : std::runtime_error(what) {}
};

// Local data stored pre-integrated: b[f] is the chart two-form integrated over
// face f in the face's own vertex order, a[e] the chart-pair one-form along
// edge e's canonical direction with the chart pair ordered (side-0 face,
// side-1 face) -- side 0 of an edge always traverses it canonically, which
// fixes every sign convention below without reference to a global orientation.
// g[v] is the total triple-overlap phase collected at vertex v.
struct DeligneSurfaceData {
  mesh::TriangulatedSurface surface;
  std::vector<int> chart_of_face;
  std::vector<double> b;                // per face
  std::vector<double> a;                // per edge; zero on boundary edges
  std::vector<std::complex<double>> g;  // per vertex, unit modulus
};

// Gauge cochain: lambda re-apportions connection integrals between an edge and
// its side-0 face (a[e] += lambda, b of the side-0 face -= lambda), u moves
// phase between the endpoints of an edge (head picks up u, tail picks up its
// conjugate).  Both leave the holonomy product exactly invariant.
struct DeligneGauge {
  std::vector<double> lambda;           // per edge; boundary entries must be 0
  std::vector<std::complex<double>> u;  // per edge, unit modulus
};

DeligneSurfaceData gauge_transform(const DeligneSurfaceData& data, const DeligneGauge& gauge);

struct ValidationReport {
  std::string check;
  double tolerance = 0;
  double max_residual = 0;
  double mean_residual = 0;
  std::vector<std::pair<std::string, double>> parts;  // named worst residuals
  std::vector<int> failing_cells;
  std::vector<std::string> notes;
  bool pass = false;
};

// Per-vertex consistency of the discrete data (unit-modulus overlap phases --
// the only residual content once cell quantities are pre-integrated), plus
// shape and boundary-edge checks.  Report-only, never throws.
ValidationReport validate_cocycle(const DeligneSurfaceData& data);

// The gerbe I_omega: global curving two-form, nothing else.
struct TrivialGerbe {
  fields::FormOracle omega;
};
TrivialGerbe trivial_gerbe(fields::FormOracle omega);  // checks degree == 2

// Jandl structure on a trivial gerbe: involution-odd curving, a line bundle L
// with connection one-form line_a (holonomy exp(2 pi i oint line_a)) and a
// unit-complex phi giving the isomorphism k*L -> L.
struct JandlTrivialData {
  fields::FormOracle omega;   // degree 2
  fields::FormOracle line_a;  // degree 1
  fields::PhaseFunction phi;
};

// Checks, over low-discrepancy samples:
//   curvature      d(line_a) = -omega - k*omega
//   equivariance   phi(k p) phi(p) = 1
//   isomorphism    line_a - k*line_a = d(arg phi) / 2pi
ValidationReport validate_jandl(const JandlTrivialData& data, const fields::SmoothMap& k,
                                int n_samples = 200);

// Submanifold descriptors for brane world volumes.  Sampling and membership
// only -- geometry stays in the form oracles, which must evaluate in an
// ambient neighborhood of the world volume (finite differencing steps off it).
struct WorldVolume {
  enum class Kind { Whole, ClassAngle, Point };
  fields::TargetSpace target;
  Kind kind = Kind::Whole;
  double theta = 0;   // ClassAngle: su2 conjugacy class angle in [0, pi]
  fields::Point at;   // Point
  bool contains(const fields::Point& p, double tol = 1e-9) const;
  fields::Point sample(fields::Halton& h) const;
};
WorldVolume whole_world_volume(const fields::TargetSpace& t);
WorldVolume class_world_volume(double theta);
WorldVolume point_world_volume(const fields::TargetSpace& t, fields::Point at);

struct GerbeModule {
  int rank = 1;
  fields::Connection conn;
};

struct DBraneRecord {
  WorldVolume world_volume;
  fields::FormOracle omega_q;  // degree 2, ambient-capable
  GerbeModule module;
};

// Residual of H - d(omega_q) at world-volume samples with ambient tangents.
ValidationReport validate_dbrane(const fields::FormOracle& h, const DBraneRecord& brane,
                                 int n_samples = 200);

// World volume inside a product target: a biconjugacy class for su2 x su2, or
// the shifted diagonal {(y, y - shift)} for circle x circle.
struct BiWorldVolume {
  enum class Kind { BiClass, ShiftedDiagonal };
  fields::TargetSpace target;
  Kind kind = Kind::BiClass;
  double theta = 0;  // BiClass
  double shift = 0;  // ShiftedDiagonal
  bool contains(const fields::Point& p, double tol = 1e-9) const;
  fields::Point sample(fields::Halton& h) const;
};
BiWorldVolume biclass_world_volume(double theta);
BiWorldVolume shifted_diagonal_world_volume(const fields::TargetSpace& circle, double shift);

struct BiBraneRecord {
  BiWorldVolume world_volume;
  fields::FormOracle varpi;  // degree 2 on the product, ambient-capable
  GerbeModule bundle;
};

// Residual of p1*h1 - p2*h2 - d(varpi) at world-volume samples.
ValidationReport validate_bibrane(const fields::FormOracle& h1, const fields::FormOracle& h2,
                                  const BiBraneRecord& bibrane, int n_samples = 200);

}  // namespace gerbecalc::gerbe
