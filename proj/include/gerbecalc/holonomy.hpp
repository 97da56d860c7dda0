#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gerbecalc/fields.hpp"
#include "gerbecalc/gerbedata.hpp"
#include "gerbecalc/mesh.hpp"

// Surface holonomy engines: closed oriented worldsheets, unoriented
// worldsheets through the orientation double cover, worldsheets with boundary
// on a D-brane, and worldsheets split along defect circles carrying a
// bi-brane.  All engines are pure functions of immutable inputs and return a
// complex value together with diagnostics; unit modulus is a property of the
// closed rank-1 cases, not an enforced normalization (boundary and defect
// values are traces).

namespace gerbecalc::holonomy {

class HolonomyError : public std::runtime_error {
public:
  explicit HolonomyError(const std::string& what) : std::runtime_error(what) {}
};

struct HolonomyResult {
  fields::Complex value{1.0, 0.0};
  // difference of the surface-integral exponent against one barycentric
  // refinement, when the engine can refine cheaply (closed engine only)
  double quadrature_error = 0;
  double variant_spread = 0;  // filled by the harness, zero for single runs
  std::vector<std::string> diagnostics;
};

// exp(2 pi i * integral of Phi^* omega) over a closed oriented surface.
HolonomyResult holonomy_closed(const fields::FormOracle& omega, const fields::SurfaceMap& map);

// Evaluation choices for discrete local data on a closed non-orientable
// surface: a sheet per face, a pre-integrated circle one-form value per edge
// (along the canonical direction) and a unit phase per vertex for the circle
// point terms.  Face terms enter through the chosen lift's orientation in the
// coherently oriented double cover; the connection integrals a[e] of edges
// that stay non-reversing ride the orientation of their side-0 face's lift,
// which keeps lambda gauges exactly telescoping there.  Lambda gauges on
// reversing edges are outside this mode's contract (the eta data would have
// to transform along).
struct DeligneLiftStructure {
  std::vector<int> face_sheet;       // +1 / -1 per face
  std::vector<double> eta;           // per edge, along the canonical direction
  std::vector<fields::Complex> phi;  // per vertex, unit modulus
};

HolonomyResult holonomy_deligne(
    const gerbe::DeligneSurfaceData& data,
    const std::optional<DeligneLiftStructure>& unoriented = std::nullopt);

// Lift choices for the geometric unoriented engine: one sheet per base face
// (empty defaults to all +1), and for every orientation-reversing circle one
// bit.  When the circle's
// preimage splits into two closed lifts the bit picks the lift; when it is a
// single doubled circle the bit picks which preimage of the circle's base
// point starts the open half-path (the phi factor is evaluated at that
// starting preimage).  circle_start may be empty (all zeros) or must have one
// entry per reversing circle in discovery order.
struct UnorientedLifts {
  std::vector<int> face_sheet;
  std::vector<int> circle_start;
};

// Holonomy of a Jandl structure (omega, L, phi) pulled back along a
// deck-equivariant map defined on the total space of the orientation double
// cover of a closed non-orientable (or orientable) base.  Face terms
// integrate omega over the chosen lifts in the cover orientation; the
// orientation-reversing edges are walked as the boundary of the unchosen
// domain, and each circle contributes the holonomy of the descended line
// bundle: a plain loop integral of line_a for a closed lift, and
// exp(2 pi i * open integral) * phi(start image) for a doubled one.  Circle
// lifts that alternate sheets more than once have no single endpoint pair and
// are rejected with a diagnostic.
HolonomyResult holonomy_unoriented(const gerbe::JandlTrivialData& data, const fields::SmoothMap& k,
                                   const mesh::DoubleCover& cover, const fields::SurfaceMap& map,
                                   const UnorientedLifts& lifts);

// Number of orientation-reversing circles a face-sheet choice produces
// (useful for enumerating circle_start patterns).
int count_reversing_circles(const mesh::DoubleCover& cover, const std::vector<int>& face_sheet);

// exp(2 pi i * integral of Phi^* rho) times the product over boundary circles
// of tr Hol_E, with every boundary circle traversed in the orientation the
// surface induces.  Boundary vertex images must lie on the brane world volume.
HolonomyResult holonomy_boundary(const fields::FormOracle& rho, const gerbe::DBraneRecord& brane,
                                 const fields::SurfaceMap& map);

// Two worldsheet pieces joined along defect circles: the boundary circles of
// map1 and map2 are paired by index and aligned pointwise (the pair
// (phi1, phi2) must land in the bi-brane world volume).  The two pieces must
// induce opposite directions on every seam; the seam trace runs in the
// direction induced by the piece that has the seam as positive boundary.
// Value = exp(2 pi i (I1 + I2)) * product of tr Hol of the bi-brane bundle
// along the paired seam loops.
HolonomyResult holonomy_defect(const fields::FormOracle& rho1, const fields::FormOracle& rho2,
                               const gerbe::BiBraneRecord& bibrane, const fields::SurfaceMap& map1,
                               const fields::SurfaceMap& map2);

// ---------------------------------------------------------------------------
// independence harness

using Variant = std::function<fields::Complex()>;

struct IndependenceReport {
  fields::Complex base_value{1.0, 0.0};  // value of the first variant
  int variants = 0;
  double spread = 0;  // max pairwise |v_i - v_j|
  std::vector<std::string> notes;
};

// Runs every variant (in parallel beyond a handful) and reports the largest
// pairwise deviation.  Report-only: variant exceptions become notes and the
// failing variant is excluded from the spread.
IndependenceReport independence_harness(const std::vector<Variant>& variants);

// Variant builders for the common variation sets.  The first variant is
// always the unmodified computation.
std::vector<Variant> deligne_gauge_variants(const gerbe::DeligneSurfaceData& data, int count,
                                            unsigned seed);
std::vector<Variant> subdivision_variants(const fields::FormOracle& omega,
                                          const fields::SurfaceMap& map, int levels);
// All face-sheet and circle-start combinations when there are at most
// max_variants of them, otherwise a deterministic sample of max_variants.
std::vector<Variant> unoriented_lift_variants(const gerbe::JandlTrivialData& data,
                                              const fields::SmoothMap& k,
                                              const mesh::DoubleCover& cover,
                                              const fields::SurfaceMap& map, int max_variants);
// One variant per rotation of each boundary circle's starting edge (other
// circles untouched).  Rebuilds the surface with rotated boundary
// declarations, so the gluing must be implied by shared vertices alone.
std::vector<Variant> boundary_rotation_variants(const fields::FormOracle& rho,
                                                const gerbe::DBraneRecord& brane,
                                                const fields::SurfaceMap& map);

}  // namespace gerbecalc::holonomy
