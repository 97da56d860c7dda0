#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "gerbecalc/fields.hpp"

// SU(2) WZW geometry: the canonical three-form at level k, conjugacy-class
// branes and their two-forms, biconjugacy-class bi-branes, fusion intervals
// checked against a Verlinde oracle, and the Jandl census backed by a finite
// Z2 group-cohomology engine.

namespace gerbecalc::wzw {

class WzwError : public std::runtime_error {
public:
  explicit WzwError(const std::string& what) : std::runtime_error(what) {}
};

// conjugacy class C_theta = {unit quaternions with real part cos theta}
struct ConjugacyClass {
  double theta = 0;  // in [0, pi]
  explicit ConjugacyClass(double theta);
  bool singleton() const;  // theta in {0, pi}
  bool contains(const fields::Point& g, double tol = 1e-9) const;
  fields::Point sample(fields::Halton& h) const;
};

// biconjugacy class in G x G: pairs with g1 g2^-1 in C_theta
struct BiconjugacyClass {
  double theta = 0;
  explicit BiconjugacyClass(double theta);
  bool contains(const fields::Point& g1, const fields::Point& g2, double tol = 1e-9) const;
};

struct BraneLabel {
  int k = 1;
  int alpha = 0;  // 0..k
  BraneLabel(int k, int alpha);
  double angle() const;  // pi (alpha+1) / (k+2)
};

// H_k, normalized so the full group integrates to k (checked by Haar
// Monte-Carlo); evaluates on ambient tangent triples
fields::FormOracle canonical_three_form(int k);

// admissible brane angles pi (alpha+1)/(k+2), alpha = 0..k
std::vector<double> brane_angles(int k);

// global primitive of H_k away from the center: an Ad-invariant 2-form
// with d(omega) = H_k on SU(2) minus {1, -1}; restricting to a conjugacy
// class gives that brane's two-form
fields::FormOracle ambient_primitive(int k);

// the brane two-form: ambient primitive restricted to C_h (zero form for the
// singleton classes); evaluation rejects points off the class
fields::FormOracle omega_h(const ConjugacyClass& h, int k);

// bi-brane two-form on G x G (pullback of the primitive along (g1,g2) ->
// g1 g2^-1 minus the Maurer-Cartan cross term); defined away from the locus
// g1 g2^-1 = +-1 and satisfies p1*H = p2*H + d(varpi) there
fields::FormOracle varpi(const fields::Point& h, const fields::Point& hprime, int k);
fields::FormOracle varpi_theta(double theta, int k);

/// fiber Pi_{alpha beta gamma} = {(g, g') : g in C_alpha, g' in C_gamma,
// g g'^-1 in C_beta} with its natural two-form
struct FusionCell {
  BraneLabel alpha, beta, gamma;
  double u = 0;  // cosine of the angle between the two class directions
  std::array<fields::Point, 2> sample(fields::Halton& h) const;
  fields::FormOracle form() const;  // p1* omega_alpha + p2* omega_gamma + varpi_beta
};
// throws WzwError when the fiber has empty interior
FusionCell omega_abc(const BraneLabel& alpha, const BraneLabel& beta, const BraneLabel& gamma);

// closed angle interval of products C_t1 * C_t2 in SU(2)
std::array<double, 2> class_product_interval(double theta1, double theta2);

// labels c with N_{ab}^c != 0 at level k, via the S-matrix Verlinde sum,
// cross-checked internally against the truncated tensor-product rule
std::vector<int> verlinde_su2(int k, int a, int b);

struct FusionBoundsReport {
  int k = 0;
  int pairs = 0;
  int matches = 0;
  std::vector<std::array<int, 2>> mismatched;  // (a, b) pairs
  bool ok() const { return matches == pairs; }
};
// exact integer comparison of the fusion-interval extremes with the Verlinde
// extremes for every label pair at level k
FusionBoundsReport fusion_bounds_check(int k);

// census of inequivalent Jandl structures; group is "SU2", "SO3" or "PSO4n"
// (the latter two require even level)
int jandl_census(const std::string& group, int level, const std::string& involution = "");

struct AbelianGroup {
  std::vector<long long> factors;  // invariant factors > 1
  long long order() const;
  std::string describe() const;  // "0", "Z2", "Z2 x Z4", ...
  bool operator==(const AbelianGroup& o) const { return factors == o.factors; }
};
// H^n(Z2, Z_{2m}) with Z2 acting by inversion, via the bar resolution and
// Smith normal form; stabilizes in m and approximates U(1) coefficients
AbelianGroup cohomology_z2(int n, int m);

}  // namespace gerbecalc::wzw
