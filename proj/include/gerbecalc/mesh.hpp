#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Triangulated surfaces in the Delta-complex sense: faces are ordered vertex
// triples and edges are explicit gluings of face sides, so self-identifications
// (one-vertex torus, two-face projective plane, ...) are legal meshes.  All
// combinatorial invariants used downstream -- Euler characteristic, coherent
// orientations, boundary/defect circles, the orientation double cover -- are
// derived from the side-gluing table, never from vertex coincidences.

namespace gerbecalc::mesh {

class MeshError : public std::runtime_error {
public:
  explicit MeshError(const std::string& what) : std::runtime_error(what) {}
};

// A directed side of a face: runs from corner `local` to corner `(local+1)%3`.
struct Side {
  int face = -1;
  int local = -1;
  bool operator==(const Side& o) const { return face == o.face && local == o.local; }
};

// An edge of the complex.  `sides[0]` always exists and defines the canonical
// direction of the edge; `dir[i]` is +1 when side i traverses the edge along
// that canonical direction and -1 when it runs against it.  Boundary edges
// have a single side.
struct Edge {
  std::array<Side, 2> sides{};
  std::array<int, 2> dir{1, 1};
  int num_sides = 0;
  int tail = -1;  // vertex at the start of the canonical direction
  int head = -1;
  bool boundary() const { return num_sides == 1; }
};

// Ordered cycle of edges; dirs[i] = +1 if the cycle traverses edge i along its
// canonical direction.  Used for boundary circles and declared defect circles.
struct Circle {
  std::vector<int> edges;
  std::vector<int> dirs;
  int length() const { return static_cast<int>(edges.size()); }
};

enum class Orientability { Oriented, OrientableUnoriented, NonOrientable };

// One gluing declaration: identify side a with side b.  flip=false means the
// sides are identified head-to-tail (the orientation-compatible way for two
// coherently oriented triangles); flip=true identifies them running the same
// way (an orientation-reversing gluing, as in the projective plane).
// b absent declares side a to be boundary.
struct Gluing {
  Side a;
  std::optional<Side> b;
  bool flip = false;
};

// One step of a declared circle: traverse the edge under `side`, along that
// side's direction, or against it when `against` is set.
struct CircleRef {
  Side side;
  bool against = false;
  CircleRef(Side s, bool a = false) : side(s), against(a) {}
  CircleRef(int face, int local, bool a = false) : side{face, local}, against(a) {}
};

struct BuildOptions {
  std::vector<Gluing> gluing;                       // explicit side gluings (may be partial)
  std::optional<std::vector<std::vector<CircleRef>>> boundary_decl;
  std::vector<std::vector<CircleRef>> defect_decl;  // declared defect circles
  bool require_oriented = false;                    // error unless faces are coherently oriented as given
};

struct TriangulatedSurface {
  int num_vertices = 0;
  std::vector<std::array<int, 3>> faces;            // vertex triples, order fixes the face's own orientation
  std::vector<Edge> edges;
  std::vector<std::array<int, 3>> face_edge;        // edge id for each side
  std::vector<std::array<int, 3>> face_edge_dir;    // side direction vs. edge canonical direction
  Orientability orientability = Orientability::Oriented;
  std::vector<int> orient_sign;                     // per-face coherent orientation sign (empty if non-orientable)
  std::vector<Circle> boundary_circles;
  std::vector<Circle> defect_circles;

  int num_faces() const { return static_cast<int>(faces.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
  int euler_characteristic() const { return num_vertices - num_edges() + num_faces(); }
  bool closed() const { return boundary_circles.empty(); }
  bool oriented() const { return orientability == Orientability::Oriented; }
  bool orientable() const { return orientability != Orientability::NonOrientable; }

  int edge_of(const Side& s) const { return face_edge[s.face][s.local]; }
  int side_dir(const Side& s) const { return face_edge_dir[s.face][s.local]; }
  // Vertices at the ends of a directed side (tail, head).
  std::pair<int, int> side_vertices(const Side& s) const {
    return {faces[s.face][s.local], faces[s.face][(s.local + 1) % 3]};
  }
};

TriangulatedSurface build_surface(int num_vertices,
                                  const std::vector<std::array<int, 3>>& faces,
                                  const BuildOptions& options = {});

// All faces reversed; holonomies of mapped data conjugate under this.
TriangulatedSurface reverse_orientation(const TriangulatedSurface& s);

// One barycentric subdivision.  Vertex ids are stable: original vertices keep
// their ids, edge midpoints take V + edge_id, face centroids V + E + face_id.
// Sub-face ids of face f are 6f..6f+5, fanning around the centroid starting at
// corner 0.  Boundary and defect circles are carried over, each edge split in two.
TriangulatedSurface subdivide(const TriangulatedSurface& s);

// Dual graph: one node per face, one link per interior edge (self-loops and
// parallel links allowed).
struct DualGraph {
  int num_nodes = 0;
  std::vector<std::array<int, 2>> links;  // faces adjacent across each interior edge
  std::vector<int> link_edge;             // originating edge id
};
DualGraph dual_graph(const TriangulatedSurface& s);

// Orientation double cover of a closed surface.  In the cover built by
// orientation_double_cover, total faces are indexed 2f (sheet +1, vertex
// order as in the base) and 2f+1 (sheet -1, corners permuted), and edge lifts
// are 2e/2e+1; after subdivision the index patterns change, so consumers
// should go through the lookup tables and side_lift instead of arithmetic.
// The total surface is always coherently oriented, and the deck involution
// exchanges sheets and reverses orientation.
struct DoubleCover {
  TriangulatedSurface base;
  TriangulatedSurface total;
  // deck involution, cell-wise
  std::vector<int> deck_face;
  std::vector<std::array<int, 3>> deck_corner_perm;  // corner k of T -> corner perm[k] of deck_face[T]
  std::vector<int> deck_edge;
  std::vector<int> deck_edge_dir;  // +1 if deck maps canonical direction to canonical direction
  std::vector<int> deck_vertex;
  // projection to the base
  std::vector<int> base_face;      // total face -> base face
  std::vector<int> face_sheet;     // total face -> +1 / -1 (orientation vs. base face as given)
  std::vector<std::array<int, 3>> base_corner_perm;  // corner k of T -> base corner (identity on sheet +1)
  std::vector<int> base_edge;      // total edge -> base edge
  std::vector<int> base_edge_dir;  // +1 if total canonical direction projects onto base canonical direction
  std::vector<int> base_vertex;    // total vertex -> base vertex

  // Lifts: total faces realizing (base face, sheet +1 / -1).
  std::vector<std::array<int, 2>> face_lift_tab;
  // For the sheet -1 lift of a base face, which of its sides covers base side l.
  std::vector<std::array<int, 3>> minus_side_map;
  // Of the two lifts of base vertex v, vertex_lifts[v] lists them.
  std::vector<std::array<int, 2>> vertex_lifts;

  int face_lift(int base_f, int sheet) const {
    return face_lift_tab[base_f][sheet == 1 ? 0 : 1];
  }
  // The side of the (base side, sheet) lift in the total surface.
  Side side_lift(const Side& base_side, int sheet) const;
  // Edge lift carrying a given base side on a given sheet.
  int edge_lift(const Side& base_side, int sheet) const {
    return total.edge_of(side_lift(base_side, sheet));
  }
};
DoubleCover orientation_double_cover(const TriangulatedSurface& s);

// Subdivide base and total compatibly; deck maps midpoints to partner
// midpoints and centroids to partner centroids.
DoubleCover subdivide(const DoubleCover& c);

// Cut a surface along all of its declared defect circles.  Each piece is a
// surface with the defect edges turned into boundary; `piece_of_face` maps the
// original face to its piece index, and for every cut circle the matched
// boundary circles of the two incident pieces are reported in the same edge
// order so maps can be compared seam by seam.
struct CutResult {
  std::vector<TriangulatedSurface> pieces;
  std::vector<int> piece_of_face;
  std::vector<std::vector<int>> face_map;  // piece -> (piece face -> original face)
  struct Seam {
    int circle = -1;              // index into defect_circles of the input
    int piece[2] = {-1, -1};      // pieces on each side (left of traversal first)
    int boundary_circle[2] = {-1, -1};  // boundary circle index within each piece
  };
  std::vector<Seam> seams;
};
CutResult cut_along_defects(const TriangulatedSurface& s);

}  // namespace gerbecalc::mesh
