#pragma once

// Dyadic decomposition of a target domain, preimage regions ("curved
// squares"), lens regions around shared square edges and vertex disks.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "hs/grid.hpp"

namespace hs {

/// The dyadic lattice: square (k, i, j) has lower-left corner
/// offset + base_scale * 2^-k * (i, j) and side base_scale * 2^-k.
struct DyadicLattice {
  double base_scale = 1.0;
  Point offset{0.0, 0.0};

  /// Lattice offset by (sqrt 2 / 4, sqrt 3 / 4) * base_scale, which keeps
  /// grid lines and dyadic edges from coinciding.
  static DyadicLattice with_default_offset(double base_scale);
};

struct DyadicSquare {
  int level = 0;
  std::int64_t i = 0;
  std::int64_t j = 0;

  double side(const DyadicLattice& lat) const;
  double diam(const DyadicLattice& lat) const;
  Point lower_left(const DyadicLattice& lat) const;
  Point center(const DyadicLattice& lat) const;
  /// Closed-square membership.
  bool contains(const DyadicLattice& lat, Point p) const;
  DyadicSquare parent() const;

  auto operator<=>(const DyadicSquare&) const = default;
};

/// True when the closed square lies in the closure of the masked cells.
bool square_in_domain(const GridDomain& target, const DyadicLattice& lat, const DyadicSquare& q);

struct Decomposition {
  std::vector<DyadicSquare> squares;
  /// Masked target cells not fully covered by the returned squares.
  std::vector<std::pair<int, int>> uncovered_cells;
};

/// Maximal dyadic squares of level <= max_level inside the target. Throws
/// "empty domain" when the target has no masked cell.
Decomposition decompose_dyadic(const GridDomain& target, int max_level, const DyadicLattice& lat);

/// floor(log2(base_scale / (4 * spacing))), never negative: squares are never
/// smaller than four target cells.
int default_max_level(const GridDomain& target, double base_scale);

/// The 4^k congruent subsquares of level q.level + k tiling q, row-major.
std::vector<DyadicSquare> refine_square(const DyadicSquare& q, int k);

/// Source nodes whose image lies in a closed square.
struct PreimageRegion {
  NodeSet nodes;
  std::vector<std::size_t> interior;  // all four axis neighbours in the set
  std::vector<std::size_t> boundary;
};

/// Throws "non-Jordan preimage" when the node set is not connected along the
/// edges of the triangulation. An empty preimage is returned as is.
PreimageRegion preimage_region(const GridMapping& h, const DyadicSquare& q, const DyadicLattice& lat);

/// Shared edge between two squares of a partition: a < b, segment p0 -> p1
/// with p0 the lower (or left) end.
struct SharedEdge {
  int a = 0;
  int b = 0;
  Point p0;
  Point p1;
  bool vertical = false;
  double length() const { return std::abs(p1 - p0); }
};

struct CellPartition {
  DyadicLattice lattice;
  std::vector<DyadicSquare> squares;
  /// Per source node: the id of the square whose closure contains its image,
  /// smallest (level, i, j) on ties; -1 for unmasked or uncovered nodes.
  std::vector<int> labels;
  std::vector<SharedEdge> adjacency;
  /// Endpoints of shared edges, deduplicated.
  std::vector<Point> vertices;
};

/// Square ids whose closure contains p, by increasing (level, i, j).
class SquareIndex {
 public:
  SquareIndex(const std::vector<DyadicSquare>& squares, const DyadicLattice& lat);
  std::vector<int> containing(Point p) const;

 private:
  DyadicLattice lat_;
  std::vector<DyadicSquare> squares_;
  std::vector<int> levels_;
  std::vector<std::vector<std::pair<std::uint64_t, int>>> table_;  // sorted keys per level
};

/// Labels every masked source node by the square containing its image and
/// computes adjacency. Squares must have pairwise disjoint interiors.
CellPartition build_partition(const GridMapping& h, std::vector<DyadicSquare> squares, const DyadicLattice& lat);

/// All shared edges among squares with disjoint interiors.
std::vector<SharedEdge> square_adjacency(const std::vector<DyadicSquare>& squares, const DyadicLattice& lat);

/// Preimage node sets of all squares at once (closed squares, so nodes on a
/// shared edge belong to both neighbours).
std::vector<NodeSet> preimage_sets(const GridMapping& h, const std::vector<DyadicSquare>& squares,
                                   const DyadicLattice& lat);

// ---- lenses ----

enum class LensKind { DoublyConvex, ConcavoConvex };

/// Circular arc from angle theta0 counter-clockwise to theta1.
struct Arc {
  Point center;
  double radius = 0.0;
  double theta0 = 0.0;
  double theta1 = 0.0;
  Point at(double theta) const { return center + std::polar(radius, theta); }
};

/// Doubly convex: intersection of the two radius-R disks having ab as a chord;
/// arcs[0] bulges to the left of a -> b, arcs[1] to the right.
/// Concavo-convex: the crescent between the two arcs through a, b on the left
/// side with sagittas (1 -/+ thickness) times the sagitta of the radius-R arc;
/// arcs[0] is the flatter one.
struct LensSpec {
  Point a;
  Point b;
  double R = 0.0;
  LensKind kind = LensKind::DoublyConvex;
  double thickness = 0.0;
  std::array<Arc, 2> arcs;

  double chord() const { return std::abs(b - a); }
  /// Angle between the two boundary arcs at an endpoint.
  double opening_angle() const;
  double area() const;
  bool contains(Point p) const;
};

/// Throws "radius too small" when R <= |b - a|.
LensSpec build_lens(Point a, Point b, LensKind kind, double R, double thickness = 0.5);
LensSpec build_lens(const SharedEdge& edge, LensKind kind, double R, double thickness = 0.5);

/// Arc through a and b bulging to the left of a -> b with the given sagitta
/// (signed: negative bulges right).
Arc arc_through(Point a, Point b, double sagitta);

// ---- vertex disks ----

struct VertexDisk {
  Point center;
  double radius = 0.0;
};

struct VertexDiskFamily {
  std::vector<VertexDisk> disks;
  double max_diam() const;
  /// The disks 3 D_v are pairwise disjoint.
  bool tripled_disjoint() const;
};

/// r_v = min(eps / 2, (distance to nearest other vertex) / 6.01,
/// (shortest incident shared edge) / 4).
VertexDiskFamily build_vertex_disks(const CellPartition& partition, double eps);

/// True when the closed disk lies in the closure of the masked cells.
bool disk_in_domain(const GridDomain& target, Point center, double radius);

}  // namespace hs
