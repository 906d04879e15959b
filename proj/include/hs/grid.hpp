#pragma once

// Masked rectangular grids and sampled planar mappings on them.
//
// Nodes are indexed row-major, (i, j) -> j * nx + i. A cell (i, j) spans the
// nodes (i, j), (i+1, j), (i, j+1), (i+1, j+1). Every cell is split along the
// lower-left to upper-right diagonal into two P1 triangles:
//   lower: (i, j), (i+1, j),   (i+1, j+1)
//   upper: (i, j), (i+1, j+1), (i, j+1)
// both counter-clockwise in the source plane.

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace hs {

using Point = std::complex<double>;
using Complex = std::complex<double>;

class GridDomain {
 public:
  GridDomain() = default;
  /// Fully masked rectangle with `cells_x` x `cells_y` cells.
  GridDomain(Point origin, double spacing, int cells_x, int cells_y);
  GridDomain(Point origin, double spacing, int nx, int ny, std::vector<std::uint8_t> cell_mask);

  /// Cells whose center satisfies `inside` are masked.
  static GridDomain from_predicate(Point origin, double spacing, int cells_x, int cells_y,
                                   const std::function<bool(Point)>& inside);

  Point origin() const { return origin_; }
  double spacing() const { return spacing_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int cells_x() const { return nx_ - 1; }
  int cells_y() const { return ny_ - 1; }
  std::size_t node_count() const { return static_cast<std::size_t>(nx_) * ny_; }
  std::size_t cell_count() const { return static_cast<std::size_t>(nx_ - 1) * (ny_ - 1); }

  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx_ + i; }
  int col(std::size_t n) const { return static_cast<int>(n % nx_); }
  int row(std::size_t n) const { return static_cast<int>(n / nx_); }
  Point node(int i, int j) const { return origin_ + Point(i * spacing_, j * spacing_); }
  Point node(std::size_t n) const { return node(col(n), row(n)); }

  bool cell(int i, int j) const;
  const std::vector<std::uint8_t>& cell_mask() const { return cell_mask_; }
  std::size_t masked_cell_count() const;
  double masked_area() const { return masked_cell_count() * spacing_ * spacing_; }

  bool node_masked(int i, int j) const;
  bool node_masked(std::size_t n) const { return node_masked_[n] != 0; }
  /// Masked node touching at least one unmasked (or off-grid) cell.
  bool node_on_boundary(std::size_t n) const { return node_boundary_[n] != 0; }
  std::size_t masked_node_count() const;

  /// Area attributed to a node: a quarter of every adjacent masked cell.
  double node_weight(std::size_t n) const;

  /// True when the masked cells form one edge-connected component.
  bool connected() const;
  /// Throws hs::Error when the invariants (spacing, size, connectivity) fail.
  void validate() const;

  bool same_grid(const GridDomain& other) const;

 private:
  void rebuild_node_flags();

  Point origin_{0.0, 0.0};
  double spacing_ = 1.0;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<std::uint8_t> cell_mask_;
  std::vector<std::uint8_t> node_masked_;
  std::vector<std::uint8_t> node_boundary_;
};

/// Per-node flags over a grid; the discrete stand-in for a subset of the domain.
class NodeSet {
 public:
  NodeSet() = default;
  explicit NodeSet(std::size_t node_count) : flags_(node_count, 0) {}

  static NodeSet all_masked(const GridDomain& domain);

  bool contains(std::size_t n) const { return flags_[n] != 0; }
  void insert(std::size_t n) { flags_[n] = 1; }
  void erase(std::size_t n) { flags_[n] = 0; }
  std::size_t size() const;
  std::size_t universe() const { return flags_.size(); }
  bool empty() const { return size() == 0; }
  std::vector<std::size_t> members() const;

 private:
  std::vector<std::uint8_t> flags_;
};

/// Triangle of the fixed-diagonal P1 triangulation.
struct Triangle {
  std::array<std::size_t, 3> nodes;
  int cell_i;
  int cell_j;
  bool upper;
};

/// The two triangles of cell (i, j).
std::array<Triangle, 2> cell_triangles(const GridDomain& domain, int i, int j);

/// Visits every triangle of every masked cell.
void for_each_triangle(const GridDomain& domain, const std::function<void(const Triangle&)>& visit);

/// A complex-valued mapping sampled at the masked nodes of a grid.
class GridMapping {
 public:
  GridMapping() = default;
  explicit GridMapping(GridDomain domain);
  GridMapping(GridDomain domain, std::vector<Complex> values);

  static GridMapping sample(const GridDomain& domain, const std::function<Complex(Point)>& fn);
  static GridMapping identity(const GridDomain& domain);

  const GridDomain& domain() const { return domain_; }
  std::span<const Complex> values() const { return values_; }
  std::span<Complex> values() { return values_; }
  Complex operator[](std::size_t n) const { return values_[n]; }
  Complex& operator[](std::size_t n) { return values_[n]; }
  Complex at(int i, int j) const { return values_[domain_.index(i, j)]; }

  /// True when every masked node carries a finite value.
  bool finite() const;

  GridMapping operator-(const GridMapping& other) const;
  GridMapping operator+(const GridMapping& other) const;

 private:
  GridDomain domain_;
  std::vector<Complex> values_;
};

/// Constant P1 gradient of `values` on a triangle: (d/dx, d/dy).
std::array<Complex, 2> triangle_gradient(const GridDomain& domain, std::span<const Complex> values,
                                         const Triangle& tri);

/// Signed area of the image triangle.
double image_signed_area(std::span<const Complex> values, const Triangle& tri);

}  // namespace hs
