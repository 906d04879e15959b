#pragma once

// Hopf differential F = h_z conj(h_zbar), its dbar residual, conformal
// pullback of quadratic differentials, the annulus example map, the
// homogeneous-case inequality and the composed-energy identity.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "hs/field.hpp"
#include "hs/grid.hpp"

namespace hs {

struct HopfField {
  GridDomain domain;
  std::vector<Complex> F;
  /// 1 where F is defined (Wirtinger derivatives formed, not excluded).
  std::vector<std::uint8_t> f_valid;
  /// dbar F = (F_x + i F_y) / 2 by finite differences of F.
  std::vector<Complex> dbar_residual;
  std::vector<std::uint8_t> residual_valid;
  /// Sum over residual-valid nodes of node_weight * |dbar F|.
  double l1_residual = 0.0;
  /// sqrt of the same sum with |dbar F|^2.
  double l2_residual = 0.0;
};

/// `exclude` (per node, optional) removes nodes from F before differencing,
/// e.g. a band around a known interface.
HopfField hopf_differential(const GridMapping& h, const std::vector<std::uint8_t>* exclude = nullptr);

/// Residual of a prescribed field F on a grid (every masked node valid).
HopfField hopf_from_field(const GridDomain& domain, std::vector<Complex> F);

struct RegionResidual {
  double value = 0.0;
  bool empty_region = false;
};

/// Area-weighted L1 norm of the residual over `region`.
RegionResidual dbar_l1(const HopfField& field, const NodeSet& region);

/// sigma = F / |F| where |h_z h_zbar| >= 1e-14, 1 elsewhere.
struct SigmaField {
  std::vector<Complex> sigma;
};
SigmaField sigma_field(const WirtingerField& w);
Complex sigma_of(Complex hz, Complex hzb);

/// F(phi(xi)) * phi'(xi)^2 at every masked node of `source`, with F bilinearly
/// interpolated on its grid. Nodes whose image leaves the valid part of F's
/// grid are flagged in `valid` and carry 0.
struct Pullback {
  GridDomain domain;
  std::vector<Complex> values;
  std::vector<std::uint8_t> valid;
};
Pullback conformal_pullback(const GridDomain& f_domain, const std::vector<Complex>& F,
                            const std::vector<std::uint8_t>& f_valid, const std::function<Complex(Complex)>& phi,
                            const std::function<Complex(Complex)>& dphi, const GridDomain& source);

/// Bilinear interpolation; nullopt outside the grid or next to invalid nodes.
std::optional<Complex> interpolate_bilinear(const GridDomain& d, const std::vector<Complex>& values,
                                            const std::vector<std::uint8_t>& valid, Point p);

/// z / |z| for |z| <= 1 and (z + 1 / conj z) / 2 outside. Throws "puncture in
/// domain" when 0 lies in the closure of a masked cell.
Complex example_annulus_value(Complex z);
GridMapping example_annulus_map(const GridDomain& domain);
/// -1 / (4 z^2)
Complex example_annulus_hopf(Complex z);

/// Homogeneous-case diagnostics.
struct Case0Report {
  /// max |h_zbar|^2 - |F| over nodes with J > 0 (-inf if none)
  double positive_gap = 0.0;
  /// max |h_z|^2 - |F| over nodes with J < 0 (-inf if none)
  double negative_gap = 0.0;
  /// max |h_zbar| over J > 0 nodes: the anti-conformality defect
  double defect = 0.0;
  /// max |h_z| over J < 0 nodes
  double anti_defect = 0.0;
  std::size_t positive = 0;
  std::size_t negative = 0;
};
Case0Report case0_check(const GridMapping& h);

/// PL inverse of H (as a map from its image back to its grid) composed with h:
/// chi(z) = H^-1(h(z)). Nodes whose image is outside H's image are invalid.
struct InverseComposition {
  GridMapping chi;
  std::vector<std::uint8_t> valid;
};
InverseComposition compose_inverse(const GridMapping& H, const GridMapping& h);

/// Point location in the image triangles of a mapping.
class ImageLocator {
 public:
  explicit ImageLocator(const GridMapping& H);
  /// Source-plane preimage of w by barycentric interpolation, if w lies in an
  /// image triangle.
  std::optional<Point> preimage(Point w) const;
  /// Image triangles whose bounding box meets the box [lo, hi].
  std::vector<std::size_t> candidates(Point lo, Point hi) const;
  const std::vector<Triangle>& triangles() const { return tris_; }

 private:
  const GridMapping* H_;
  std::vector<Triangle> tris_;
  Point lo_, hi_;
  int bx_ = 1, by_ = 1;
  double cw_ = 1.0, ch_ = 1.0;
  std::vector<std::vector<std::size_t>> buckets_;
};

struct EnergyComparison {
  /// (a) E[H] over the PL image chi(Q')
  double direct = 0.0;
  /// (b) the substitution integral over Q'
  double substitution = 0.0;
  /// (c) 4 * integral of [|chi_z - sigma chi_zbar|^2 / J - 1] |h_z h_zbar|
  double chain = 0.0;
  /// E_{Q'}[h]
  double energy_h = 0.0;
  double slack_direct() const { return direct - substitution; }
  /// (b) - E[h] - (c), nonnegative up to roundoff
  double slack_chain() const { return substitution - energy_h - chain; }
  std::size_t triangles = 0;
};

/// Q' is the set of triangles with all three nodes in `region`. Derivatives
/// are the constant P1 gradients per triangle. Throws "not a diffeomorphism on
/// Q'" when chi has a nonpositive Jacobian on some triangle of Q'.
EnergyComparison energy_comparison(const GridMapping& h, const GridMapping& H, const NodeSet& region,
                                   const GridMapping& chi);

/// Area of the intersection of two triangles (both counter-clockwise or not).
double triangle_overlap_area(const std::array<Point, 3>& a, const std::array<Point, 3>& b);

/// Random bump perturbations supported in `region` and vanishing on its
/// boundary; reports how many lowered the P1 energy. A heuristic probe only.
struct MinimalityProbe {
  int trials = 0;
  int decreased = 0;
  double min_relative_change = 0.0;
};
MinimalityProbe minimality_probe(const GridMapping& h, const NodeSet& region, double amplitude, int trials,
                                 unsigned seed);

}  // namespace hs
