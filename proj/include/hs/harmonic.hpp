#pragma once

// Discrete Poisson operator and harmonic replacement.
//
// "Discrete harmonic" means stationary for the P1 energy of hs/field.hpp.
// With the fixed-diagonal triangulation the diagonal edges carry zero
// cotangent weight, so at a node whose four cells are masked the stationarity
// condition is the 5-point average of the axis neighbours.

#include <cstddef>
#include <vector>

#include "hs/field.hpp"
#include "hs/grid.hpp"

namespace hs {

struct SolverOptions {
  double relative_tolerance = 1e-10;
  /// Iteration cap as a multiple of the number of unknowns.
  int max_iterations_factor = 10;
};

/// Region nodes split into unknowns and fixed boundary nodes.
struct RegionSplit {
  /// Members with all four axis neighbours in the region, away from the
  /// domain boundary.
  std::vector<std::size_t> interior;
  std::vector<std::size_t> boundary;
};

RegionSplit split_region(const GridDomain& domain, const NodeSet& region);

struct HarmonicSolve {
  RegionSplit split;
  /// Values at every node; interior nodes carry the extension, others the input.
  std::vector<Complex> values;
  double residual = 0.0;
  int iterations = 0;
  /// Energy of the triangles touching the unknowns, before and after.
  double energy_before = 0.0;
  double energy_after = 0.0;
};

/// Harmonic extension of the boundary trace of `h` into `region`. Interior
/// values of `h` serve only as the initial guess.
HarmonicSolve poisson_extend(const GridMapping& h, const NodeSet& region, const SolverOptions& opts = {});

/// `h` outside the region's unknowns, the harmonic extension inside.
GridMapping harmonic_replace(const GridMapping& h, const NodeSet& region, const SolverOptions& opts = {});

/// Largest |discrete Laplacian| over the unknowns of `region`, relative to the
/// largest neighbour difference; zero for discrete-harmonic data.
double harmonic_residual(const GridMapping& h, const NodeSet& region);

/// Convex polygon given by its vertices in counter-clockwise order.
using Polygon = std::vector<Point>;

bool is_convex(const Polygon& poly);

struct RkcVerdict {
  bool orientation_uniform = false;
  double min_jacobian = 0.0;
  std::size_t violating = 0;
  GridMapping replaced;
};

/// Harmonic replacement followed by the orientation test on the region.
/// Throws when the target is not convex ("RKC hypothesis violated") or the
/// boundary trace does not wind once monotonically around it
/// ("boundary not homeomorphic"). The cyclic order of boundary nodes is taken
/// by angle about the region centroid, so regions must be star-shaped.
RkcVerdict rkc_certify(const GridMapping& h, const NodeSet& region, const Polygon& target,
                       const SolverOptions& opts = {});

}  // namespace hs
