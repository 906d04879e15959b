#pragma once

// Wirtinger derivatives, Dirichlet energy, Royden norm and the discrete
// injectivity test for sampled mappings.

#include <cstddef>
#include <map>
#include <optional>
#include <vector>

#include "hs/grid.hpp"

namespace hs {

/// Central-difference Wirtinger derivatives, h_z = (h_x - i h_y) / 2 and
/// h_zbar = (h_x + i h_y) / 2. Used for diagnostics only; the energy is P1.
struct WirtingerField {
  std::vector<Complex> hz;
  std::vector<Complex> hzb;
  std::vector<double> jacobian;
  /// 1 where both partials could be formed (the "interior" of the field).
  std::vector<std::uint8_t> valid;
  /// Masked nodes lacking two samples along some axis.
  std::vector<std::size_t> excluded;
};

/// Partial derivatives of node data along x and y. Central differences where
/// both neighbours are masked, second-order one-sided differences where only
/// one side has two samples, otherwise the node is flagged invalid.
struct Partials {
  std::vector<Complex> dx;
  std::vector<Complex> dy;
  std::vector<std::uint8_t> valid;
};

Partials partial_derivatives(const GridDomain& domain, std::span<const Complex> values,
                             const std::vector<std::uint8_t>* available = nullptr);

WirtingerField wirtinger(const GridMapping& h);

struct RegionEnergy {
  double value = 0.0;
  /// Set when the region contains no complete triangle.
  bool empty_region = false;
};

/// P1 energy over the triangles whose three vertices all lie in `region`.
RegionEnergy dirichlet_energy(const GridMapping& h, const NodeSet& region);
/// P1 energy over every masked triangle.
double dirichlet_energy(const GridMapping& h);
/// P1 energy over the triangles of cells carrying `label` in `cell_labels`.
double dirichlet_energy_cells(const GridMapping& h, const std::vector<int>& cell_labels, int label);
/// Energy over the triangles touching at least one node of `nodes`.
double star_energy(const GridMapping& h, const std::vector<std::size_t>& nodes);

/// sup |h| + ||Dh||_L2 with an optional per-region breakdown of the energy.
struct EnergyReport {
  double total = 0.0;
  std::map<int, double> per_region;
  double sup_norm = 0.0;
  double grad_l2 = 0.0;
  double royden = 0.0;
};

EnergyReport royden_norm(const GridMapping& h);
/// Same, with per-region energies for a labelling of the cells (-1 = none).
EnergyReport royden_norm(const GridMapping& h, const std::vector<int>& cell_labels);

enum class Orientation { Positive, Negative, Mixed };

struct InjectivityVerdict {
  bool orientation_uniform = false;
  Orientation orientation = Orientation::Mixed;
  double min_abs_area = 0.0;
  /// Triangles with zero signed area or with the minority sign.
  std::vector<Triangle> violating;
  std::size_t positive = 0;
  std::size_t negative = 0;
  std::size_t degenerate = 0;
};

InjectivityVerdict check_injectivity(const GridMapping& h);
/// Restricted to the triangles touching `nodes`; sign is compared to `expected`.
InjectivityVerdict check_injectivity(const GridMapping& h, const std::vector<std::size_t>& nodes,
                                     std::optional<Orientation> expected = std::nullopt);

/// max over masked nodes of |h1 - h2|; throws on domain mismatch.
double sup_distance(const GridMapping& h1, const GridMapping& h2);

/// Royden norm of the difference restricted to what changed:
/// sup |h1 - h2| and ||D(h1 - h2)||_L2.
struct DifferenceNorm {
  double sup = 0.0;
  double grad_l2 = 0.0;
  double royden() const { return sup + grad_l2; }
};
DifferenceNorm difference_norm(const GridMapping& h1, const GridMapping& h2);

}  // namespace hs
