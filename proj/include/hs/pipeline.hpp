#pragma once

// The five-step construction turning a grid homeomorphism h into an
// approximant H with H = h on the boundary, ||H - h||_A <= eps and, in
// finite-energy mode, E[H] <= E[h].
//
// Every step works with the internal budget eps' = eps / 14. Wherever a
// "small enough" choice is needed, a scale parameter is halved (or doubled)
// and the budget re-measured.

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hs/domain.hpp"
#include "hs/field.hpp"
#include "hs/grid.hpp"
#include "hs/harmonic.hpp"

namespace hs {

struct PipelineConfig {
  double epsilon = 0.1;
  /// Cap on the dyadic level; the grid floor (squares of at least four target
  /// cells) applies as well.
  int max_refine_level = 30;
  /// Cells across the longer side of the target grid used for the dyadic
  /// decomposition; 0 picks the source spacing. Otherwise a power of two >= 64.
  int resolution = 0;
  SolverOptions solver{1e-12, 20};
  bool finite_energy = true;
  /// Sobol samples per certified interface.
  std::size_t certify_samples = 4096;
  /// Throws hs::Error on invalid values.
  void validate() const;
};

struct StepAudit {
  int step = 0;
  std::string name;
  /// ||h_k - h_{k-1}||_C and ||D(h_k - h_{k-1})||_L2
  double sup = 0.0;
  double grad = 0.0;
  double royden() const { return sup + grad; }
  /// per-step A-norm budget in units of eps': 2, 3, 2, 6, 1
  double bound = 0.0;
  bool budget_met = true;
  bool injective = true;
  double energy = 0.0;
  std::size_t changed_nodes = 0;
  std::string note;
};

struct PipelineReport {
  double epsilon = 0.0;
  double epsilon_internal = 0.0;
  bool finite_energy = true;
  bool early_return = false;
  std::vector<StepAudit> steps;
  /// ||Dh|| - ||Dh_1|| (finite-energy mode, when Step 1 changed h)
  std::optional<double> delta;
  double energy_h = 0.0;
  double energy_H = 0.0;
  DifferenceNorm royden_diff;
  bool boundary_exact = true;
  bool injective = true;

  std::size_t squares = 0;        // maximal dyadic squares
  std::size_t subsquares = 0;     // after refinement
  std::size_t lenses = 0;         // shared edges
  std::size_t active_lenses = 0;  // lenses whose preimage carries unknowns
  std::size_t vertices = 0;
  std::size_t active_disks = 0;
  std::size_t certified_arcs = 0;
  std::size_t certified_circles = 0;
  double max_arc_M = 0.0;

  /// Every per-step budget and the three final conclusions hold.
  bool all_budgets_met() const;
};

// ---- steps ----
// In the step functions `eps` is the internal budget eps'.

/// Target grid covering the image of h (cells whose center has a preimage).
GridDomain image_domain(const GridMapping& h, int resolution = 0);

/// Integral of |Dh|^2 over the triangles whose image centroid satisfies `in`.
double preimage_energy(const GridMapping& h, const std::function<bool(Point)>& in);

struct Step1Result {
  GridMapping h1;
  CellPartition partition;
  std::size_t squares = 0;
  /// refinement depth per maximal square
  std::vector<int> depth;
  StepAudit audit;
};

/// Harmonic replacement on the preimages of refined dyadic squares. Squares
/// are refined (worst first) until every square moves h by at most eps' in
/// sup and the whole step stays within 2 eps' in A-norm. Throws StepError(1,
/// "resolution exhausted: ...") at the grid floor.
Step1Result step1_harmonic_partition(const GridMapping& h, double eps, const PipelineConfig& cfg);

struct LensRecord {
  SharedEdge edge;
  LensSpec lens;
  double energy = 0.0;  // integral of |Dh_1|^2 over the lens preimage
  double budget = 0.0;
  std::size_t unknowns = 0;
};

struct Step2Result {
  GridMapping h2;
  std::vector<LensRecord> lenses;
  /// nodes claimed by two lenses, removed from both
  std::size_t overlap_nodes = 0;
  StepAudit audit;
};

/// Doubly convex lenses over the shared edges, R doubled from 2|ab| until the
/// preimage energy is below eps'^2 * |ab| / (total edge length); harmonic
/// replacement on the lens preimages.
Step2Result step2_lens_replacement(const GridMapping& h1, const CellPartition& partition, double eps,
                                   const PipelineConfig& cfg);

struct Step3Result {
  GridMapping h3;
  VertexDiskFamily disks;
  std::size_t certified_arcs = 0;
  double max_M = 0.0;
  double disk_energy = 0.0;  // sum over v of the integral over h^-1(3 D_v)
  StepAudit audit;
};

/// Vertex disks shrunk until their tripled preimages carry energy below
/// eps'^2, then the lens arcs (truncated by the disks) are smoothed in the
/// pullback chart. Throws StepError(3, ...) when a chart cannot be built.
Step3Result step3_smooth_arcs(const GridMapping& h2, const CellPartition& partition,
                              const std::vector<LensRecord>& lenses, double eps, const PipelineConfig& cfg);

struct Step4Result {
  GridMapping h4;
  std::vector<std::size_t> active;  // disks whose preimage carries unknowns
  std::size_t reverted = 0;
  StepAudit audit;
};

/// Harmonic replacement on h3^-1(2 D_v). Throws StepError(4, "disk family
/// invalid") when two preimages overlap.
Step4Result step4_vertex_disks(const GridMapping& h3, const VertexDiskFamily& disks, double eps,
                               const PipelineConfig& cfg);

struct Step5Result {
  GridMapping H;
  std::size_t certified_circles = 0;
  StepAudit audit;
};

Step5Result step5_smooth_circles(const GridMapping& h4, const VertexDiskFamily& disks,
                                 const std::vector<std::size_t>& active, double eps, const PipelineConfig& cfg);

struct PipelineResult {
  GridMapping H;
  PipelineReport report;
  /// h_1 ... h_5
  std::vector<GridMapping> snapshots;
};

/// Runs the five steps with eps' = cfg.epsilon / 14. Step failures propagate
/// as StepError carrying the step index. `on_step` sees each step's audit and
/// output as soon as the step finishes, so callers keep partial results.
using StepCallback = std::function<void(const StepAudit&, const GridMapping&)>;
PipelineResult run_pipeline(const GridMapping& h, const PipelineConfig& cfg, const StepCallback& on_step = {});

}  // namespace hs
