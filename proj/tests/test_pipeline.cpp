#include <cmath>
#include <cstring>

#include "doctest.h"
#include "hs/error.hpp"
#include "hs/hopf.hpp"
#include "hs/pipeline.hpp"

using namespace hs;

namespace {

GridMapping shear_kink(int cells) {
  const GridDomain d(Point(0, 0), 1.0 / cells, cells, cells);
  return GridMapping::sample(d, [](Point p) { return Point(p.real() + 0.2 * std::abs(p.imag() - 0.5), p.imag()); });
}

GridMapping bump_map(int cells) {
  const GridDomain d(Point(0, 0), 1.0 / cells, cells, cells);
  return GridMapping::sample(d, [](Point p) {
    const Point c(0.45, 0.55);
    return p + 0.1 * Point(1.0, 0.5) * std::exp(-std::norm(p - c) / 0.02);
  });
}

bool bit_equal(const GridMapping& a, const GridMapping& b) {
  for (std::size_t n = 0; n < a.domain().node_count(); ++n) {
    if (!a.domain().node_masked(n)) continue;
    const Complex x = a[n], y = b[n];
    if (std::memcmp(&x, &y, sizeof(Complex)) != 0) return false;
  }
  return true;
}

std::vector<std::size_t> changed_nodes(const GridMapping& a, const GridMapping& b) {
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < a.domain().node_count(); ++n)
    if (a.domain().node_masked(n) && a[n] != b[n]) out.push_back(n);
  return out;
}

// Four squares tiling the unit square, with lenses thick enough to hold nodes.
struct Chain {
  GridMapping h1;
  CellPartition partition;
  Step2Result s2;
};

Chain quad_chain(double eps) {
  Chain c;
  c.h1 = bump_map(128);
  const DyadicLattice lat{1.0, Point(0.0, 0.0)};
  c.partition = build_partition(c.h1, {{1, 0, 0}, {1, 1, 0}, {1, 0, 1}, {1, 1, 1}}, lat);
  c.s2 = step2_lens_replacement(c.h1, c.partition, eps, PipelineConfig{});
  return c;
}

}  // namespace

TEST_CASE("config validation") {
  PipelineConfig c;
  CHECK_NOTHROW(c.validate());
  c.epsilon = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c.epsilon = 0.1;
  c.resolution = 96;
  CHECK_THROWS_WITH_AS(c.validate(), "resolution must be a power of two >= 64", Error);
  c.resolution = 32;
  CHECK_THROWS_AS(c.validate(), Error);
  c.resolution = 128;
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("discrete-harmonic input is returned unchanged") {
  const GridDomain d(Point(0, 0), 1.0 / 64, 64, 64);
  const GridMapping h = GridMapping::sample(d, [](Point p) { return Point(2.0 * p.real() + 0.3 * p.imag(), p.imag()); });
  PipelineConfig cfg;
  cfg.epsilon = 0.05;
  const PipelineResult r = run_pipeline(h, cfg);
  CHECK(r.report.early_return);
  CHECK(bit_equal(r.H, h));
  CHECK(r.report.all_budgets_met());
  CHECK(r.report.royden_diff.royden() == 0.0);
  CHECK(!r.report.delta.has_value());
}

TEST_CASE("input must be orientation-uniform") {
  const GridDomain d(Point(0, 0), 1.0 / 32, 32, 32);
  const GridMapping h = GridMapping::sample(d, [](Point p) { return Point(std::abs(p.real() - 0.5), p.imag()); });
  CHECK_THROWS_WITH_AS(run_pipeline(h, PipelineConfig{}), "input is not orientation-uniform", Error);
}

TEST_CASE("image domain covers the image") {
  const GridMapping h = shear_kink(64);
  const GridDomain t = image_domain(h);
  CHECK(t.spacing() == doctest::Approx(1.0 / 64));
  // area of the sheared square is 1
  CHECK(t.masked_area() == doctest::Approx(1.0).epsilon(0.05));
  CHECK(image_domain(h, 128).spacing() == doctest::Approx(1.1 / 128));
}

TEST_CASE("preimage energy splits the total") {
  const GridMapping h = bump_map(64);
  const double left = preimage_energy(h, [](Point w) { return w.real() < 0.5; });
  const double right = preimage_energy(h, [](Point w) { return w.real() >= 0.5; });
  CHECK(left + right == doctest::Approx(dirichlet_energy(h)).epsilon(1e-12));
  CHECK(preimage_energy(GridMapping::identity(h.domain()), [](Point) { return true; }) ==
        doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("step 1 on a bump map: sup budget and per-square Dirichlet audit") {
  const GridMapping h = bump_map(256);
  const double eps = 0.2;
  const Step1Result s1 = step1_harmonic_partition(h, eps, PipelineConfig{});
  CHECK(sup_distance(s1.h1, h) <= eps);
  CHECK(s1.audit.royden() <= 2.0 * eps);
  CHECK(s1.audit.injective);
  CHECK(s1.audit.changed_nodes > 0);
  CHECK(dirichlet_energy(s1.h1) <= dirichlet_energy(h));

  // regrouping by the images under h gives the regions that were replaced
  const CellPartition byh = build_partition(h, s1.partition.squares, s1.partition.lattice);
  const GridDomain& d = h.domain();
  std::vector<std::vector<std::size_t>> groups(byh.squares.size());
  for (std::size_t n = 0; n < d.node_count(); ++n)
    if (byh.labels[n] >= 0) groups[static_cast<std::size_t>(byh.labels[n])].push_back(n);
  int audited = 0;
  for (const auto& g : groups) {
    NodeSet set(d.node_count());
    for (auto n : g) set.insert(n);
    const RegionSplit split = split_region(d, set);
    if (split.interior.empty()) continue;
    CHECK(star_energy(s1.h1, split.interior) <= star_energy(h, split.interior) + 1e-12);
    ++audited;
  }
  CHECK(audited > 10);
}

TEST_CASE("step 1 subsquare count does not decrease as eps halves") {
  const GridMapping h = shear_kink(256);
  std::size_t prev = 0;
  for (double eps : {0.4, 0.2, 0.1}) {
    const Step1Result s1 = step1_harmonic_partition(h, eps / 14.0, PipelineConfig{});
    CHECK(s1.partition.squares.size() >= prev);
    prev = s1.partition.squares.size();
  }
}

TEST_CASE("step 1 reports resolution exhaustion") {
  const GridMapping h = shear_kink(16);
  try {
    step1_harmonic_partition(h, 1e-4, PipelineConfig{});
    FAIL("expected a step error");
  } catch (const StepError& e) {
    CHECK(e.step() == 1);
    CHECK(std::string(e.what()).find("resolution exhausted") != std::string::npos);
  }
  PipelineConfig cfg;
  cfg.epsilon = 1e-3;
  CHECK_THROWS_AS(run_pipeline(h, cfg), StepError);
}

TEST_CASE("step 2 with a single square is the identity") {
  const GridMapping h = bump_map(64);
  const DyadicLattice lat{4.0, Point(-1.0, -1.0)};
  const CellPartition p = build_partition(h, {DyadicSquare{0, 0, 0}}, lat);
  CHECK(p.adjacency.empty());
  const Step2Result s2 = step2_lens_replacement(h, p, 0.1, PipelineConfig{});
  CHECK(bit_equal(s2.h2, h));
  CHECK(s2.lenses.empty());
}

TEST_CASE("step 2 on two squares: energy decreases inside the lens, unchanged outside") {
  const GridMapping h = bump_map(128);
  const DyadicLattice lat{1.0, Point(0.0, 0.25)};
  const CellPartition p = build_partition(h, {DyadicSquare{1, 0, 0}, DyadicSquare{1, 1, 0}}, lat);
  REQUIRE(p.adjacency.size() == 1);
  const double eps = 1.0;
  const Step2Result s2 = step2_lens_replacement(h, p, eps, PipelineConfig{});
  REQUIRE(s2.lenses.size() == 1);
  const LensRecord& L = s2.lenses[0];
  CHECK(L.unknowns > 0);
  CHECK(L.energy < L.budget);
  CHECK(dirichlet_energy(s2.h2) <= dirichlet_energy(h) + 1e-12);
  CHECK(s2.audit.royden() <= 3.0 * eps);
  CHECK(s2.audit.injective);
  for (auto n : changed_nodes(s2.h2, h)) CHECK(L.lens.contains(h[n]));
}

TEST_CASE("step 2 lenses are disjoint") {
  const Chain c = quad_chain(1.0);
  REQUIRE(c.s2.lenses.size() == 4);
  std::size_t active = 0;
  for (const auto& l : c.s2.lenses) active += l.unknowns > 0;
  CHECK(active > 0);
  for (auto n : changed_nodes(c.s2.h2, c.h1)) {
    int owners = 0;
    for (const auto& l : c.s2.lenses) owners += l.lens.contains(c.h1[n]);
    CHECK(owners == 1);
  }
  CHECK(c.s2.audit.injective);
  CHECK(dirichlet_energy(c.s2.h2) <= dirichlet_energy(c.h1) + 1e-12);
}

TEST_CASE("step 3: arcs certified in the pullback chart, node values unchanged") {
  const Chain c = quad_chain(1.0);
  const double eps = 0.05;
  const Step3Result s3 = step3_smooth_arcs(c.s2.h2, c.partition, c.s2.lenses, eps, PipelineConfig{});
  CHECK(bit_equal(s3.h3, c.s2.h2));
  CHECK(s3.certified_arcs > 0);
  // the core compresses by 1 / (2M) with M = 1, so det Dg = 1/2 there
  CHECK(s3.max_M >= 2.0 - 1e-9);
  CHECK(s3.max_M <= 21.0);
  CHECK(s3.disk_energy < eps * eps);
  CHECK(s3.disks.tripled_disjoint());
  CHECK(s3.audit.budget_met);

  // no lenses at all
  const Step3Result empty = step3_smooth_arcs(c.s2.h2, c.partition, {}, eps, PipelineConfig{});
  CHECK(empty.certified_arcs == 0);
  CHECK(bit_equal(empty.h3, c.s2.h2));
}

TEST_CASE("step 4: per-disk Dirichlet audit and the sup bound") {
  const GridMapping h = bump_map(256);
  const Step1Result s1 = step1_harmonic_partition(h, 0.2 / 14.0, PipelineConfig{});
  const double eps = 0.2;
  VertexDiskFamily disks = build_vertex_disks(s1.partition, eps);
  REQUIRE(!disks.disks.empty());
  const Step4Result s4 = step4_vertex_disks(s1.h1, disks, eps, PipelineConfig{});
  CHECK(!s4.active.empty());
  CHECK(s4.audit.injective);
  double rmax = 0.0;
  for (auto k : s4.active) rmax = std::max(rmax, disks.disks[k].radius);
  CHECK(s4.audit.sup <= 4.0 * rmax);
  CHECK(s4.audit.sup <= 2.0 * eps);
  CHECK(dirichlet_energy(s4.h4) <= dirichlet_energy(s1.h1) + 1e-12);
  for (auto n : changed_nodes(s4.h4, s1.h1)) {
    bool inside = false;
    for (auto k : s4.active)
      inside = inside || std::abs(s1.h1[n] - disks.disks[k].center) < 2.0 * disks.disks[k].radius;
    CHECK(inside);
  }

  // step 5 over the same disks
  const Step5Result s5 = step5_smooth_circles(s4.h4, disks, s4.active, eps, PipelineConfig{});
  CHECK(s5.certified_circles == s4.active.size());
  CHECK(bit_equal(s5.H, s4.h4));

  // overlapping disks
  VertexDiskFamily bad;
  bad.disks = {{Point(0.5, 0.5), 0.1}, {Point(0.55, 0.5), 0.1}};
  try {
    step4_vertex_disks(s1.h1, bad, eps, PipelineConfig{});
    FAIL("expected a step error");
  } catch (const StepError& e) {
    CHECK(e.step() == 4);
    CHECK(std::string(e.what()).find("disk family invalid") != std::string::npos);
  }

  // no vertices
  const Step4Result none = step4_vertex_disks(s1.h1, VertexDiskFamily{}, eps, PipelineConfig{});
  CHECK(bit_equal(none.h4, s1.h1));
  CHECK(none.active.empty());
}

TEST_CASE("shear-kink end to end at 128^2") {
  const GridMapping h = shear_kink(128);
  PipelineConfig cfg;
  cfg.epsilon = 0.2;
  const PipelineResult r = run_pipeline(h, cfg);
  const PipelineReport& R = r.report;
  CHECK(!R.early_return);
  CHECK(R.boundary_exact);
  CHECK(R.royden_diff.royden() <= cfg.epsilon);
  CHECK(R.energy_H <= R.energy_h + 1e-8);
  CHECK(R.all_budgets_met());
  REQUIRE(R.steps.size() == 5);
  REQUIRE(r.snapshots.size() == 5);
  double sup_sum = 0.0;
  for (const auto& s : R.steps) {
    CHECK(s.injective);
    CHECK(s.budget_met);
    sup_sum += s.sup;
  }
  CHECK(R.royden_diff.sup <= sup_sum + 1e-15);
  // harmonic replacements never raise the energy
  CHECK(R.steps[0].energy <= R.energy_h);
  CHECK(R.steps[1].energy <= R.steps[0].energy);
  CHECK(R.steps[3].energy <= R.steps[2].energy);
  REQUIRE(R.delta.has_value());
  CHECK(*R.delta > 0.0);
  CHECK(bit_equal(r.snapshots.back(), r.H));
}

TEST_CASE("eps scaling of the final A-norm difference") {
  const GridMapping h = shear_kink(256);
  std::vector<double> a;
  for (double eps : {0.4, 0.2, 0.1}) {
    PipelineConfig cfg;
    cfg.epsilon = eps;
    a.push_back(run_pipeline(h, cfg).report.royden_diff.royden());
  }
  for (std::size_t k = 1; k < a.size(); ++k) {
    CHECK(a[k] <= 1.1 * a[k - 1]);
    CHECK(a[k - 1] <= 2.2 * a[k]);
  }
}

TEST_CASE("finite-energy run on the annulus example") {
  const GridDomain d = GridDomain::from_predicate(Point(-2.0, -2.0), 4.0 / 128, 128, 128, [](Point p) {
    const double a = std::abs(p);
    return a > 1.1 && a < 2.0;
  });
  const GridMapping h = example_annulus_map(d);
  PipelineConfig cfg;
  cfg.epsilon = 0.2;
  const PipelineResult r = run_pipeline(h, cfg);
  CHECK(r.report.energy_H <= r.report.energy_h + 1e-8);
  CHECK(r.report.boundary_exact);
  CHECK(r.report.all_budgets_met());
}
