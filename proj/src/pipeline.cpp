#include "hs/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <numbers>
#include <unordered_map>

#include "hs/error.hpp"
#include "hs/hopf.hpp"
#include "hs/parallel.hpp"
#include "hs/smoothing.hpp"

namespace hs {

namespace {

// Bucket grid over a point cloud for box queries.
class PointIndex {
 public:
  explicit PointIndex(std::vector<Point> pts) : pts_(std::move(pts)) {
    if (pts_.empty()) return;
    lo_ = hi_ = pts_.front();
    for (Point p : pts_) {
      lo_ = {std::min(lo_.real(), p.real()), std::min(lo_.imag(), p.imag())};
      hi_ = {std::max(hi_.real(), p.real()), std::max(hi_.imag(), p.imag())};
    }
    const double ext = std::max({hi_.real() - lo_.real(), hi_.imag() - lo_.imag(), 1e-300});
    const int side = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(pts_.size())) / 2));
    cell_ = ext / side;
    bx_ = static_cast<int>((hi_.real() - lo_.real()) / cell_) + 1;
    by_ = static_cast<int>((hi_.imag() - lo_.imag()) / cell_) + 1;
    buckets_.resize(static_cast<std::size_t>(bx_) * by_);
    for (std::size_t k = 0; k < pts_.size(); ++k) buckets_[bucket(pts_[k])].push_back(k);
  }

  template <class Fn>
  void query(Point lo, Point hi, Fn&& fn) const {
    if (pts_.empty()) return;
    const int i0 = clampx(lo.real()), i1 = clampx(hi.real());
    const int j0 = clampy(lo.imag()), j1 = clampy(hi.imag());
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i)
        for (std::size_t k : buckets_[static_cast<std::size_t>(j) * bx_ + i]) fn(k, pts_[k]);
  }

 private:
  int clampx(double x) const { return std::clamp(static_cast<int>(std::floor((x - lo_.real()) / cell_)), 0, bx_ - 1); }
  int clampy(double y) const { return std::clamp(static_cast<int>(std::floor((y - lo_.imag()) / cell_)), 0, by_ - 1); }
  std::size_t bucket(Point p) const { return static_cast<std::size_t>(clampy(p.imag())) * bx_ + clampx(p.real()); }

  std::vector<Point> pts_;
  Point lo_, hi_;
  double cell_ = 1.0;
  int bx_ = 1, by_ = 1;
  std::vector<std::vector<std::size_t>> buckets_;
};

// Image centroids and P1 energies of every masked triangle.
struct TriangleEnergies {
  std::vector<double> energy;
  PointIndex index;
};

double tri_energy(Complex d1, Complex d2) { return 0.5 * (std::norm(d1) + std::norm(d2)); }

TriangleEnergies triangle_energies(const GridMapping& h) {
  std::vector<Point> cent;
  std::vector<double> en;
  for_each_triangle(h.domain(), [&](const Triangle& t) {
    const Complex a = h[t.nodes[0]], b = h[t.nodes[1]], c = h[t.nodes[2]];
    cent.push_back((a + b + c) / 3.0);
    // lower: x-step a->b, y-step b->c; upper: x-step c->b, y-step a->c
    en.push_back(t.upper ? tri_energy(b - c, c - a) : tri_energy(b - a, c - b));
  });
  return {std::move(en), PointIndex(std::move(cent))};
}

PointIndex node_index(const GridMapping& h, std::vector<std::size_t>& ids) {
  std::vector<Point> pts;
  ids.clear();
  for (std::size_t n = 0; n < h.domain().node_count(); ++n)
    if (h.domain().node_masked(n)) {
      ids.push_back(n);
      pts.push_back(h[n]);
    }
  return PointIndex(std::move(pts));
}

double energy_in_box(const TriangleEnergies& te, Point lo, Point hi, const std::function<bool(Point)>& in) {
  double e = 0.0;
  te.index.query(lo, hi, [&](std::size_t k, Point c) {
    if (in(c)) e += te.energy[k];
  });
  return e;
}

// ||D(after - before)||^2 when `after` differs from `before` only at the listed nodes.
double change_energy(const GridDomain& d, const std::vector<std::pair<std::size_t, Complex>>& changes,
                     const GridMapping& before) {
  std::unordered_map<std::size_t, Complex> delta;
  for (const auto& [n, v] : changes) delta[n] = v - before[n];
  std::vector<std::size_t> cells;
  for (const auto& [n, v] : changes) {
    const int i = d.col(n), j = d.row(n);
    for (int cj = j - 1; cj <= j; ++cj)
      for (int ci = i - 1; ci <= i; ++ci)
        if (ci >= 0 && cj >= 0 && ci < d.cells_x() && cj < d.cells_y() && d.cell(ci, cj))
          cells.push_back(static_cast<std::size_t>(cj) * d.cells_x() + ci);
  }
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  auto dv = [&](int i, int j) {
    auto it = delta.find(d.index(i, j));
    return it == delta.end() ? Complex{} : it->second;
  };
  double e = 0.0;
  for (std::size_t c : cells) {
    const int i = static_cast<int>(c % d.cells_x()), j = static_cast<int>(c / d.cells_x());
    const Complex a = dv(i, j), b = dv(i + 1, j), cc = dv(i + 1, j + 1), u = dv(i, j + 1);
    e += tri_energy(b - a, cc - b) + tri_energy(cc - u, u - a);
  }
  return e;
}

NodeSet make_set(const GridDomain& d, const std::vector<std::size_t>& nodes) {
  NodeSet s(d.node_count());
  for (auto n : nodes) s.insert(n);
  return s;
}

struct Replacement {
  std::vector<std::pair<std::size_t, Complex>> values;  // new values at the unknowns
  std::vector<std::size_t> region;
  double sup = 0.0;
};

// Harmonic replacement on a node set; empty when it has no unknowns.
Replacement replace_on(const GridMapping& h, const std::vector<std::size_t>& nodes, const SolverOptions& so) {
  Replacement r;
  r.region = nodes;
  const GridDomain& d = h.domain();
  const NodeSet set = make_set(d, nodes);
  if (split_region(d, set).interior.empty()) return r;
  const HarmonicSolve s = poisson_extend(h, set, so);
  for (auto n : s.split.interior) {
    r.values.emplace_back(n, s.values[n]);
    r.sup = std::max(r.sup, std::abs(s.values[n] - h[n]));
  }
  return r;
}

Orientation orientation_of(const GridMapping& h) { return check_injectivity(h).orientation; }

StepAudit make_audit(int step, const char* name, const GridMapping& before, const GridMapping& after, double bound) {
  StepAudit a;
  a.step = step;
  a.name = name;
  const DifferenceNorm dn = difference_norm(after, before);
  a.sup = dn.sup;
  a.grad = dn.grad_l2;
  a.bound = bound;
  a.budget_met = a.royden() <= bound;
  a.injective = check_injectivity(after).orientation_uniform;
  a.energy = dirichlet_energy(after);
  for (std::size_t n = 0; n < before.domain().node_count(); ++n)
    if (before.domain().node_masked(n) && before[n] != after[n]) ++a.changed_nodes;
  return a;
}

Jet identity_jet(Point z) { return {z, Mat2{}}; }

std::string square_name(const DyadicSquare& q) {
  return "(" + std::to_string(q.level) + ", " + std::to_string(q.i) + ", " + std::to_string(q.j) + ")";
}

}  // namespace

void PipelineConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw Error("epsilon must be positive");
  if (max_refine_level < 0) throw Error("max_refine_level must be nonnegative");
  if (resolution != 0 && (resolution < 64 || !std::has_single_bit(static_cast<unsigned>(resolution))))
    throw Error("resolution must be a power of two >= 64");
  if (!(solver.relative_tolerance > 0.0)) throw Error("solver tolerance must be positive");
}

bool PipelineReport::all_budgets_met() const {
  for (const auto& s : steps)
    if (!s.budget_met || !s.injective) return false;
  if (!boundary_exact || !injective) return false;
  if (royden_diff.royden() > epsilon) return false;
  if (finite_energy && energy_H > energy_h + 1e-8) return false;
  return true;
}

GridDomain image_domain(const GridMapping& h, int resolution) {
  const GridDomain& d = h.domain();
  Point lo{INFINITY, INFINITY}, hi{-INFINITY, -INFINITY};
  for (std::size_t n = 0; n < d.node_count(); ++n)
    if (d.node_masked(n)) {
      lo = {std::min(lo.real(), h[n].real()), std::min(lo.imag(), h[n].imag())};
      hi = {std::max(hi.real(), h[n].real()), std::max(hi.imag(), h[n].imag())};
    }
  if (!std::isfinite(lo.real())) throw Error("empty domain");
  const double ext = std::max(hi.real() - lo.real(), hi.imag() - lo.imag());
  const double s = resolution > 0 ? ext / resolution : d.spacing();
  const int cx = static_cast<int>(std::ceil((hi.real() - lo.real()) / s)) + 1;
  const int cy = static_cast<int>(std::ceil((hi.imag() - lo.imag()) / s)) + 1;
  const Point origin = lo - Point(0.5 * s, 0.5 * s);
  const ImageLocator loc(h);
  return GridDomain::from_predicate(origin, s, cx, cy, [&](Point w) { return loc.preimage(w).has_value(); });
}

double preimage_energy(const GridMapping& h, const std::function<bool(Point)>& in) {
  double e = 0.0;
  for_each_triangle(h.domain(), [&](const Triangle& t) {
    const Complex a = h[t.nodes[0]], b = h[t.nodes[1]], c = h[t.nodes[2]];
    if (!in((a + b + c) / 3.0)) return;
    e += t.upper ? tri_energy(b - c, c - a) : tri_energy(b - a, c - b);
  });
  return e;
}

// ---- Step 1 ----

namespace {

struct SquareEval {
  std::vector<std::pair<std::size_t, Complex>> values;
  double sup = 0.0;
  double g2 = 0.0;
};

SquareEval evaluate_square(const GridMapping& h, const std::vector<std::size_t>& members, const DyadicSquare& q,
                           int k, const DyadicLattice& lat, const SolverOptions& so) {
  const std::int64_t m = std::int64_t{1} << k;
  const double s = q.side(lat) / static_cast<double>(m);
  const Point ll = q.lower_left(lat);
  std::map<std::int64_t, std::vector<std::size_t>> groups;
  for (auto n : members) {
    const Point w = (h[n] - ll) / s;
    const std::int64_t i = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(w.real())), 0, m - 1);
    const std::int64_t j = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(w.imag())), 0, m - 1);
    groups[j * m + i].push_back(n);
  }
  SquareEval out;
  for (const auto& [key, nodes] : groups) {
    Replacement r = replace_on(h, nodes, so);
    out.sup = std::max(out.sup, r.sup);
    out.values.insert(out.values.end(), r.values.begin(), r.values.end());
  }
  out.g2 = change_energy(h.domain(), out.values, h);
  return out;
}

}  // namespace

Step1Result step1_harmonic_partition(const GridMapping& h, double eps, const PipelineConfig& cfg) {
  const GridDomain target = image_domain(h, cfg.resolution);
  const double ext = std::max(target.cells_x(), target.cells_y()) * target.spacing();
  const double base = std::exp2(std::ceil(std::log2(ext)));
  const DyadicLattice lat = DyadicLattice::with_default_offset(base);
  const int floor_level = std::min(cfg.max_refine_level, default_max_level(target, base));
  const Decomposition dec = decompose_dyadic(target, floor_level, lat);
  if (dec.squares.empty()) throw StepError(1, "resolution exhausted: no dyadic square fits the image");

  const CellPartition base_part = build_partition(h, dec.squares, lat);
  const std::size_t nq = dec.squares.size();
  std::vector<std::vector<std::size_t>> members(nq);
  for (std::size_t n = 0; n < base_part.labels.size(); ++n)
    if (base_part.labels[n] >= 0) members[static_cast<std::size_t>(base_part.labels[n])].push_back(n);

  std::vector<int> depth(nq, 0);
  std::vector<SquareEval> ev(nq);
  auto run = [&](const std::vector<std::size_t>& which) {
    parallel_tasks(which.size(), [&](std::size_t t) {
      const std::size_t q = which[t];
      ev[q] = evaluate_square(h, members[q], dec.squares[q], depth[q], lat, cfg.solver);
    });
  };
  std::vector<std::size_t> all(nq);
  for (std::size_t q = 0; q < nq; ++q) all[q] = q;
  run(all);

  for (;;) {
    double sup = 0.0, g2 = 0.0, gmax = 0.0;
    for (const auto& e : ev) {
      sup = std::max(sup, e.sup);
      g2 += e.g2;
      gmax = std::max(gmax, e.g2);
    }
    const bool sup_ok = sup <= eps;
    const bool total_ok = sup + std::sqrt(g2) <= 2.0 * eps;
    if (sup_ok && total_ok) break;
    auto at_floor = [&](std::size_t q) { return dec.squares[q].level + depth[q] + 1 > floor_level; };
    std::vector<std::size_t> refine;
    std::optional<std::size_t> stuck;
    double gref = 0.0;
    for (std::size_t q = 0; q < nq; ++q)
      if (!at_floor(q)) gref = std::max(gref, ev[q].g2);
    for (std::size_t q = 0; q < nq; ++q) {
      if (ev[q].sup > eps) {
        if (at_floor(q)) stuck = q;
        refine.push_back(q);
      } else if (!total_ok && !at_floor(q) && ev[q].g2 > 0.0 && ev[q].g2 >= 0.25 * gref) {
        refine.push_back(q);
      }
    }
    if (!stuck && refine.empty())
      stuck = static_cast<std::size_t>(
          std::max_element(ev.begin(), ev.end(), [](const auto& a, const auto& b) { return a.g2 < b.g2; }) -
          ev.begin());
    if (stuck) {
      const auto& q = dec.squares[*stuck];
      throw StepError(1, "resolution exhausted: square " + square_name(q) + " at the grid floor (sup " +
                             std::to_string(sup) + ", A-norm " + std::to_string(sup + std::sqrt(g2)) +
                             ", budget " + std::to_string(2.0 * eps) + ")");
    }
    for (auto q : refine) ++depth[q];
    run(refine);
  }

  Step1Result out;
  GridMapping h1 = h;
  for (const auto& e : ev)
    for (const auto& [n, v] : e.values) h1[n] = v;
  std::vector<DyadicSquare> subs;
  for (std::size_t q = 0; q < nq; ++q) {
    const auto r = refine_square(dec.squares[q], depth[q]);
    subs.insert(subs.end(), r.begin(), r.end());
  }
  out.partition = build_partition(h1, std::move(subs), lat);
  out.squares = nq;
  out.depth = depth;
  out.audit = make_audit(1, "harmonic partition", h, h1, 2.0 * eps);
  out.h1 = std::move(h1);
  return out;
}

// ---- Step 2 ----

namespace {

void arc_box(const Arc& a, Point& lo, Point& hi) {
  const int n = 16;
  for (int k = 0; k <= n; ++k) {
    const Point p = a.at(a.theta0 + (a.theta1 - a.theta0) * k / n);
    lo = {std::min(lo.real(), p.real()), std::min(lo.imag(), p.imag())};
    hi = {std::max(hi.real(), p.real()), std::max(hi.imag(), p.imag())};
  }
  // chords between samples stay within radius * (1 - cos(dtheta / 2)) of the arc
  const double pad = a.radius * (1.0 - std::cos(0.5 * (a.theta1 - a.theta0) / n)) + 1e-12;
  lo -= Point(pad, pad);
  hi += Point(pad, pad);
}

void lens_box(const LensSpec& l, Point& lo, Point& hi) {
  lo = {INFINITY, INFINITY};
  hi = {-INFINITY, -INFINITY};
  for (const auto& a : l.arcs) arc_box(a, lo, hi);
}

}  // namespace

Step2Result step2_lens_replacement(const GridMapping& h1, const CellPartition& partition, double eps,
                                   const PipelineConfig& cfg) {
  Step2Result out;
  const auto& edges = partition.adjacency;
  double total_len = 0.0;
  for (const auto& e : edges) total_len += e.length();

  const TriangleEnergies te = triangle_energies(h1);
  out.lenses.resize(edges.size());
  parallel_tasks(edges.size(), [&](std::size_t k) {
    const SharedEdge& e = edges[k];
    LensRecord& rec = out.lenses[k];
    rec.edge = e;
    rec.budget = eps * eps * e.length() / total_len;
    double R = 2.0 * e.length();
    for (int it = 0; it <= 40; ++it, R *= 2.0) {
      rec.lens = build_lens(e, LensKind::DoublyConvex, R);
      Point lo, hi;
      lens_box(rec.lens, lo, hi);
      rec.energy = energy_in_box(te, lo, hi, [&](Point c) { return rec.lens.contains(c); });
      if (rec.energy < rec.budget) return;
    }
    throw StepError(2, "resolution exhausted: lens budget unreachable on edge " + std::to_string(k));
  });

  std::vector<std::size_t> ids;
  const PointIndex nodes = node_index(h1, ids);
  const GridDomain& d = h1.domain();
  std::vector<std::vector<std::size_t>> sets(edges.size());
  std::vector<std::uint8_t> claims(d.node_count(), 0);
  for (std::size_t k = 0; k < edges.size(); ++k) {
    Point lo, hi;
    lens_box(out.lenses[k].lens, lo, hi);
    nodes.query(lo, hi, [&](std::size_t id, Point w) {
      if (out.lenses[k].lens.contains(w)) {
        sets[k].push_back(ids[id]);
        claims[ids[id]] = static_cast<std::uint8_t>(std::min(2, claims[ids[id]] + 1));
      }
    });
  }
  for (auto& s : sets) {
    const auto before = s.size();
    std::erase_if(s, [&](std::size_t n) { return claims[n] > 1; });
    out.overlap_nodes += before - s.size();
  }

  std::vector<Replacement> reps(edges.size());
  parallel_tasks(edges.size(), [&](std::size_t k) {
    if (sets[k].size() >= 5) reps[k] = replace_on(h1, sets[k], cfg.solver);
  });
  GridMapping h2 = h1;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    out.lenses[k].unknowns = reps[k].values.size();
    for (const auto& [n, v] : reps[k].values) h2[n] = v;
  }
  out.audit = make_audit(2, "lens replacement", h1, h2, 3.0 * eps);
  out.h2 = std::move(h2);
  return out;
}

// ---- Step 3 ----

namespace {

std::pair<double, double> key(Point p) { return {p.real(), p.imag()}; }

}  // namespace

Step3Result step3_smooth_arcs(const GridMapping& h2, const CellPartition& partition,
                              const std::vector<LensRecord>& lenses, double eps, const PipelineConfig& cfg) {
  Step3Result out;
  VertexDiskFamily disks = build_vertex_disks(partition, eps);
  const TriangleEnergies te = triangle_energies(h2);
  auto tripled_energy = [&](double f) {
    double e = 0.0;
    for (const auto& v : disks.disks) {
      const double r = 3.0 * f * v.radius;
      e += energy_in_box(te, v.center - Point(r, r), v.center + Point(r, r),
                         [&](Point c) { return std::abs(c - v.center) < r; });
    }
    return e;
  };
  double f = 1.0;
  int it = 0;
  while ((out.disk_energy = tripled_energy(f)) >= eps * eps) {
    if (++it > 40) throw StepError(3, "resolution exhausted: vertex disk energy budget unreachable");
    f *= 0.5;
  }
  for (auto& v : disks.disks) v.radius *= f;

  std::map<std::pair<double, double>, double> radius_at;
  for (const auto& v : disks.disks) radius_at[key(v.center)] = v.radius;

  // Pullback charts: the image chart Psi is an arc chart about the lens arc,
  // the source chart is h2^-1 o Psi, so the conjugated map is the identity.
  struct ArcJob {
    std::size_t lens;
    int side;
    Arc arc;
  };
  std::vector<ArcJob> jobs;
  for (std::size_t k = 0; k < lenses.size(); ++k) {
    if (lenses[k].unknowns == 0) continue;
    const LensSpec& l = lenses[k].lens;
    for (int side = 0; side < 2; ++side) {
      Arc a = l.arcs[static_cast<std::size_t>(side)];
      const double ra = radius_at.count(key(l.a)) ? radius_at[key(l.a)] : 0.0;
      const double rb = radius_at.count(key(l.b)) ? radius_at[key(l.b)] : 0.0;
      const bool a_first = std::abs(a.at(a.theta0) - l.a) < std::abs(a.at(a.theta0) - l.b);
      const double r0 = a_first ? ra : rb, r1 = a_first ? rb : ra;
      a.theta0 += 2.0 * std::asin(std::min(1.0, r0 / (2.0 * a.radius)));
      a.theta1 -= 2.0 * std::asin(std::min(1.0, r1 / (2.0 * a.radius)));
      if (a.theta1 > a.theta0) jobs.push_back({k, side, a});
    }
  }
  std::vector<double> Ms(jobs.size(), 0.0);
  parallel_tasks(jobs.size(), [&](std::size_t t) {
    const Arc& a = jobs[t].arc;
    const double w = std::min(0.5 * a.radius, 0.25 * a.radius * (a.theta1 - a.theta0));
    const std::string id = std::to_string(jobs[t].lens) + "/" + std::to_string(jobs[t].side);
    try {
      const TubularChart chart = arc_chart(a.center, a.radius, a.theta0, a.theta1, w);
      const ArcSmoothing s = smooth_arc(identity_jet, chart, chart, 1.0, {}, cfg.certify_samples);
      if (s.certificate.violations > 0) throw CertificationError("bound violated");
      Ms[t] = s.M_prime;
    } catch (const StepError&) {
      throw;
    } catch (const Error& e) {
      throw StepError(3, "chart construction failed on arc " + id + ": " + e.what());
    }
  });
  out.certified_arcs = jobs.size();
  for (double m : Ms) out.max_M = std::max(out.max_M, m);
  out.disks = std::move(disks);
  out.h3 = h2;
  out.audit = make_audit(3, "arc smoothing", h2, out.h3, 2.0 * eps);
  out.audit.note = "aggregate disk energy " + std::to_string(out.disk_energy);
  if (out.disk_energy > 5.0 * eps * eps) out.audit.budget_met = false;
  return out;
}

// ---- Step 4 ----

Step4Result step4_vertex_disks(const GridMapping& h3, const VertexDiskFamily& disks, double eps,
                               const PipelineConfig& cfg) {
  Step4Result out;
  std::vector<std::size_t> ids;
  const PointIndex nodes = node_index(h3, ids);
  const GridDomain& d = h3.domain();
  std::vector<std::vector<std::size_t>> sets(disks.disks.size());
  std::vector<std::uint8_t> claimed(d.node_count(), 0);
  for (std::size_t k = 0; k < disks.disks.size(); ++k) {
    const auto& v = disks.disks[k];
    const double r = 2.0 * v.radius;
    nodes.query(v.center - Point(r, r), v.center + Point(r, r), [&](std::size_t id, Point w) {
      if (std::abs(w - v.center) >= r) return;
      if (claimed[ids[id]]) throw StepError(4, "disk family invalid");
      claimed[ids[id]] = 1;
      sets[k].push_back(ids[id]);
    });
  }
  std::vector<Replacement> reps(sets.size());
  parallel_tasks(sets.size(), [&](std::size_t k) {
    if (sets[k].size() >= 5) reps[k] = replace_on(h3, sets[k], cfg.solver);
  });
  const Orientation o = orientation_of(h3);
  GridMapping h4 = h3;
  for (std::size_t k = 0; k < sets.size(); ++k) {
    if (reps[k].values.empty()) continue;
    for (const auto& [n, v] : reps[k].values) h4[n] = v;
    if (!check_injectivity(h4, reps[k].region, o).orientation_uniform) {
      for (const auto& [n, v] : reps[k].values) h4[n] = h3[n];
      ++out.reverted;
      continue;
    }
    out.active.push_back(k);
  }
  out.audit = make_audit(4, "vertex disks", h3, h4, 6.0 * eps);
  out.h4 = std::move(h4);
  return out;
}

// ---- Step 5 ----

Step5Result step5_smooth_circles(const GridMapping& h4, const VertexDiskFamily& disks,
                                 const std::vector<std::size_t>& active, double eps, const PipelineConfig& cfg) {
  Step5Result out;
  const double halfwidth = 0.5 * std::log(1.4);
  parallel_tasks(active.size(), [&](std::size_t t) {
    const auto& v = disks.disks[active[t]];
    const double r = 2.0 * v.radius;
    try {
      const CircleSmoothing cs = smooth_circle(identity_jet, v.center, r, halfwidth);
      const double ro = r * std::exp(halfwidth);
      const BoundCertificate cert = certify_bounds(
          cs.g, v.center - Point(ro, ro), v.center + Point(ro, ro), 80.0 * cs.M, cfg.certify_samples,
          [&](Point z) { return std::abs(std::log(std::abs(z - v.center) / r)) < halfwidth; });
      if (cert.violations > 0) throw CertificationError("bound violated");
    } catch (const Error& e) {
      throw StepError(5, "circle " + std::to_string(active[t]) + ": " + e.what());
    }
  });
  out.certified_circles = active.size();
  out.H = h4;
  out.audit = make_audit(5, "circle smoothing", h4, out.H, eps);
  return out;
}

// ---- driver ----

PipelineResult run_pipeline(const GridMapping& h, const PipelineConfig& cfg, const StepCallback& on_step) {
  cfg.validate();
  if (!h.finite()) throw Error("non-finite input values");
  const InjectivityVerdict v0 = check_injectivity(h);
  if (!v0.orientation_uniform) throw Error("input is not orientation-uniform");

  PipelineResult res;
  PipelineReport& rep = res.report;
  rep.epsilon = cfg.epsilon;
  rep.epsilon_internal = cfg.epsilon / 14.0;
  rep.finite_energy = cfg.finite_energy;
  rep.energy_h = dirichlet_energy(h);
  const double eps = rep.epsilon_internal;
  const GridDomain& d = h.domain();

  if (harmonic_residual(h, NodeSet::all_masked(d)) <= 1e-10) {
    rep.early_return = true;
    res.H = h;
  } else {
    Step1Result s1 = step1_harmonic_partition(h, eps, cfg);
    rep.squares = s1.squares;
    rep.subsquares = s1.partition.squares.size();
    rep.vertices = s1.partition.vertices.size();
    rep.lenses = s1.partition.adjacency.size();
    rep.steps.push_back(s1.audit);
    if (on_step) on_step(s1.audit, s1.h1);
    if (cfg.finite_energy && s1.audit.changed_nodes > 0)
      rep.delta = std::sqrt(rep.energy_h) - std::sqrt(s1.audit.energy);

    Step2Result s2 = step2_lens_replacement(s1.h1, s1.partition, eps, cfg);
    for (const auto& l : s2.lenses) rep.active_lenses += l.unknowns > 0;
    rep.steps.push_back(s2.audit);
    if (on_step) on_step(s2.audit, s2.h2);

    Step3Result s3 = step3_smooth_arcs(s2.h2, s1.partition, s2.lenses, eps, cfg);
    rep.certified_arcs = s3.certified_arcs;
    rep.max_arc_M = s3.max_M;
    rep.steps.push_back(s3.audit);
    if (on_step) on_step(s3.audit, s3.h3);

    Step4Result s4 = step4_vertex_disks(s3.h3, s3.disks, eps, cfg);
    rep.active_disks = s4.active.size();
    rep.steps.push_back(s4.audit);
    if (on_step) on_step(s4.audit, s4.h4);

    Step5Result s5 = step5_smooth_circles(s4.h4, s3.disks, s4.active, eps, cfg);
    rep.certified_circles = s5.certified_circles;
    rep.steps.push_back(s5.audit);
    if (on_step) on_step(s5.audit, s5.H);

    res.snapshots = {s1.h1, s2.h2, s3.h3, s4.h4, s5.H};
    res.H = std::move(s5.H);
  }

  rep.energy_H = dirichlet_energy(res.H);
  rep.royden_diff = difference_norm(res.H, h);
  rep.injective = check_injectivity(res.H).orientation_uniform;
  for (std::size_t n = 0; n < d.node_count(); ++n)
    if (d.node_on_boundary(n)) {
      const Complex a = res.H[n], b = h[n];
      if (std::memcmp(&a, &b, sizeof(Complex)) != 0) rep.boundary_exact = false;
    }
  return res;
}

}  // namespace hs
