#include "hs/harmonic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hs/error.hpp"

namespace hs {

namespace {

constexpr int kDi[4] = {1, -1, 0, 0};
constexpr int kDj[4] = {0, 0, 1, -1};

double dot(const std::vector<Complex>& a, const std::vector<Complex>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k].real() * b[k].real() + a[k].imag() * b[k].imag();
  return s;
}

}  // namespace

RegionSplit split_region(const GridDomain& d, const NodeSet& region) {
  RegionSplit s;
  for (std::size_t n = 0; n < d.node_count(); ++n) {
    if (!region.contains(n) || !d.node_masked(n)) continue;
    bool free = !d.node_on_boundary(n);
    const int i = d.col(n), j = d.row(n);
    for (int k = 0; k < 4 && free; ++k) {
      const int a = i + kDi[k], b = j + kDj[k];
      free = d.node_masked(a, b) && region.contains(d.index(a, b));
    }
    (free ? s.interior : s.boundary).push_back(n);
  }
  return s;
}

HarmonicSolve poisson_extend(const GridMapping& h, const NodeSet& region, const SolverOptions& opts) {
  const auto& d = h.domain();
  HarmonicSolve out;
  out.split = split_region(d, region);
  const auto& unknowns = out.split.interior;
  if (unknowns.empty()) throw Error("degenerate region");
  for (auto n : out.split.boundary)
    if (!(std::isfinite(h[n].real()) && std::isfinite(h[n].imag()))) throw Error("non-finite boundary value");

  const std::size_t m = unknowns.size();
  std::vector<int> local(d.node_count(), -1);
  for (std::size_t k = 0; k < m; ++k) local[unknowns[k]] = static_cast<int>(k);

  // 4 u_p - sum_{free q} u_q = sum_{fixed q} h_q
  std::vector<Complex> b(m), x(m);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t n = unknowns[k];
    x[k] = h[n];
    const int i = d.col(n), j = d.row(n);
    for (int e = 0; e < 4; ++e) {
      const std::size_t q = d.index(i + kDi[e], j + kDj[e]);
      if (local[q] < 0) b[k] += h[q];
    }
  }
  auto apply = [&](const std::vector<Complex>& v, std::vector<Complex>& av) {
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t n = unknowns[k];
      const int i = d.col(n), j = d.row(n);
      Complex s = 4.0 * v[k];
      for (int e = 0; e < 4; ++e) {
        const int q = local[d.index(i + kDi[e], j + kDj[e])];
        if (q >= 0) s -= v[static_cast<std::size_t>(q)];
      }
      av[k] = s;
    }
  };

  out.energy_before = star_energy(h, unknowns);

  // Jacobi-preconditioned CG; the diagonal is the constant 4.
  std::vector<Complex> r(m), z(m), p(m), ap(m);
  apply(x, ap);
  for (std::size_t k = 0; k < m; ++k) r[k] = b[k] - ap[k];
  const double bnorm = std::sqrt(dot(b, b));
  const double target = opts.relative_tolerance * (bnorm > 0.0 ? bnorm : 1.0);
  double rnorm = std::sqrt(dot(r, r));
  const int cap = opts.max_iterations_factor * static_cast<int>(m);
  int it = 0;
  if (rnorm > target) {
    for (std::size_t k = 0; k < m; ++k) z[k] = 0.25 * r[k];
    p = z;
    double rz = dot(r, z);
    while (rnorm > target) {
      if (it >= cap) throw Error("solver failure");
      apply(p, ap);
      const double alpha = rz / dot(p, ap);
      for (std::size_t k = 0; k < m; ++k) {
        x[k] += alpha * p[k];
        r[k] -= alpha * ap[k];
      }
      for (std::size_t k = 0; k < m; ++k) z[k] = 0.25 * r[k];
      const double rz_next = dot(r, z);
      const double beta = rz_next / rz;
      rz = rz_next;
      for (std::size_t k = 0; k < m; ++k) p[k] = z[k] + beta * p[k];
      rnorm = std::sqrt(dot(r, r));
      ++it;
    }
  }
  out.iterations = it;
  out.residual = bnorm > 0.0 ? rnorm / bnorm : rnorm;

  out.values.assign(h.values().begin(), h.values().end());
  if (it > 0)
    for (std::size_t k = 0; k < m; ++k) out.values[unknowns[k]] = x[k];
  GridMapping after(d, out.values);
  out.energy_after = star_energy(after, unknowns);
  return out;
}

GridMapping harmonic_replace(const GridMapping& h, const NodeSet& region, const SolverOptions& opts) {
  HarmonicSolve s = poisson_extend(h, region, opts);
  return GridMapping(h.domain(), std::move(s.values));
}

double harmonic_residual(const GridMapping& h, const NodeSet& region) {
  const auto& d = h.domain();
  const RegionSplit s = split_region(d, region);
  double worst = 0.0, scale = 0.0;
  for (auto n : s.interior) {
    const int i = d.col(n), j = d.row(n);
    Complex lap = -4.0 * h[n];
    for (int e = 0; e < 4; ++e) {
      const Complex q = h[d.index(i + kDi[e], j + kDj[e])];
      lap += q;
      scale = std::max(scale, std::abs(q - h[n]));
    }
    worst = std::max(worst, std::abs(lap));
  }
  return scale > 0.0 ? worst / scale : worst;
}

bool is_convex(const Polygon& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  int sign = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const Point a = poly[k], b = poly[(k + 1) % n], c = poly[(k + 2) % n];
    const Point u = b - a, v = c - b;
    const double cross = u.real() * v.imag() - u.imag() * v.real();
    if (cross == 0.0) continue;
    const int s = cross > 0.0 ? 1 : -1;
    if (sign == 0) sign = s;
    if (s != sign) return false;
  }
  return sign != 0;
}

namespace {

double distance_to_polygon_boundary(const Polygon& poly, Point p) {
  double best = INFINITY;
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const Point a = poly[k], b = poly[(k + 1) % poly.size()];
    const Point ab = b - a;
    double t = ((p - a) * std::conj(ab)).real() / std::norm(ab);
    t = std::clamp(t, 0.0, 1.0);
    best = std::min(best, std::abs(p - (a + t * ab)));
  }
  return best;
}

double polygon_diameter(const Polygon& poly) {
  double d = 0.0;
  for (auto a : poly)
    for (auto b : poly) d = std::max(d, std::abs(a - b));
  return d;
}

}  // namespace

RkcVerdict rkc_certify(const GridMapping& h, const NodeSet& region, const Polygon& target, const SolverOptions& opts) {
  if (!is_convex(target)) throw Error("RKC hypothesis violated");
  const auto& d = h.domain();
  const RegionSplit split = split_region(d, region);
  if (split.boundary.size() < 3) throw Error("boundary not homeomorphic");

  Point src_center{}, dst_center{};
  for (auto n : split.boundary) src_center += d.node(n);
  src_center /= static_cast<double>(split.boundary.size());
  for (auto v : target) dst_center += v;
  dst_center /= static_cast<double>(target.size());

  std::vector<std::size_t> cycle = split.boundary;
  std::sort(cycle.begin(), cycle.end(), [&](std::size_t a, std::size_t b) {
    return std::arg(d.node(a) - src_center) < std::arg(d.node(b) - src_center);
  });
  const double tol = 1e-9 * polygon_diameter(target);
  double winding = 0.0;
  for (std::size_t k = 0; k < cycle.size(); ++k) {
    const Complex w0 = h[cycle[k]], w1 = h[cycle[(k + 1) % cycle.size()]];
    if (distance_to_polygon_boundary(target, w0) > tol) throw Error("boundary not homeomorphic");
    const double step = std::arg((w1 - dst_center) / (w0 - dst_center));
    if (step < 0.0) throw Error("boundary not homeomorphic");
    winding += step;
  }
  if (std::abs(winding - 2.0 * std::numbers::pi) > 1e-6) throw Error("boundary not homeomorphic");

  RkcVerdict v;
  v.replaced = harmonic_replace(h, region, opts);
  std::vector<std::size_t> nodes = split.interior;
  nodes.insert(nodes.end(), split.boundary.begin(), split.boundary.end());
  const InjectivityVerdict inj = check_injectivity(v.replaced, nodes, Orientation::Positive);
  v.orientation_uniform = inj.orientation_uniform;
  v.violating = inj.violating.size();
  // Jacobian of a P1 triangle = image area / source area.
  const double tri_area = 0.5 * d.spacing() * d.spacing();
  v.min_jacobian = INFINITY;
  for_each_triangle(d, [&](const Triangle& t) {
    if (!region.contains(t.nodes[0]) || !region.contains(t.nodes[1]) || !region.contains(t.nodes[2])) return;
    v.min_jacobian = std::min(v.min_jacobian, image_signed_area(v.replaced.values(), t) / tri_area);
  });
  return v;
}

}  // namespace hs
