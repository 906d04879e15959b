#include "hs/field.hpp"

#include <algorithm>
#include <cmath>

#include "hs/error.hpp"

namespace hs {

namespace {

double triangle_energy(const GridDomain& d, std::span<const Complex> v, const Triangle& t) {
  const auto g = triangle_gradient(d, v, t);
  return 0.5 * d.spacing() * d.spacing() * (std::norm(g[0]) + std::norm(g[1]));
}

// Derivative of `v` along one axis at node (i, j); `step` is (di, dj).
bool axis_derivative(const GridDomain& d, std::span<const Complex> v, const std::vector<std::uint8_t>& avail,
                     int i, int j, int di, int dj, Complex& out) {
  auto ok = [&](int a, int b) {
    if (a < 0 || b < 0 || a >= d.nx() || b >= d.ny()) return false;
    return avail[d.index(a, b)] != 0;
  };
  const double s = d.spacing();
  const bool fwd = ok(i + di, j + dj), bwd = ok(i - di, j - dj);
  if (fwd && bwd) {
    out = (v[d.index(i + di, j + dj)] - v[d.index(i - di, j - dj)]) / (2.0 * s);
    return true;
  }
  if (fwd && ok(i + 2 * di, j + 2 * dj)) {
    out = (-3.0 * v[d.index(i, j)] + 4.0 * v[d.index(i + di, j + dj)] - v[d.index(i + 2 * di, j + 2 * dj)]) /
          (2.0 * s);
    return true;
  }
  if (bwd && ok(i - 2 * di, j - 2 * dj)) {
    out = (3.0 * v[d.index(i, j)] - 4.0 * v[d.index(i - di, j - dj)] + v[d.index(i - 2 * di, j - 2 * dj)]) /
          (2.0 * s);
    return true;
  }
  return false;
}

}  // namespace

Partials partial_derivatives(const GridDomain& d, std::span<const Complex> v,
                             const std::vector<std::uint8_t>* available) {
  std::vector<std::uint8_t> avail;
  if (available) {
    avail = *available;
  } else {
    avail.resize(d.node_count());
    for (std::size_t n = 0; n < d.node_count(); ++n) avail[n] = d.node_masked(n);
  }
  Partials p;
  p.dx.assign(d.node_count(), Complex{});
  p.dy.assign(d.node_count(), Complex{});
  p.valid.assign(d.node_count(), 0);
  for (int j = 0; j < d.ny(); ++j)
    for (int i = 0; i < d.nx(); ++i) {
      const std::size_t n = d.index(i, j);
      if (!avail[n]) continue;
      Complex gx, gy;
      if (axis_derivative(d, v, avail, i, j, 1, 0, gx) && axis_derivative(d, v, avail, i, j, 0, 1, gy)) {
        p.dx[n] = gx;
        p.dy[n] = gy;
        p.valid[n] = 1;
      }
    }
  return p;
}

WirtingerField wirtinger(const GridMapping& h) {
  const auto& d = h.domain();
  const Partials p = partial_derivatives(d, h.values());
  WirtingerField w;
  w.hz.assign(d.node_count(), Complex{});
  w.hzb.assign(d.node_count(), Complex{});
  w.jacobian.assign(d.node_count(), 0.0);
  w.valid = p.valid;
  const Complex I(0.0, 1.0);
  for (std::size_t n = 0; n < d.node_count(); ++n) {
    if (!d.node_masked(n)) continue;
    if (!p.valid[n]) {
      w.excluded.push_back(n);
      continue;
    }
    w.hz[n] = 0.5 * (p.dx[n] - I * p.dy[n]);
    w.hzb[n] = 0.5 * (p.dx[n] + I * p.dy[n]);
    w.jacobian[n] = std::norm(w.hz[n]) - std::norm(w.hzb[n]);
  }
  return w;
}

RegionEnergy dirichlet_energy(const GridMapping& h, const NodeSet& region) {
  RegionEnergy e;
  bool any = false;
  for_each_triangle(h.domain(), [&](const Triangle& t) {
    if (!region.contains(t.nodes[0]) || !region.contains(t.nodes[1]) || !region.contains(t.nodes[2])) return;
    any = true;
    e.value += triangle_energy(h.domain(), h.values(), t);
  });
  e.empty_region = !any;
  return e;
}

double dirichlet_energy(const GridMapping& h) {
  double e = 0.0;
  for_each_triangle(h.domain(), [&](const Triangle& t) { e += triangle_energy(h.domain(), h.values(), t); });
  return e;
}

double dirichlet_energy_cells(const GridMapping& h, const std::vector<int>& labels, int label) {
  const auto& d = h.domain();
  if (labels.size() != d.cell_count()) throw Error("cell labelling size mismatch");
  double e = 0.0;
  for (int j = 0; j < d.cells_y(); ++j)
    for (int i = 0; i < d.cells_x(); ++i) {
      if (!d.cell(i, j) || labels[static_cast<std::size_t>(j) * d.cells_x() + i] != label) continue;
      for (const auto& t : cell_triangles(d, i, j)) e += triangle_energy(d, h.values(), t);
    }
  return e;
}

namespace {

// Masked cells with a corner in `nodes`, deduplicated.
std::vector<std::pair<int, int>> star_cells(const GridDomain& d, const std::vector<std::size_t>& nodes) {
  std::vector<std::uint8_t> mark(d.cell_count(), 0);
  std::vector<std::pair<int, int>> cells;
  for (std::size_t n : nodes) {
    const int i = d.col(n), j = d.row(n);
    for (int b = j - 1; b <= j; ++b)
      for (int a = i - 1; a <= i; ++a) {
        if (!d.cell(a, b)) continue;
        const std::size_t c = static_cast<std::size_t>(b) * d.cells_x() + a;
        if (!mark[c]) {
          mark[c] = 1;
          cells.emplace_back(a, b);
        }
      }
  }
  return cells;
}

}  // namespace

double star_energy(const GridMapping& h, const std::vector<std::size_t>& nodes) {
  const auto& d = h.domain();
  std::vector<std::uint8_t> in(d.node_count(), 0);
  for (auto n : nodes) in[n] = 1;
  double e = 0.0;
  for (auto [i, j] : star_cells(d, nodes))
    for (const auto& t : cell_triangles(d, i, j))
      if (in[t.nodes[0]] || in[t.nodes[1]] || in[t.nodes[2]]) e += triangle_energy(d, h.values(), t);
  return e;
}

EnergyReport royden_norm(const GridMapping& h) {
  EnergyReport r;
  r.total = dirichlet_energy(h);
  for (std::size_t n = 0; n < h.domain().node_count(); ++n)
    if (h.domain().node_masked(n)) r.sup_norm = std::max(r.sup_norm, std::abs(h[n]));
  r.grad_l2 = std::sqrt(r.total);
  r.royden = r.sup_norm + r.grad_l2;
  return r;
}

EnergyReport royden_norm(const GridMapping& h, const std::vector<int>& labels) {
  EnergyReport r = royden_norm(h);
  const auto& d = h.domain();
  if (labels.size() != d.cell_count()) throw Error("cell labelling size mismatch");
  for (int j = 0; j < d.cells_y(); ++j)
    for (int i = 0; i < d.cells_x(); ++i) {
      const int label = labels[static_cast<std::size_t>(j) * d.cells_x() + i];
      if (!d.cell(i, j) || label < 0) continue;
      double& slot = r.per_region[label];
      for (const auto& t : cell_triangles(d, i, j)) slot += triangle_energy(d, h.values(), t);
    }
  return r;
}

namespace {

InjectivityVerdict classify(const std::vector<std::pair<Triangle, double>>& areas,
                            std::optional<Orientation> expected) {
  InjectivityVerdict v;
  v.min_abs_area = areas.empty() ? 0.0 : INFINITY;
  for (const auto& [t, a] : areas) {
    if (a > 0.0)
      ++v.positive;
    else if (a < 0.0)
      ++v.negative;
    else
      ++v.degenerate;
    v.min_abs_area = std::min(v.min_abs_area, std::abs(a));
  }
  Orientation majority = v.positive >= v.negative ? Orientation::Positive : Orientation::Negative;
  if (expected) majority = *expected;
  for (const auto& [t, a] : areas) {
    const bool bad = a == 0.0 || (majority == Orientation::Positive ? a < 0.0 : a > 0.0);
    if (bad) v.violating.push_back(t);
  }
  v.orientation_uniform = v.violating.empty();
  v.orientation = v.orientation_uniform ? majority : Orientation::Mixed;
  return v;
}

}  // namespace

InjectivityVerdict check_injectivity(const GridMapping& h) {
  std::vector<std::pair<Triangle, double>> areas;
  for_each_triangle(h.domain(), [&](const Triangle& t) { areas.emplace_back(t, image_signed_area(h.values(), t)); });
  return classify(areas, std::nullopt);
}

InjectivityVerdict check_injectivity(const GridMapping& h, const std::vector<std::size_t>& nodes,
                                     std::optional<Orientation> expected) {
  const auto& d = h.domain();
  std::vector<std::uint8_t> in(d.node_count(), 0);
  for (auto n : nodes) in[n] = 1;
  std::vector<std::pair<Triangle, double>> areas;
  for (auto [i, j] : star_cells(d, nodes))
    for (const auto& t : cell_triangles(d, i, j))
      if (in[t.nodes[0]] || in[t.nodes[1]] || in[t.nodes[2]])
        areas.emplace_back(t, image_signed_area(h.values(), t));
  return classify(areas, expected);
}

double sup_distance(const GridMapping& h1, const GridMapping& h2) {
  if (!h1.domain().same_grid(h2.domain())) throw Error("domain mismatch");
  double s = 0.0;
  for (std::size_t n = 0; n < h1.domain().node_count(); ++n)
    if (h1.domain().node_masked(n)) s = std::max(s, std::abs(h1[n] - h2[n]));
  return s;
}

DifferenceNorm difference_norm(const GridMapping& h1, const GridMapping& h2) {
  const GridMapping diff = h1 - h2;
  DifferenceNorm r;
  r.sup = sup_distance(h1, h2);
  r.grad_l2 = std::sqrt(dirichlet_energy(diff));
  return r;
}

}  // namespace hs
