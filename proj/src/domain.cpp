#include "hs/domain.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <queue>
#include <set>

#include "hs/error.hpp"

namespace hs {

DyadicLattice DyadicLattice::with_default_offset(double base_scale) {
  return {base_scale, Point(std::sqrt(2.0) / 4.0, std::sqrt(3.0) / 4.0) * base_scale};
}

double DyadicSquare::side(const DyadicLattice& lat) const { return std::ldexp(lat.base_scale, -level); }
double DyadicSquare::diam(const DyadicLattice& lat) const { return std::sqrt(2.0) * side(lat); }
Point DyadicSquare::lower_left(const DyadicLattice& lat) const {
  const double s = side(lat);
  return lat.offset + Point(s * static_cast<double>(i), s * static_cast<double>(j));
}
Point DyadicSquare::center(const DyadicLattice& lat) const {
  const double s = side(lat);
  return lower_left(lat) + Point(0.5 * s, 0.5 * s);
}
bool DyadicSquare::contains(const DyadicLattice& lat, Point p) const {
  const Point ll = lower_left(lat);
  const double s = side(lat);
  return p.real() >= ll.real() && p.real() <= ll.real() + s && p.imag() >= ll.imag() && p.imag() <= ll.imag() + s;
}
DyadicSquare DyadicSquare::parent() const {
  auto half = [](std::int64_t v) { return v >= 0 ? v / 2 : -((-v + 1) / 2); };
  return {level - 1, half(i), half(j)};
}

namespace {

// Grid coordinate of x, snapped to an integer when within roundoff.
double grid_coord(double x) {
  const double r = std::round(x);
  return std::abs(x - r) < 1e-9 ? r : x;
}

struct CellRange {
  int i0, i1, j0, j1;  // inclusive; empty when i0 > i1
  bool inside_grid;
};

// Cells meeting the open square (lo, lo + side)^2.
CellRange open_cell_range(const GridDomain& d, Point lo, double side) {
  const double s = d.spacing();
  const double xa = grid_coord((lo.real() - d.origin().real()) / s);
  const double xb = grid_coord((lo.real() + side - d.origin().real()) / s);
  const double ya = grid_coord((lo.imag() - d.origin().imag()) / s);
  const double yb = grid_coord((lo.imag() + side - d.origin().imag()) / s);
  CellRange r{static_cast<int>(std::floor(xa)), static_cast<int>(std::ceil(xb)) - 1,
              static_cast<int>(std::floor(ya)), static_cast<int>(std::ceil(yb)) - 1, true};
  r.inside_grid = r.i0 >= 0 && r.j0 >= 0 && r.i1 < d.cells_x() && r.j1 < d.cells_y();
  return r;
}

class CellPrefix {
 public:
  explicit CellPrefix(const GridDomain& d) : cx_(d.cells_x()), cy_(d.cells_y()) {
    sum_.assign(static_cast<std::size_t>(cx_ + 1) * (cy_ + 1), 0);
    for (int j = 0; j < cy_; ++j)
      for (int i = 0; i < cx_; ++i)
        at(i + 1, j + 1) = at(i, j + 1) + at(i + 1, j) - at(i, j) + (d.cell(i, j) ? 1 : 0);
  }
  // masked cells in the clipped inclusive range
  std::int64_t count(int i0, int i1, int j0, int j1) const {
    i0 = std::max(i0, 0);
    j0 = std::max(j0, 0);
    i1 = std::min(i1, cx_ - 1);
    j1 = std::min(j1, cy_ - 1);
    if (i0 > i1 || j0 > j1) return 0;
    return get(i1 + 1, j1 + 1) - get(i0, j1 + 1) - get(i1 + 1, j0) + get(i0, j0);
  }

 private:
  std::int64_t& at(int i, int j) { return sum_[static_cast<std::size_t>(j) * (cx_ + 1) + i]; }
  std::int64_t get(int i, int j) const { return sum_[static_cast<std::size_t>(j) * (cx_ + 1) + i]; }
  int cx_, cy_;
  std::vector<std::int64_t> sum_;
};

bool contained(const GridDomain& d, const CellPrefix& pre, const DyadicLattice& lat, const DyadicSquare& q) {
  const CellRange r = open_cell_range(d, q.lower_left(lat), q.side(lat));
  if (!r.inside_grid || r.i0 > r.i1 || r.j0 > r.j1) return false;
  const std::int64_t need = static_cast<std::int64_t>(r.i1 - r.i0 + 1) * (r.j1 - r.j0 + 1);
  return pre.count(r.i0, r.i1, r.j0, r.j1) == need;
}

}  // namespace

bool square_in_domain(const GridDomain& target, const DyadicLattice& lat, const DyadicSquare& q) {
  const CellPrefix pre(target);
  return contained(target, pre, lat, q);
}

int default_max_level(const GridDomain& target, double base_scale) {
  const double r = base_scale / (4.0 * target.spacing());
  return r < 1.0 ? 0 : static_cast<int>(std::floor(std::log2(r) + 1e-12));
}

Decomposition decompose_dyadic(const GridDomain& target, int max_level, const DyadicLattice& lat) {
  if (target.masked_cell_count() == 0) throw Error("empty domain");
  const CellPrefix pre(target);
  const double s = target.spacing();

  int ci0 = target.cells_x(), ci1 = -1, cj0 = target.cells_y(), cj1 = -1;
  for (int j = 0; j < target.cells_y(); ++j)
    for (int i = 0; i < target.cells_x(); ++i)
      if (target.cell(i, j)) {
        ci0 = std::min(ci0, i);
        ci1 = std::max(ci1, i);
        cj0 = std::min(cj0, j);
        cj1 = std::max(cj1, j);
      }
  const Point lo = target.origin() + Point(ci0 * s, cj0 * s) - lat.offset;
  const Point hi = target.origin() + Point((ci1 + 1) * s, (cj1 + 1) * s) - lat.offset;
  const double b = lat.base_scale;

  Decomposition out;
  std::function<void(const DyadicSquare&)> visit = [&](const DyadicSquare& q) {
    if (contained(target, pre, lat, q)) {
      out.squares.push_back(q);
      return;
    }
    if (q.level >= max_level) return;
    const CellRange r = open_cell_range(target, q.lower_left(lat), q.side(lat));
    if (pre.count(r.i0, r.i1, r.j0, r.j1) == 0) return;
    for (const auto& c : refine_square(q, 1)) visit(c);
  };
  const auto i0 = static_cast<std::int64_t>(std::floor(grid_coord(lo.real() / b)));
  const auto i1 = static_cast<std::int64_t>(std::ceil(grid_coord(hi.real() / b))) - 1;
  const auto j0 = static_cast<std::int64_t>(std::floor(grid_coord(lo.imag() / b)));
  const auto j1 = static_cast<std::int64_t>(std::ceil(grid_coord(hi.imag() / b))) - 1;
  for (auto j = j0; j <= j1; ++j)
    for (auto i = i0; i <= i1; ++i) visit({0, i, j});

  // coverage by area accumulation
  std::vector<double> cover(target.cell_count(), 0.0);
  for (const auto& q : out.squares) {
    const Point ll = q.lower_left(lat);
    const double side = q.side(lat);
    const CellRange r = open_cell_range(target, ll, side);
    for (int j = std::max(r.j0, 0); j <= std::min(r.j1, target.cells_y() - 1); ++j)
      for (int i = std::max(r.i0, 0); i <= std::min(r.i1, target.cells_x() - 1); ++i) {
        const double cx0 = target.origin().real() + i * s, cy0 = target.origin().imag() + j * s;
        const double wx = std::min(cx0 + s, ll.real() + side) - std::max(cx0, ll.real());
        const double wy = std::min(cy0 + s, ll.imag() + side) - std::max(cy0, ll.imag());
        if (wx > 0 && wy > 0) cover[static_cast<std::size_t>(j) * target.cells_x() + i] += wx * wy;
      }
  }
  for (int j = 0; j < target.cells_y(); ++j)
    for (int i = 0; i < target.cells_x(); ++i)
      if (target.cell(i, j) && cover[static_cast<std::size_t>(j) * target.cells_x() + i] < s * s * (1 - 1e-9))
        out.uncovered_cells.emplace_back(i, j);
  return out;
}

std::vector<DyadicSquare> refine_square(const DyadicSquare& q, int k) {
  const std::int64_t n = std::int64_t{1} << k;
  std::vector<DyadicSquare> out;
  out.reserve(static_cast<std::size_t>(n * n));
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t a = 0; a < n; ++a) out.push_back({q.level + k, q.i * n + a, q.j * n + b});
  return out;
}

namespace {

bool connected_nodes(const GridDomain& d, const NodeSet& set) {
  const auto members = set.members();
  if (members.empty()) return true;
  std::vector<std::uint8_t> seen(d.node_count(), 0);
  std::queue<std::size_t> q;
  q.push(members.front());
  seen[members.front()] = 1;
  std::size_t reached = 1;
  const int di[6] = {1, -1, 0, 0, 1, -1}, dj[6] = {0, 0, 1, -1, 1, -1};
  while (!q.empty()) {
    const std::size_t n = q.front();
    q.pop();
    const int i = d.col(n), j = d.row(n);
    for (int e = 0; e < 6; ++e) {
      const int a = i + di[e], b = j + dj[e];
      if (a < 0 || b < 0 || a >= d.nx() || b >= d.ny()) continue;
      const std::size_t m = d.index(a, b);
      if (set.contains(m) && !seen[m]) {
        seen[m] = 1;
        ++reached;
        q.push(m);
      }
    }
  }
  return reached == members.size();
}

std::uint64_t key(std::int64_t i, std::int64_t j) {
  return (static_cast<std::uint64_t>(i + (std::int64_t{1} << 31)) << 32) |
         static_cast<std::uint64_t>(j + (std::int64_t{1} << 31));
}

}  // namespace

PreimageRegion preimage_region(const GridMapping& h, const DyadicSquare& q, const DyadicLattice& lat) {
  const GridDomain& d = h.domain();
  PreimageRegion r;
  r.nodes = NodeSet(d.node_count());
  for (std::size_t n = 0; n < d.node_count(); ++n)
    if (d.node_masked(n) && q.contains(lat, h[n])) r.nodes.insert(n);
  if (!connected_nodes(d, r.nodes)) throw Error("non-Jordan preimage");
  for (auto n : r.nodes.members()) {
    const int i = d.col(n), j = d.row(n);
    bool inner = true;
    const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
    for (int e = 0; e < 4 && inner; ++e) {
      const int a = i + di[e], b = j + dj[e];
      inner = a >= 0 && b >= 0 && a < d.nx() && b < d.ny() && r.nodes.contains(d.index(a, b));
    }
    (inner ? r.interior : r.boundary).push_back(n);
  }
  return r;
}

SquareIndex::SquareIndex(const std::vector<DyadicSquare>& squares, const DyadicLattice& lat)
    : lat_(lat), squares_(squares) {
  std::map<int, std::vector<std::pair<std::uint64_t, int>>> by_level;
  for (std::size_t k = 0; k < squares.size(); ++k)
    by_level[squares[k].level].emplace_back(key(squares[k].i, squares[k].j), static_cast<int>(k));
  for (auto& [level, v] : by_level) {
    std::sort(v.begin(), v.end());
    levels_.push_back(level);
    table_.push_back(std::move(v));
  }
}

std::vector<int> SquareIndex::containing(Point p) const {
  std::vector<int> out;
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    const double side = std::ldexp(lat_.base_scale, -levels_[l]);
    const auto fi = static_cast<std::int64_t>(std::floor((p.real() - lat_.offset.real()) / side));
    const auto fj = static_cast<std::int64_t>(std::floor((p.imag() - lat_.offset.imag()) / side));
    for (std::int64_t b = fj - 1; b <= fj + 1; ++b)
      for (std::int64_t a = fi - 1; a <= fi + 1; ++a) {
        const auto& v = table_[l];
        auto it = std::lower_bound(v.begin(), v.end(), std::make_pair(key(a, b), -1));
        if (it != v.end() && it->first == key(a, b) && squares_[static_cast<std::size_t>(it->second)].contains(lat_, p))
          out.push_back(it->second);
      }
  }
  std::sort(out.begin(), out.end(), [&](int x, int y) { return squares_[x] < squares_[y]; });
  return out;
}

std::vector<SharedEdge> square_adjacency(const std::vector<DyadicSquare>& squares, const DyadicLattice& lat) {
  std::vector<SharedEdge> out;
  if (squares.empty()) return out;
  int fine = 0;
  for (const auto& q : squares) fine = std::max(fine, q.level);
  struct Box {
    std::int64_t x0, x1, y0, y1;
  };
  std::vector<Box> box;
  for (const auto& q : squares) {
    const std::int64_t m = std::int64_t{1} << (fine - q.level);
    box.push_back({q.i * m, (q.i + 1) * m, q.j * m, (q.j + 1) * m});
  }
  const double unit = std::ldexp(lat.base_scale, -fine);
  auto world = [&](std::int64_t x, std::int64_t y) {
    return lat.offset + Point(unit * static_cast<double>(x), unit * static_cast<double>(y));
  };
  for (int vertical = 1; vertical >= 0; --vertical) {
    std::map<std::int64_t, std::vector<int>> low, high;  // left/bottom and right/top sides
    for (std::size_t k = 0; k < box.size(); ++k) {
      const Box& b = box[k];
      low[vertical ? b.x0 : b.y0].push_back(static_cast<int>(k));
      high[vertical ? b.x1 : b.y1].push_back(static_cast<int>(k));
    }
    for (const auto& [c, hs] : high) {
      auto it = low.find(c);
      if (it == low.end()) continue;
      for (int p : hs)
        for (int q : it->second) {
          const Box &bp = box[p], &bq = box[q];
          const std::int64_t lo = vertical ? std::max(bp.y0, bq.y0) : std::max(bp.x0, bq.x0);
          const std::int64_t hi = vertical ? std::min(bp.y1, bq.y1) : std::min(bp.x1, bq.x1);
          if (hi <= lo) continue;
          SharedEdge e;
          e.a = std::min(p, q);
          e.b = std::max(p, q);
          e.vertical = vertical;
          e.p0 = vertical ? world(c, lo) : world(lo, c);
          e.p1 = vertical ? world(c, hi) : world(hi, c);
          out.push_back(e);
        }
    }
  }
  std::sort(out.begin(), out.end(), [](const SharedEdge& x, const SharedEdge& y) {
    return std::tie(x.a, x.b, x.vertical) < std::tie(y.a, y.b, y.vertical);
  });
  return out;
}

std::vector<NodeSet> preimage_sets(const GridMapping& h, const std::vector<DyadicSquare>& squares,
                                   const DyadicLattice& lat) {
  const GridDomain& d = h.domain();
  std::vector<NodeSet> out(squares.size(), NodeSet(d.node_count()));
  const SquareIndex index(squares, lat);
  for (std::size_t n = 0; n < d.node_count(); ++n) {
    if (!d.node_masked(n)) continue;
    for (int id : index.containing(h[n])) out[static_cast<std::size_t>(id)].insert(n);
  }
  return out;
}

CellPartition build_partition(const GridMapping& h, std::vector<DyadicSquare> squares, const DyadicLattice& lat) {
  CellPartition p;
  p.lattice = lat;
  p.squares = std::move(squares);
  const GridDomain& d = h.domain();
  p.labels.assign(d.node_count(), -1);
  const SquareIndex index(p.squares, lat);
  for (std::size_t n = 0; n < d.node_count(); ++n) {
    if (!d.node_masked(n)) continue;
    const auto ids = index.containing(h[n]);
    if (!ids.empty()) p.labels[n] = ids.front();
  }
  p.adjacency = square_adjacency(p.squares, lat);
  std::set<std::pair<double, double>> seen;
  for (const auto& e : p.adjacency)
    for (Point v : {e.p0, e.p1})
      if (seen.emplace(v.real(), v.imag()).second) p.vertices.push_back(v);
  return p;
}

// ---- lenses ----

Arc arc_through(Point a, Point b, double sagitta) {
  const double c = 0.5 * std::abs(b - a);
  const Point u = (b - a) / (2.0 * c);
  const Point n = Point(0.0, 1.0) * u;
  const Point m = 0.5 * (a + b);
  const double h = std::abs(sagitta);
  const double rho = (c * c + h * h) / (2.0 * h);
  const double psi = std::atan2(c, rho - h);  // half the central angle
  Arc arc;
  arc.radius = rho;
  if (sagitta > 0) {
    arc.center = m + n * (h - rho);
    arc.theta0 = std::arg(b - arc.center);
  } else {
    arc.center = m - n * (h - rho);
    arc.theta0 = std::arg(a - arc.center);
  }
  arc.theta1 = arc.theta0 + 2.0 * psi;
  return arc;
}

namespace {

double segment_area(double chord_half, double sagitta) {
  const double rho = (chord_half * chord_half + sagitta * sagitta) / (2.0 * sagitta);
  const double psi = std::atan2(chord_half, rho - sagitta);
  return rho * rho * (psi - std::sin(psi) * std::cos(psi));
}

}  // namespace

LensSpec build_lens(Point a, Point b, LensKind kind, double R, double thickness) {
  const double L = std::abs(b - a);
  if (!(R > L)) throw Error("radius too small");
  if (kind == LensKind::ConcavoConvex && !(thickness > 0.0 && thickness < 1.0))
    throw Error("lens thickness must lie in (0, 1)");
  LensSpec lens;
  lens.a = a;
  lens.b = b;
  lens.R = R;
  lens.kind = kind;
  lens.thickness = kind == LensKind::ConcavoConvex ? thickness : 0.0;
  const double h0 = R - std::sqrt(R * R - 0.25 * L * L);
  if (kind == LensKind::DoublyConvex)
    lens.arcs = {arc_through(a, b, h0), arc_through(a, b, -h0)};
  else
    lens.arcs = {arc_through(a, b, h0 * (1 - thickness)), arc_through(a, b, h0 * (1 + thickness))};
  return lens;
}

LensSpec build_lens(const SharedEdge& edge, LensKind kind, double R, double thickness) {
  return build_lens(edge.p0, edge.p1, kind, R, thickness);
}

double LensSpec::opening_angle() const {
  const double c = 0.5 * chord();
  const double h0 = R - std::sqrt(R * R - c * c);
  // tangent-chord angle of an arc with sagitta h is 2 atan(h / c)
  if (kind == LensKind::DoublyConvex) return 4.0 * std::atan(h0 / c);
  return 2.0 * (std::atan(h0 * (1 + thickness) / c) - std::atan(h0 * (1 - thickness) / c));
}

double LensSpec::area() const {
  const double c = 0.5 * chord();
  const double h0 = R - std::sqrt(R * R - c * c);
  if (kind == LensKind::DoublyConvex) return 2.0 * segment_area(c, h0);
  return segment_area(c, h0 * (1 + thickness)) - segment_area(c, h0 * (1 - thickness));
}

bool LensSpec::contains(Point p) const {
  const double c = 0.5 * chord();
  const Point u = (b - a) / chord();
  const Point q = (p - 0.5 * (a + b)) * std::conj(u);
  const double x = q.real(), y = q.imag();
  const double h0 = R - std::sqrt(R * R - c * c);
  if (kind == LensKind::DoublyConvex) {
    const double d = R - h0;
    return std::norm(q - Point(0, -d)) < R * R && std::norm(q - Point(0, d)) < R * R;
  }
  if (y <= 0.0) return false;
  const double k = (x * x + y * y - c * c) / (2.0 * y);
  const double h = k + std::sqrt(c * c + k * k);
  return h > h0 * (1 - thickness) && h < h0 * (1 + thickness);
}

// ---- vertex disks ----

double VertexDiskFamily::max_diam() const {
  double m = 0.0;
  for (const auto& d : disks) m = std::max(m, 2.0 * d.radius);
  return m;
}

bool VertexDiskFamily::tripled_disjoint() const {
  for (std::size_t p = 0; p < disks.size(); ++p)
    for (std::size_t q = p + 1; q < disks.size(); ++q)
      if (std::abs(disks[p].center - disks[q].center) <= 3.0 * (disks[p].radius + disks[q].radius)) return false;
  return true;
}

VertexDiskFamily build_vertex_disks(const CellPartition& partition, double eps) {
  VertexDiskFamily fam;
  const auto& V = partition.vertices;
  for (std::size_t k = 0; k < V.size(); ++k) {
    double r = 0.5 * eps;
    for (std::size_t m = 0; m < V.size(); ++m)
      if (m != k) r = std::min(r, std::abs(V[m] - V[k]) / 6.01);
    for (const auto& e : partition.adjacency)
      if (e.p0 == V[k] || e.p1 == V[k]) r = std::min(r, 0.25 * e.length());
    fam.disks.push_back({V[k], r});
  }
  return fam;
}

bool disk_in_domain(const GridDomain& target, Point c, double r) {
  const double s = target.spacing();
  const Point o = target.origin();
  const int i0 = static_cast<int>(std::floor((c.real() - r - o.real()) / s));
  const int i1 = static_cast<int>(std::floor((c.real() + r - o.real()) / s));
  const int j0 = static_cast<int>(std::floor((c.imag() - r - o.imag()) / s));
  const int j1 = static_cast<int>(std::floor((c.imag() + r - o.imag()) / s));
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i) {
      const double x0 = o.real() + i * s, y0 = o.imag() + j * s;
      const double dx = std::max({x0 - c.real(), 0.0, c.real() - (x0 + s)});
      const double dy = std::max({y0 - c.imag(), 0.0, c.imag() - (y0 + s)});
      if (dx * dx + dy * dy >= r * r) continue;
      if (!target.cell(i, j)) return false;
    }
  return true;
}

}  // namespace hs
