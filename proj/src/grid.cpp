#include "hs/grid.hpp"

#include <cmath>
#include <queue>

#include "hs/error.hpp"

namespace hs {

GridDomain::GridDomain(Point origin, double spacing, int cells_x, int cells_y)
    : GridDomain(origin, spacing, cells_x + 1, cells_y + 1,
                 std::vector<std::uint8_t>(static_cast<std::size_t>(cells_x) * cells_y, 1)) {}

GridDomain::GridDomain(Point origin, double spacing, int nx, int ny, std::vector<std::uint8_t> cell_mask)
    : origin_(origin), spacing_(spacing), nx_(nx), ny_(ny), cell_mask_(std::move(cell_mask)) {
  if (!(spacing > 0.0) || nx < 2 || ny < 2) throw Error("grid domain: spacing must be positive and nx, ny >= 2");
  if (cell_mask_.size() != cell_count()) throw Error("grid domain: cell mask size mismatch");
  rebuild_node_flags();
}

GridDomain GridDomain::from_predicate(Point origin, double spacing, int cells_x, int cells_y,
                                      const std::function<bool(Point)>& inside) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(cells_x) * cells_y, 0);
  for (int j = 0; j < cells_y; ++j)
    for (int i = 0; i < cells_x; ++i)
      mask[static_cast<std::size_t>(j) * cells_x + i] =
          inside(origin + Point((i + 0.5) * spacing, (j + 0.5) * spacing)) ? 1 : 0;
  return GridDomain(origin, spacing, cells_x + 1, cells_y + 1, std::move(mask));
}

bool GridDomain::cell(int i, int j) const {
  if (i < 0 || j < 0 || i >= nx_ - 1 || j >= ny_ - 1) return false;
  return cell_mask_[static_cast<std::size_t>(j) * (nx_ - 1) + i] != 0;
}

std::size_t GridDomain::masked_cell_count() const {
  std::size_t c = 0;
  for (auto m : cell_mask_) c += m != 0;
  return c;
}

bool GridDomain::node_masked(int i, int j) const {
  if (i < 0 || j < 0 || i >= nx_ || j >= ny_) return false;
  return node_masked_[index(i, j)] != 0;
}

std::size_t GridDomain::masked_node_count() const {
  std::size_t c = 0;
  for (auto m : node_masked_) c += m != 0;
  return c;
}

double GridDomain::node_weight(std::size_t n) const {
  const int i = col(n), j = row(n);
  const int cells = cell(i - 1, j - 1) + cell(i, j - 1) + cell(i - 1, j) + cell(i, j);
  return 0.25 * cells * spacing_ * spacing_;
}

void GridDomain::rebuild_node_flags() {
  node_masked_.assign(node_count(), 0);
  node_boundary_.assign(node_count(), 0);
  for (int j = 0; j < ny_; ++j) {
    for (int i = 0; i < nx_; ++i) {
      const int cells = cell(i - 1, j - 1) + cell(i, j - 1) + cell(i - 1, j) + cell(i, j);
      node_masked_[index(i, j)] = cells > 0;
      node_boundary_[index(i, j)] = cells > 0 && cells < 4;
    }
  }
}

bool GridDomain::connected() const {
  const int cx = nx_ - 1, cy = ny_ - 1;
  std::vector<std::uint8_t> seen(cell_mask_.size(), 0);
  std::size_t start = cell_mask_.size();
  for (std::size_t c = 0; c < cell_mask_.size(); ++c)
    if (cell_mask_[c]) {
      start = c;
      break;
    }
  if (start == cell_mask_.size()) return false;
  std::queue<std::size_t> q;
  q.push(start);
  seen[start] = 1;
  std::size_t reached = 1;
  while (!q.empty()) {
    const std::size_t c = q.front();
    q.pop();
    const int i = static_cast<int>(c % cx), j = static_cast<int>(c / cx);
    const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int a = i + di[k], b = j + dj[k];
      if (a < 0 || b < 0 || a >= cx || b >= cy) continue;
      const std::size_t d = static_cast<std::size_t>(b) * cx + a;
      if (cell_mask_[d] && !seen[d]) {
        seen[d] = 1;
        ++reached;
        q.push(d);
      }
    }
  }
  return reached == masked_cell_count();
}

void GridDomain::validate() const {
  if (!(spacing_ > 0.0) || nx_ < 2 || ny_ < 2) throw Error("grid domain: invalid size");
  if (masked_cell_count() == 0) throw Error("empty domain");
  if (!connected()) throw Error("grid domain: masked cells are not edge-connected");
}

bool GridDomain::same_grid(const GridDomain& other) const {
  return nx_ == other.nx_ && ny_ == other.ny_ && spacing_ == other.spacing_ && origin_ == other.origin_ &&
         cell_mask_ == other.cell_mask_;
}

NodeSet NodeSet::all_masked(const GridDomain& domain) {
  NodeSet s(domain.node_count());
  for (std::size_t n = 0; n < domain.node_count(); ++n)
    if (domain.node_masked(n)) s.insert(n);
  return s;
}

std::size_t NodeSet::size() const {
  std::size_t c = 0;
  for (auto f : flags_) c += f != 0;
  return c;
}

std::vector<std::size_t> NodeSet::members() const {
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < flags_.size(); ++n)
    if (flags_[n]) out.push_back(n);
  return out;
}

std::array<Triangle, 2> cell_triangles(const GridDomain& d, int i, int j) {
  const std::size_t a = d.index(i, j), b = d.index(i + 1, j), c = d.index(i + 1, j + 1), e = d.index(i, j + 1);
  return {Triangle{{a, b, c}, i, j, false}, Triangle{{a, c, e}, i, j, true}};
}

void for_each_triangle(const GridDomain& domain, const std::function<void(const Triangle&)>& visit) {
  for (int j = 0; j < domain.cells_y(); ++j)
    for (int i = 0; i < domain.cells_x(); ++i) {
      if (!domain.cell(i, j)) continue;
      for (const auto& t : cell_triangles(domain, i, j)) visit(t);
    }
}

GridMapping::GridMapping(GridDomain domain) : domain_(std::move(domain)), values_(domain_.node_count()) {}

GridMapping::GridMapping(GridDomain domain, std::vector<Complex> values)
    : domain_(std::move(domain)), values_(std::move(values)) {
  if (values_.size() != domain_.node_count()) throw Error("grid mapping: value count mismatch");
}

GridMapping GridMapping::sample(const GridDomain& domain, const std::function<Complex(Point)>& fn) {
  GridMapping h(domain);
  for (std::size_t n = 0; n < domain.node_count(); ++n)
    if (domain.node_masked(n)) h.values_[n] = fn(domain.node(n));
  return h;
}

GridMapping GridMapping::identity(const GridDomain& domain) {
  return sample(domain, [](Point z) { return z; });
}

bool GridMapping::finite() const {
  for (std::size_t n = 0; n < values_.size(); ++n)
    if (domain_.node_masked(n) && !(std::isfinite(values_[n].real()) && std::isfinite(values_[n].imag())))
      return false;
  return true;
}

GridMapping GridMapping::operator-(const GridMapping& other) const {
  if (!domain_.same_grid(other.domain_)) throw Error("domain mismatch");
  GridMapping out(domain_);
  for (std::size_t n = 0; n < values_.size(); ++n) out.values_[n] = values_[n] - other.values_[n];
  return out;
}

GridMapping GridMapping::operator+(const GridMapping& other) const {
  if (!domain_.same_grid(other.domain_)) throw Error("domain mismatch");
  GridMapping out(domain_);
  for (std::size_t n = 0; n < values_.size(); ++n) out.values_[n] = values_[n] + other.values_[n];
  return out;
}

std::array<Complex, 2> triangle_gradient(const GridDomain& d, std::span<const Complex> v, const Triangle& t) {
  const double s = d.spacing();
  const Complex p0 = v[t.nodes[0]], p1 = v[t.nodes[1]], p2 = v[t.nodes[2]];
  if (!t.upper) return {(p1 - p0) / s, (p2 - p1) / s};
  return {(p1 - p2) / s, (p2 - p0) / s};
}

double image_signed_area(std::span<const Complex> v, const Triangle& t) {
  const Complex a = v[t.nodes[1]] - v[t.nodes[0]], b = v[t.nodes[2]] - v[t.nodes[0]];
  return 0.5 * (a.real() * b.imag() - a.imag() * b.real());
}

}  // namespace hs
