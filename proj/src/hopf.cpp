#include "hs/hopf.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hs/error.hpp"
#include "hs/harmonic.hpp"

namespace hs {

namespace {

const Complex kI(0.0, 1.0);

void fill_residual(HopfField& f) {
  const GridDomain& d = f.domain;
  const Partials p = partial_derivatives(d, f.F, &f.f_valid);
  f.dbar_residual.assign(d.node_count(), Complex{});
  f.residual_valid = p.valid;
  double l1 = 0.0, l2 = 0.0;
  for (std::size_t n = 0; n < d.node_count(); ++n) {
    if (!p.valid[n]) continue;
    f.dbar_residual[n] = 0.5 * (p.dx[n] + kI * p.dy[n]);
    const double w = d.node_weight(n);
    l1 += w * std::abs(f.dbar_residual[n]);
    l2 += w * std::norm(f.dbar_residual[n]);
  }
  f.l1_residual = l1;
  f.l2_residual = std::sqrt(l2);
}

}  // namespace

HopfField hopf_differential(const GridMapping& h, const std::vector<std::uint8_t>* exclude) {
  const GridDomain& d = h.domain();
  const WirtingerField w = wirtinger(h);
  HopfField f;
  f.domain = d;
  f.F.assign(d.node_count(), Complex{});
  f.f_valid.assign(d.node_count(), 0);
  for (std::size_t n = 0; n < d.node_count(); ++n) {
    if (!w.valid[n] || (exclude && (*exclude)[n])) continue;
    f.F[n] = w.hz[n] * std::conj(w.hzb[n]);
    f.f_valid[n] = 1;
  }
  fill_residual(f);
  return f;
}

HopfField hopf_from_field(const GridDomain& domain, std::vector<Complex> F) {
  if (F.size() != domain.node_count()) throw Error("field size mismatch");
  HopfField f;
  f.domain = domain;
  f.F = std::move(F);
  f.f_valid.assign(domain.node_count(), 0);
  for (std::size_t n = 0; n < domain.node_count(); ++n) f.f_valid[n] = domain.node_masked(n);
  fill_residual(f);
  return f;
}

RegionResidual dbar_l1(const HopfField& field, const NodeSet& region) {
  RegionResidual r;
  bool any = false;
  for (std::size_t n = 0; n < field.domain.node_count(); ++n) {
    if (!region.contains(n) || !field.residual_valid[n]) continue;
    any = true;
    r.value += field.domain.node_weight(n) * std::abs(field.dbar_residual[n]);
  }
  r.empty_region = !any;
  return r;
}

Complex sigma_of(Complex hz, Complex hzb) {
  const Complex F = hz * std::conj(hzb);
  const double m = std::abs(hz) * std::abs(hzb);
  if (m < 1e-14) return 1.0;
  return F / std::abs(F);
}

SigmaField sigma_field(const WirtingerField& w) {
  SigmaField s;
  s.sigma.assign(w.hz.size(), Complex(1.0, 0.0));
  for (std::size_t n = 0; n < w.hz.size(); ++n)
    if (w.valid[n]) s.sigma[n] = sigma_of(w.hz[n], w.hzb[n]);
  return s;
}

std::optional<Complex> interpolate_bilinear(const GridDomain& d, const std::vector<Complex>& values,
                                            const std::vector<std::uint8_t>& valid, Point p) {
  const double fx = (p.real() - d.origin().real()) / d.spacing();
  const double fy = (p.imag() - d.origin().imag()) / d.spacing();
  const double tol = 1e-12;
  if (!(fx >= -tol && fy >= -tol && fx <= d.nx() - 1 + tol && fy <= d.ny() - 1 + tol)) return std::nullopt;
  const int i = std::clamp(static_cast<int>(std::floor(fx)), 0, d.nx() - 2);
  const int j = std::clamp(static_cast<int>(std::floor(fy)), 0, d.ny() - 2);
  const double tx = std::clamp(fx - i, 0.0, 1.0), ty = std::clamp(fy - j, 0.0, 1.0);
  const std::size_t n00 = d.index(i, j), n10 = d.index(i + 1, j), n01 = d.index(i, j + 1), n11 = d.index(i + 1, j + 1);
  // corners carrying zero weight may be invalid
  auto need = [&](std::size_t n, double w) { return w == 0.0 || valid[n]; };
  const double w00 = (1 - tx) * (1 - ty), w10 = tx * (1 - ty), w01 = (1 - tx) * ty, w11 = tx * ty;
  if (!(need(n00, w00) && need(n10, w10) && need(n01, w01) && need(n11, w11))) return std::nullopt;
  Complex v{};
  if (w00 != 0.0) v += w00 * values[n00];
  if (w10 != 0.0) v += w10 * values[n10];
  if (w01 != 0.0) v += w01 * values[n01];
  if (w11 != 0.0) v += w11 * values[n11];
  return v;
}

Pullback conformal_pullback(const GridDomain& f_domain, const std::vector<Complex>& F,
                            const std::vector<std::uint8_t>& f_valid, const std::function<Complex(Complex)>& phi,
                            const std::function<Complex(Complex)>& dphi, const GridDomain& source) {
  Pullback out;
  out.domain = source;
  out.values.assign(source.node_count(), Complex{});
  out.valid.assign(source.node_count(), 0);
  for (std::size_t n = 0; n < source.node_count(); ++n) {
    if (!source.node_masked(n)) continue;
    const Point xi = source.node(n);
    const auto v = interpolate_bilinear(f_domain, F, f_valid, phi(xi));
    if (!v) continue;
    const Complex dp = dphi(xi);
    out.values[n] = *v * dp * dp;
    out.valid[n] = 1;
  }
  return out;
}

Complex example_annulus_value(Complex z) {
  const double r = std::abs(z);
  if (r <= 1.0) return z / r;
  return 0.5 * (z + 1.0 / std::conj(z));
}

Complex example_annulus_hopf(Complex z) { return -1.0 / (4.0 * z * z); }

GridMapping example_annulus_map(const GridDomain& d) {
  for (int j = 0; j < d.cells_y(); ++j)
    for (int i = 0; i < d.cells_x(); ++i) {
      if (!d.cell(i, j)) continue;
      const Point lo = d.node(i, j), hi = d.node(i + 1, j + 1);
      if (lo.real() <= 0.0 && hi.real() >= 0.0 && lo.imag() <= 0.0 && hi.imag() >= 0.0)
        throw Error("puncture in domain");
    }
  return GridMapping::sample(d, example_annulus_value);
}

Case0Report case0_check(const GridMapping& h) {
  const WirtingerField w = wirtinger(h);
  Case0Report r;
  r.positive_gap = -INFINITY;
  r.negative_gap = -INFINITY;
  for (std::size_t n = 0; n < w.hz.size(); ++n) {
    if (!w.valid[n]) continue;
    const double F = std::abs(w.hz[n] * std::conj(w.hzb[n]));
    if (w.jacobian[n] > 0.0) {
      ++r.positive;
      r.positive_gap = std::max(r.positive_gap, std::norm(w.hzb[n]) - F);
      r.defect = std::max(r.defect, std::abs(w.hzb[n]));
    } else if (w.jacobian[n] < 0.0) {
      ++r.negative;
      r.negative_gap = std::max(r.negative_gap, std::norm(w.hz[n]) - F);
      r.anti_defect = std::max(r.anti_defect, std::abs(w.hz[n]));
    }
  }
  return r;
}

ImageLocator::ImageLocator(const GridMapping& H) : H_(&H) {
  for_each_triangle(H.domain(), [&](const Triangle& t) { tris_.push_back(t); });
  if (tris_.empty()) throw Error("empty domain");
  double x0 = INFINITY, y0 = INFINITY, x1 = -INFINITY, y1 = -INFINITY;
  for (const auto& t : tris_)
    for (auto n : t.nodes) {
      x0 = std::min(x0, H[n].real());
      x1 = std::max(x1, H[n].real());
      y0 = std::min(y0, H[n].imag());
      y1 = std::max(y1, H[n].imag());
    }
  lo_ = Point(x0, y0);
  hi_ = Point(x1, y1);
  const int side = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(tris_.size()) / 2.0)));
  bx_ = by_ = side;
  cw_ = std::max((x1 - x0) / bx_, 1e-300);
  ch_ = std::max((y1 - y0) / by_, 1e-300);
  buckets_.assign(static_cast<std::size_t>(bx_) * by_, {});
  for (std::size_t k = 0; k < tris_.size(); ++k) {
    double a0 = INFINITY, b0 = INFINITY, a1 = -INFINITY, b1 = -INFINITY;
    for (auto n : tris_[k].nodes) {
      a0 = std::min(a0, H[n].real());
      a1 = std::max(a1, H[n].real());
      b0 = std::min(b0, H[n].imag());
      b1 = std::max(b1, H[n].imag());
    }
    const int i0 = std::clamp(static_cast<int>((a0 - x0) / cw_), 0, bx_ - 1);
    const int i1 = std::clamp(static_cast<int>((a1 - x0) / cw_), 0, bx_ - 1);
    const int j0 = std::clamp(static_cast<int>((b0 - y0) / ch_), 0, by_ - 1);
    const int j1 = std::clamp(static_cast<int>((b1 - y0) / ch_), 0, by_ - 1);
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) buckets_[static_cast<std::size_t>(j) * bx_ + i].push_back(k);
  }
}

std::vector<std::size_t> ImageLocator::candidates(Point lo, Point hi) const {
  std::vector<std::size_t> out;
  if (hi.real() < lo_.real() || hi.imag() < lo_.imag() || lo.real() > hi_.real() || lo.imag() > hi_.imag()) return out;
  const int i0 = std::clamp(static_cast<int>((lo.real() - lo_.real()) / cw_), 0, bx_ - 1);
  const int i1 = std::clamp(static_cast<int>((hi.real() - lo_.real()) / cw_), 0, bx_ - 1);
  const int j0 = std::clamp(static_cast<int>((lo.imag() - lo_.imag()) / ch_), 0, by_ - 1);
  const int j1 = std::clamp(static_cast<int>((hi.imag() - lo_.imag()) / ch_), 0, by_ - 1);
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i) {
      const auto& b = buckets_[static_cast<std::size_t>(j) * bx_ + i];
      out.insert(out.end(), b.begin(), b.end());
    }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::optional<Point> ImageLocator::preimage(Point w) const {
  const GridMapping& H = *H_;
  const GridDomain& d = H.domain();
  for (auto k : candidates(w, w)) {
    const Triangle& t = tris_[k];
    const Complex a = H[t.nodes[0]], b = H[t.nodes[1]], c = H[t.nodes[2]];
    auto cross = [](Complex u, Complex v) { return u.real() * v.imag() - u.imag() * v.real(); };
    const double area = cross(b - a, c - a);
    if (area == 0.0) continue;
    const double l1 = cross(c - b, w - b) / area;
    const double l2 = cross(a - c, w - c) / area;
    const double l3 = 1.0 - l1 - l2;
    const double tol = -1e-12;
    if (l1 >= tol && l2 >= tol && l3 >= tol)
      return l1 * d.node(t.nodes[0]) + l2 * d.node(t.nodes[1]) + l3 * d.node(t.nodes[2]);
  }
  return std::nullopt;
}

InverseComposition compose_inverse(const GridMapping& H, const GridMapping& h) {
  const ImageLocator loc(H);
  InverseComposition out{GridMapping(h.domain()), std::vector<std::uint8_t>(h.domain().node_count(), 0)};
  for (std::size_t n = 0; n < h.domain().node_count(); ++n) {
    if (!h.domain().node_masked(n)) continue;
    if (const auto p = loc.preimage(h[n])) {
      out.chi[n] = *p;
      out.valid[n] = 1;
    }
  }
  return out;
}

namespace {

double cross(Point u, Point v) { return u.real() * v.imag() - u.imag() * v.real(); }

double polygon_area(const std::vector<Point>& p) {
  double a = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) a += cross(p[k], p[(k + 1) % p.size()]);
  return 0.5 * a;
}

}  // namespace

double triangle_overlap_area(const std::array<Point, 3>& a, const std::array<Point, 3>& b) {
  std::array<Point, 3> clip = b;
  if (cross(clip[1] - clip[0], clip[2] - clip[0]) < 0) std::swap(clip[1], clip[2]);
  if (cross(clip[1] - clip[0], clip[2] - clip[0]) == 0) return 0.0;
  std::vector<Point> poly(a.begin(), a.end()), next;
  for (int e = 0; e < 3 && !poly.empty(); ++e) {
    const Point p = clip[e], q = clip[(e + 1) % 3];
    auto side = [&](Point x) { return cross(q - p, x - p); };
    next.clear();
    for (std::size_t k = 0; k < poly.size(); ++k) {
      const Point u = poly[k], v = poly[(k + 1) % poly.size()];
      const double su = side(u), sv = side(v);
      if (su >= 0) next.push_back(u);
      if ((su >= 0) != (sv >= 0)) next.push_back(u + (v - u) * (su / (su - sv)));
    }
    poly.swap(next);
  }
  return poly.size() < 3 ? 0.0 : std::abs(polygon_area(poly));
}

EnergyComparison energy_comparison(const GridMapping& h, const GridMapping& H, const NodeSet& region,
                                   const GridMapping& chi) {
  const GridDomain& d = h.domain();
  if (!d.same_grid(chi.domain())) throw Error("domain mismatch");
  const GridDomain& D = H.domain();
  const double tri_area = 0.5 * d.spacing() * d.spacing();
  EnergyComparison r;
  for_each_triangle(d, [&](const Triangle& t) {
    if (!region.contains(t.nodes[0]) || !region.contains(t.nodes[1]) || !region.contains(t.nodes[2])) return;
    const auto gh = triangle_gradient(d, h.values(), t);
    const auto gc = triangle_gradient(d, chi.values(), t);
    const Complex hz = 0.5 * (gh[0] - kI * gh[1]), hzb = 0.5 * (gh[0] + kI * gh[1]);
    const Complex cz = 0.5 * (gc[0] - kI * gc[1]), czb = 0.5 * (gc[0] + kI * gc[1]);
    const double J = std::norm(cz) - std::norm(czb);
    if (!(J > 0.0)) throw Error("not a diffeomorphism on Q'");
    ++r.triangles;
    r.energy_h += tri_area * 2.0 * (std::norm(hz) + std::norm(hzb));
    r.substitution +=
        tri_area * 2.0 * (std::norm(hz * std::conj(cz) - hzb * std::conj(czb)) + std::norm(hzb * cz - hz * czb)) / J;
    const Complex sigma = sigma_of(hz, hzb);
    r.chain += tri_area * 4.0 * (std::norm(cz - sigma * czb) / J - 1.0) * std::abs(hz * hzb);

    // direct: energy density of H integrated over the image triangle chi(t)
    const std::array<Point, 3> img = {chi[t.nodes[0]], chi[t.nodes[1]], chi[t.nodes[2]]};
    const double s = D.spacing();
    double x0 = INFINITY, y0 = INFINITY, x1 = -INFINITY, y1 = -INFINITY;
    for (auto p : img) {
      x0 = std::min(x0, p.real());
      x1 = std::max(x1, p.real());
      y0 = std::min(y0, p.imag());
      y1 = std::max(y1, p.imag());
    }
    const int i0 = static_cast<int>(std::floor((x0 - D.origin().real()) / s));
    const int i1 = static_cast<int>(std::floor((x1 - D.origin().real()) / s));
    const int j0 = static_cast<int>(std::floor((y0 - D.origin().imag()) / s));
    const int j1 = static_cast<int>(std::floor((y1 - D.origin().imag()) / s));
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) {
        if (!D.cell(i, j)) continue;
        for (const auto& T : cell_triangles(D, i, j)) {
          const std::array<Point, 3> src = {D.node(T.nodes[0]), D.node(T.nodes[1]), D.node(T.nodes[2])};
          const double ov = triangle_overlap_area(img, src);
          if (ov <= 0.0) continue;
          const auto g = triangle_gradient(D, H.values(), T);
          r.direct += ov * (std::norm(g[0]) + std::norm(g[1]));
        }
      }
  });
  return r;
}

MinimalityProbe minimality_probe(const GridMapping& h, const NodeSet& region, double amplitude, int trials,
                                 unsigned seed) {
  const GridDomain& d = h.domain();
  const RegionSplit split = split_region(d, region);
  if (split.interior.empty()) throw Error("degenerate region");
  std::mt19937 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, split.interior.size() - 1);
  std::normal_distribution<double> g;
  const double base = dirichlet_energy(h);
  MinimalityProbe p;
  p.min_relative_change = INFINITY;
  for (int k = 0; k < trials; ++k) {
    const Point c = d.node(split.interior[pick(rng)]);
    const double width = 6.0 * d.spacing();
    const Complex amp = amplitude * Complex(g(rng), g(rng));
    GridMapping q = h;
    for (auto n : split.interior) q[n] += amp * std::exp(-std::norm(d.node(n) - c) / (2 * width * width));
    const double rel = (dirichlet_energy(q) - base) / base;
    p.min_relative_change = std::min(p.min_relative_change, rel);
    p.decreased += rel < 0.0;
    ++p.trials;
  }
  return p;
}

}  // namespace hs
