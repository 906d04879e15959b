#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "hs/error.hpp"
#include "hs/field.hpp"
#include "hs/harmonic.hpp"

using namespace hs;
using std::numbers::pi;

namespace {

GridDomain unit_square(int n) { return GridDomain({0.0, 0.0}, 1.0 / n, n, n); }

NodeSet rect(const GridDomain& d, int i0, int j0, int i1, int j1) {
  NodeSet s(d.node_count());
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i) s.insert(d.index(i, j));
  return s;
}

// Minimizer of the P1 energy with the trace fixed, assembled triangle by
// triangle from the element stiffness matrices and solved densely.
std::vector<Complex> dense_oracle(const GridMapping& h, const NodeSet& region) {
  const GridDomain& d = h.domain();
  const RegionSplit split = split_region(d, region);
  const auto& free = split.interior;
  std::vector<int> local(d.node_count(), -1);
  for (std::size_t k = 0; k < free.size(); ++k) local[free[k]] = static_cast<int>(k);
  const int m = static_cast<int>(free.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXcd b = Eigen::MatrixXcd::Zero(m, 1);
  for_each_triangle(d, [&](const Triangle& t) {
    // gradient operator rows on the reference right triangle, legs = spacing
    std::array<std::array<double, 3>, 2> G;
    if (!t.upper)
      G = {{{-1, 1, 0}, {0, -1, 1}}};
    else
      G = {{{0, 1, -1}, {-1, 0, 1}}};
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < 3; ++q) {
        const double kpq = 0.5 * (G[0][p] * G[0][q] + G[1][p] * G[1][q]);
        const int lp = local[t.nodes[p]], lq = local[t.nodes[q]];
        if (lp < 0) continue;
        if (lq >= 0)
          A(lp, lq) += kpq;
        else
          b(lp, 0) -= kpq * h[t.nodes[q]];
      }
  });
  const Eigen::MatrixXcd x = A.cast<Complex>().lu().solve(b);
  std::vector<Complex> out(h.values().begin(), h.values().end());
  for (int k = 0; k < m; ++k) out[free[k]] = x(k, 0);
  return out;
}

double max_diff(std::span<const Complex> a, std::span<const Complex> b) {
  double e = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) e = std::max(e, std::abs(a[k] - b[k]));
  return e;
}

}  // namespace

TEST_CASE("poisson_extend: affine boundary data extends to the affine map") {
  const GridDomain d = unit_square(12);
  const Complex a(1.2, 0.3), b(-0.2, 0.4);
  const GridMapping exact = GridMapping::sample(d, [&](Point z) { return a * z + b * std::conj(z); });
  GridMapping h = exact;
  for (std::size_t n = 0; n < d.node_count(); ++n)
    if (!d.node_on_boundary(n)) h[n] = 0.0;
  const HarmonicSolve s = poisson_extend(h, NodeSet::all_masked(d));
  CHECK(max_diff(s.values, exact.values()) < 1e-9);
  CHECK(s.residual <= 1e-10);
}

TEST_CASE("poisson_extend: matches the dense oracle") {
  const GridDomain d = unit_square(16);  // 17 x 17 nodes
  const NodeSet all = NodeSet::all_masked(d);
  const GridMapping re = GridMapping::sample(d, [](Point z) { return Complex((z * z).real(), 0.0); });
  CHECK(max_diff(poisson_extend(re, all).values, dense_oracle(re, all)) < 1e-9);

  std::mt19937 rng(1);
  std::normal_distribution<double> g;
  GridMapping noisy(d);
  for (std::size_t n = 0; n < d.node_count(); ++n) noisy[n] = Complex(g(rng), g(rng));
  CHECK(max_diff(poisson_extend(noisy, all).values, dense_oracle(noisy, all)) < 1e-9);

  // non-rectangular region on a masked domain
  const GridDomain disk = GridDomain::from_predicate({-1, -1}, 1.0 / 16, 32, 32, [](Point z) { return std::abs(z) < 0.9; });
  GridMapping hd(disk);
  for (std::size_t n = 0; n < disk.node_count(); ++n)
    if (disk.node_masked(n)) hd[n] = Complex(g(rng), g(rng));
  NodeSet part(disk.node_count());
  for (std::size_t n = 0; n < disk.node_count(); ++n)
    if (disk.node_masked(n) && disk.node(n).real() < 0.3) part.insert(n);
  CHECK(max_diff(poisson_extend(hd, part).values, dense_oracle(hd, part)) < 1e-9);
}

TEST_CASE("poisson_extend: outer annulus branch on a square away from the unit circle") {
  const GridDomain d({1.2, -0.4}, 0.8 / 32, 32, 32);
  const GridMapping h = GridMapping::sample(d, [](Point z) { return 0.5 * (z + 1.0 / std::conj(z)); });
  const HarmonicSolve s = poisson_extend(h, NodeSet::all_masked(d));
  CHECK(s.energy_after < s.energy_before);
  CHECK(dirichlet_energy(GridMapping(d, s.values)) < dirichlet_energy(h));
}

TEST_CASE("poisson_extend: errors") {
  const GridDomain d = unit_square(4);
  NodeSet thin = rect(d, 0, 0, 4, 1);
  CHECK_THROWS_WITH(poisson_extend(GridMapping::identity(d), thin), "degenerate region");
  GridMapping bad = GridMapping::identity(d);
  bad[0] = Complex(NAN, 0.0);
  CHECK_THROWS_AS(poisson_extend(bad, NodeSet::all_masked(d)), Error);
}

TEST_CASE("harmonic_replace: fixed point and bump removal") {
  const GridDomain d = unit_square(32);
  const NodeSet region = rect(d, 4, 4, 28, 28);
  const GridMapping id = GridMapping::identity(d);
  const GridMapping same = harmonic_replace(id, region);
  CHECK(max_diff(same.values(), id.values()) < 1e-12);
  CHECK(dirichlet_energy(same) == doctest::Approx(dirichlet_energy(id)).epsilon(1e-12));

  // bump vanishing on the region boundary; z is discrete-harmonic so the
  // energy drop is exactly the energy of the bump part
  auto bump = [](Point z) {
    const double x = (z.real() - 0.125) / 0.75, y = (z.imag() - 0.125) / 0.75;
    if (x <= 0 || x >= 1 || y <= 0 || y >= 1) return 0.0;
    return std::pow(std::sin(pi * x) * std::sin(pi * y), 2);
  };
  const GridMapping h = GridMapping::sample(d, [&](Point z) { return z + 0.2 * Complex(bump(z), 0.5 * bump(z)); });
  const GridMapping part = GridMapping::sample(d, [&](Point z) { return 0.2 * Complex(bump(z), 0.5 * bump(z)); });
  const GridMapping r = harmonic_replace(h, region);
  const double drop = dirichlet_energy(h) - dirichlet_energy(r);
  CHECK(drop > 0.0);
  CHECK(drop == doctest::Approx(dirichlet_energy(part)).epsilon(1e-9));
}

TEST_CASE("harmonic_replace: locality is bit-exact") {
  const GridDomain d = unit_square(20);
  const NodeSet region = rect(d, 3, 5, 12, 17);
  const GridMapping h = GridMapping::sample(d, [](Point z) { return z + 0.3 * z * std::conj(z); });
  const HarmonicSolve s = poisson_extend(h, region);
  const GridMapping r = harmonic_replace(h, region);
  std::vector<std::uint8_t> interior(d.node_count(), 0);
  for (auto n : s.split.interior) interior[n] = 1;
  for (std::size_t n = 0; n < d.node_count(); ++n)
    if (!interior[n]) CHECK(r[n] == h[n]);
}

TEST_CASE("property: Dirichlet principle on random traces and subregions") {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> corner(0, 40), extent(8, 23);
  std::normal_distribution<double> g;
  const GridDomain d = unit_square(64);
  int harmonic_instances = 0;
  for (int k = 0; k < 200; ++k) {
    const int i0 = corner(rng), j0 = corner(rng);
    const NodeSet region = rect(d, i0, j0, i0 + extent(rng), j0 + extent(rng));
    const bool harmonic = k % 5 == 0;
    std::array<Complex, 4> c;
    for (auto& x : c) x = Complex(g(rng), g(rng));
    GridMapping h = GridMapping::sample(d, [&](Point z) {
      if (harmonic) return c[0] * z + c[1] * std::conj(z) + c[2] * (z * z).real();
      return c[0] * z + c[1] * std::sin(3 * z.real()) * z.imag() + c[2] * std::cos(5 * z.imag()) + c[3] * z * z;
    });
    const HarmonicSolve s = poisson_extend(h, region);
    const double before = s.energy_before, after = s.energy_after;
    CHECK(after <= before + 1e-10);
    const bool equal = std::abs(after - before) <= 1e-10 * (1 + before);
    CHECK(equal == (harmonic_residual(h, region) <= 1e-8));
    harmonic_instances += harmonic;
  }
  CHECK(harmonic_instances == 40);
}

TEST_CASE("property: linearity and idempotence") {
  std::mt19937 rng(3);
  std::normal_distribution<double> g;
  const GridDomain d = unit_square(24);
  const NodeSet region = rect(d, 2, 2, 21, 19);
  for (int k = 0; k < 5; ++k) {
    GridMapping f(d), h(d);
    for (std::size_t n = 0; n < d.node_count(); ++n) {
      f[n] = Complex(g(rng), g(rng));
      h[n] = Complex(g(rng), g(rng));
    }
    const Complex a(g(rng), g(rng));
    GridMapping combo(d);
    for (std::size_t n = 0; n < d.node_count(); ++n) combo[n] = a * f[n] + h[n];
    const auto pf = poisson_extend(f, region).values, ph = poisson_extend(h, region).values;
    const auto pc = poisson_extend(combo, region).values;
    double e = 0.0;
    for (std::size_t n = 0; n < d.node_count(); ++n) e = std::max(e, std::abs(pc[n] - (a * pf[n] + ph[n])));
    CHECK(e < 1e-9);

    const GridMapping once(d, pf);
    CHECK(max_diff(poisson_extend(once, region).values, pf) < 1e-9);
  }
}

namespace {

// Point at arclength fraction u in [0,1) along a closed polygon.
Point along(const Polygon& poly, double u) {
  double total = 0.0;
  for (std::size_t k = 0; k < poly.size(); ++k) total += std::abs(poly[(k + 1) % poly.size()] - poly[k]);
  double t = u * total;
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const Point a = poly[k], b = poly[(k + 1) % poly.size()];
    const double len = std::abs(b - a);
    if (t <= len) return a + (b - a) * (t / len);
    t -= len;
  }
  return poly.front();
}

// Boundary nodes of the full square grid sent monotonically onto `target` with
// angular density 1 + amp cos(freq theta + phase). The four grid corners go to
// polygon vertices `corners`; otherwise a corner cell whose three nodes all lie
// on one target edge has a flat image whatever the interior values are.
GridMapping monotone_trace(const GridDomain& d, const Polygon& target, double amp, int freq, double phase,
                           std::array<int, 4> corners) {
  const Point c = d.node(d.nx() / 2, d.ny() / 2);
  auto cdf = [&](double th) {
    return (th + amp / freq * (std::sin(freq * th + phase) - std::sin(phase))) / (2 * pi);
  };
  std::vector<double> frac(target.size() + 1, 0.0);
  for (std::size_t k = 0; k < target.size(); ++k)
    frac[k + 1] = frac[k] + std::abs(target[(k + 1) % target.size()] - target[k]);
  for (auto& f : frac) f /= frac.back();
  std::array<double, 5> p, q;
  const std::array<Point, 4> grid_corners = {d.node(d.nx() - 1, d.ny() - 1), d.node(0, d.ny() - 1), d.node(0, 0),
                                             d.node(d.nx() - 1, 0)};
  for (int k = 0; k < 4; ++k) {
    double th = std::arg(grid_corners[k] - c);
    if (th < 0) th += 2 * pi;
    p[k] = cdf(th);
    q[k] = frac[corners[k]];
    if (k > 0 && q[k] < q[k - 1]) q[k] += 1.0;
  }
  p[4] = p[0] + 1.0;
  q[4] = q[0] + 1.0;
  return GridMapping::sample(d, [&](Point z) {
    double th = std::arg(z - c);
    if (th < 0) th += 2 * pi;
    double u = cdf(th);
    if (u < p[0]) u += 1.0;
    int k = 0;
    while (k < 3 && u > p[k + 1]) ++k;
    double w = q[k] + (u - p[k]) / (p[k + 1] - p[k]) * (q[k + 1] - q[k]);
    return along(target, w - std::floor(w));
  });
}

}  // namespace

TEST_CASE("rkc_certify: identity on the square") {
  const GridDomain d = unit_square(16);
  const Polygon sq = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const RkcVerdict v = rkc_certify(GridMapping::identity(d), NodeSet::all_masked(d), sq);
  CHECK(v.orientation_uniform);
  CHECK(v.min_jacobian == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("rkc_certify: nonuniform monotone reparameterisation") {
  const GridDomain d({-1, -1}, 2.0 / 64, 64, 64);
  const Polygon sq = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
  // the along() parameter starts at the first vertex; rotate so angle 0 maps near (1, 0)
  const GridMapping h = monotone_trace(d, sq, 0.9, 1, 0.0, {2, 3, 0, 1});
  const RkcVerdict v = rkc_certify(h, NodeSet::all_masked(d), sq);
  CHECK(v.orientation_uniform);
  CHECK(v.min_jacobian > 0.0);
}

TEST_CASE("rkc_certify: hypothesis checks") {
  const GridDomain d = unit_square(8);
  const Polygon ell = {{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}};
  CHECK_FALSE(is_convex(ell));
  CHECK_THROWS_WITH(rkc_certify(GridMapping::identity(d), NodeSet::all_masked(d), ell), "RKC hypothesis violated");

  const Polygon sq = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const GridMapping flipped = GridMapping::sample(d, [](Point z) { return Complex(z.imag(), z.real()); });
  CHECK_THROWS_WITH(rkc_certify(flipped, NodeSet::all_masked(d), sq), "boundary not homeomorphic");
}

TEST_CASE("property: RKC on random monotone densities") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> amp(0.0, 0.9), phase(0.0, 2 * pi);
  std::uniform_int_distribution<int> freq(1, 4);
  const GridDomain d({-1, -1}, 2.0 / 64, 64, 64);
  Polygon hex;
  for (int k = 0; k < 6; ++k) hex.push_back(std::polar(1.0, 2 * pi * k / 6));
  const Polygon sq = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
  int ok = 0;
  for (int k = 0; k < 50; ++k) {
    const Polygon& target = k % 2 ? hex : sq;
    const std::array<int, 4> corners = k % 2 ? std::array<int, 4>{1, 2, 4, 5} : std::array<int, 4>{2, 3, 0, 1};
    const double a = amp(rng);
    const int f = freq(rng);
    const RkcVerdict v = rkc_certify(monotone_trace(d, target, a, f, phase(rng), corners),
                                     NodeSet::all_masked(d), target);
    ok += v.orientation_uniform && v.min_jacobian > 0.0;
  }
  CHECK(ok == 50);
}
