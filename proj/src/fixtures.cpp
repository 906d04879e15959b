#include "hs/fixtures.hpp"

#include <cmath>

#include "hs/error.hpp"
#include "hs/hopf.hpp"

namespace hs {

GridMapping shear_kink_fixture(int cells) {
  const GridDomain d(Point(0, 0), 1.0 / cells, cells, cells);
  return GridMapping::sample(d, [](Point p) { return Point(p.real() + 0.2 * std::abs(p.imag() - 0.5), p.imag()); });
}

MapJet fold_jet(double c) {
  return [c](Point z) -> Jet {
    if (z.imag() < 0) return {Point(z.real() + c * z.imag(), z.imag()), {1.0, c, 0.0, 1.0}};
    return {z, {1.0, 0.0, 0.0, 1.0}};
  };
}

GridMapping fold_fixture(int cells, double c) {
  const GridDomain d(Point(0.0, -0.5), 1.0 / cells, cells, cells);
  const MapJet f = fold_jet(c);
  return GridMapping::sample(d, [&](Point p) { return f(p).value; });
}

MapJet radial_kink_jet(double c) {
  return [c](Point z) -> Jet {
    const double r = std::abs(z);
    if (r >= 1.0) return {z, {1.0, 0.0, 0.0, 1.0}};
    const double ph = 1.0 + c * (r - 1.0);
    const double x = z.real(), y = z.imag();
    if (r == 0.0) return {z, {ph, 0.0, 0.0, ph}};
    return {z * ph, {ph + c * x * x / r, c * x * y / r, c * x * y / r, ph + c * y * y / r}};
  };
}

GridMapping identity_fixture(int cells) { return GridMapping::identity(GridDomain(Point(0, 0), 1.0 / cells, cells, cells)); }

GridMapping annulus_fixture(int cells, double r, double R) {
  const GridDomain d = GridDomain::from_predicate(Point(-R, -R), 2.0 * R / cells, cells, cells, [&](Point p) {
    const double a = std::abs(p);
    return a > r && a < R;
  });
  return example_annulus_map(d);
}

GridMapping bump_fixture(int cells) {
  const GridDomain d(Point(0, 0), 1.0 / cells, cells, cells);
  return GridMapping::sample(d, [](Point p) {
    return p + 0.1 * Point(1.0, 0.5) * std::exp(-std::norm(p - Point(0.45, 0.55)) / 0.02);
  });
}

std::vector<std::string> fixture_names() { return {"identity", "shear-kink", "fold", "annulus", "bump"}; }

GridMapping make_fixture(const std::string& name, int cells) {
  if (cells < 2) throw Error("fixture needs at least 2 cells");
  if (name == "identity") return identity_fixture(cells);
  if (name == "shear-kink") return shear_kink_fixture(cells);
  if (name == "fold") return fold_fixture(cells);
  if (name == "annulus") return annulus_fixture(cells);
  if (name == "bump") return bump_fixture(cells);
  throw Error("unknown fixture: " + name);
}

}  // namespace hs
