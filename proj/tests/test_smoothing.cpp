#include <Eigen/Dense>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "hs/error.hpp"
#include "hs/field.hpp"
#include "hs/smoothing.hpp"

using namespace hs;
using std::numbers::pi;

namespace {

const Complex I(0.0, 1.0);

// (x + c min(y, 0), y)
MapJet fold_map(double c = 0.1) {
  return [c](Point z) -> Jet {
    if (z.imag() < 0) return {Point(z.real() + c * z.imag(), z.imag()), {1.0, c, 0.0, 1.0}};
    return {z, {1.0, 0.0, 0.0, 1.0}};
  };
}

MapJet identity_map() {
  return [](Point z) -> Jet { return {z, {1.0, 0.0, 0.0, 1.0}}; };
}

// z (1 + c min(|z| - 1, 0)) about the origin
MapJet radial_kink(double c = 0.1) {
  return [c](Point z) -> Jet {
    const double r = std::abs(z);
    if (r >= 1.0) return {z, {1.0, 0.0, 0.0, 1.0}};
    const double ph = 1.0 + c * (r - 1.0), dph = c;
    const double x = z.real(), y = z.imag();
    return {z * ph, {ph + dph * x * x / r, dph * x * y / r, dph * x * y / r, ph + dph * y * y / r}};
  };
}

// analytic Jacobian against central differences of the values
double jet_mismatch(const MapJet& g, Point z, double h = 1e-6) {
  const Jet j = g(z);
  const Complex gx = (g(z + h).value - g(z - h).value) / (2 * h);
  const Complex gy = (g(z + I * h).value - g(z - I * h).value) / (2 * h);
  const double scale = 1.0 + j.D.op_norm();
  return std::max({std::abs(gx.real() - j.D.a), std::abs(gy.real() - j.D.b), std::abs(gx.imag() - j.D.c),
                   std::abs(gy.imag() - j.D.d)}) /
         scale;
}

double raw_bump(double z) { return std::abs(z) >= 1.0 ? 0.0 : std::exp(-1.0 / (1.0 - z * z)); }

}  // namespace

TEST_CASE("cutoff alpha: support, slope, monotonicity") {
  const CutoffAlpha a;
  CHECK(a.eta() == doctest::Approx(1.0 / 30.0));
  CHECK(a(0.2) == 0.0);
  CHECK(a(0.8) == 1.0);
  CHECK(a(0.5) > 0.45);
  CHECK(a(0.5) < 0.55);
  CHECK(bump_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-14));

  double max_slope = 0.0, prev = 0.0;
  bool monotone = true;
  const int N = 100000;
  for (int k = 0; k <= N; ++k) {
    const double t = -0.5 + 2.0 * k / N;
    const double v = a(t);
    if (t <= 1.0 / 3.0) REQUIRE(v == 0.0);
    if (t >= 2.0 / 3.0) REQUIRE(v == 1.0);
    monotone = monotone && v >= prev;
    prev = v;
    max_slope = std::max(max_slope, a.derivative(t));
    CHECK(a.derivative(t) >= 0.0);
  }
  MESSAGE("max sampled alpha' = " << max_slope);
  CHECK(monotone);
  CHECK(max_slope <= 3.75);
  CHECK(max_slope > 3.7);

  CHECK_THROWS_WITH_AS(CutoffAlpha(0.05), "slope bound unattainable", Error);
  CHECK_NOTHROW(CutoffAlpha(1.0 / 24.0));
}

TEST_CASE("cutoff alpha against direct quadrature of the mollification") {
  const double eta = 1.0 / 30.0;
  const CutoffAlpha a(eta);
  boost::math::quadrature::tanh_sinh<double> q;
  const double Z = q.integrate(raw_bump, -1.0, 1.0);
  const double lo = 1.0 / 3.0 + eta, hi = 2.0 / 3.0 - eta;
  auto ramp = [&](double t) { return std::clamp((t - lo) / (hi - lo), 0.0, 1.0); };
  auto ramp_slope = [&](double t) { return (t > lo && t < hi) ? 1.0 / (hi - lo) : 0.0; };
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(0.3, 0.7);
  for (int k = 0; k < 200; ++k) {
    const double t = u(rng);
    // split at the ramp corners so every piece is smooth
    std::vector<double> cuts = {-1.0, 1.0};
    for (double c : {(t - lo) / eta, (t - hi) / eta})
      if (c > -1.0 && c < 1.0) cuts.push_back(c);
    std::sort(cuts.begin(), cuts.end());
    double oracle = 0.0, oracle_d = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
      const double sl = ramp_slope(t - eta * mid);
      oracle += q.integrate([&](double w) { return ramp(t - eta * w) * raw_bump(w); }, cuts[i], cuts[i + 1]) / Z;
      oracle_d += sl * q.integrate(raw_bump, cuts[i], cuts[i + 1]) / Z;
    }
    CHECK(a(t) == doctest::Approx(oracle).epsilon(1e-9).scale(1.0));
    CHECK(a.derivative(t) == doctest::Approx(oracle_d).epsilon(1e-8).scale(1.0));
  }
  // derivative consistent with divided differences
  for (int k = 0; k < 200; ++k) {
    const double t = u(rng), h = 1e-6;
    CHECK(std::abs((a(t + h) - a(t - h)) / (2 * h) - a.derivative(t)) < 1e-6);
  }
}

TEST_CASE("operator norm against SVD") {
  std::mt19937 rng(8);
  std::normal_distribution<double> g;
  for (int k = 0; k < 200; ++k) {
    const Mat2 m{g(rng), g(rng), g(rng), g(rng)};
    Eigen::Matrix2d e;
    e << m.a, m.b, m.c, m.d;
    const Eigen::JacobiSVD<Eigen::Matrix2d> svd(e);
    CHECK(m.op_norm() == doctest::Approx(svd.singularValues()(0)).epsilon(1e-12));
    const Mat2 p = m * m.inverse();
    CHECK(std::abs(p.a - 1) + std::abs(p.b) + std::abs(p.c) + std::abs(p.d - 1) < 1e-9);
  }
  CHECK(Mat2{3, 0, 0, -5}.op_norm() == doctest::Approx(5.0));
}

TEST_CASE("fit_profile") {
  SUBCASE("identity admits the full width") {
    const SmoothingProfile p = fit_profile(identity_map(), 0.0, 1.0, 0.5);
    CHECK(p.beta == 0.5);
    CHECK(p.halvings == 0);
    CHECK(p.M == doctest::Approx(1.0));
  }
  SUBCASE("fold map: only the neighbourhood limits beta") {
    const SmoothingProfile p = fit_profile(fold_map(0.1), 0.0, 1.0, 0.25);
    const double M = (0.1 + std::sqrt(4.01)) / 2.0;  // largest singular value of [[1, .1], [0, 1]]
    CHECK(p.M == doctest::Approx(M).epsilon(1e-12));
    CHECK(p.beta == 0.25);
  }
  SUBCASE("v = y (1 + 0.4 x) forces halvings") {
    MapJet f = [](Point z) -> Jet {
      const double x = z.real(), y = z.imag();
      return {Point(x, y * (1 + 0.4 * x)), {1.0, 0.0, 0.4 * y, 1 + 0.4 * x}};
    };
    const double beta0 = 0.5;
    const SmoothingProfile p = fit_profile(f, 0.0, 1.0, beta0);
    // |v_x| = 0.4 |y| <= 1/(50 M^2) on |y| < beta
    const double limit = 1.0 / (20.0 * p.M * p.M);
    MESSAGE("M = " << p.M << " beta = " << p.beta << " limit " << limit);
    CHECK(p.M >= 1.4);
    CHECK(p.M < 1.45);
    CHECK(p.beta <= limit);
    CHECK(2 * p.beta > limit);
    CHECK(p.beta == std::ldexp(beta0, -p.halvings));
  }
  SUBCASE("errors") {
    MapJet shifted = [](Point z) -> Jet { return {z + 0.1, {1, 0, 0, 1}}; };
    CHECK_THROWS_AS(fit_profile(shifted, 0.0, 1.0, 0.5), CertificationError);
    MapJet flip = [](Point z) -> Jet { return {std::conj(z), {1, 0, 0, -1}}; };
    CHECK_THROWS_AS(fit_profile(flip, 0.0, 1.0, 0.5), CertificationError);
    MapJet shear = [](Point z) -> Jet {
      const double x = z.real(), y = z.imag();
      return {Point(x, y + 0.3 * x * y), {1.0, 0.0, 0.3 * y, 1 + 0.3 * x}};
    };
    ProfileOptions few;
    few.max_halvings = 2;
    CHECK_THROWS_WITH_AS(fit_profile(shear, 0.0, 1.0, 0.5, few), "profile infeasible: |v_x| <= 1/(50M^2)",
                         CertificationError);
  }
}

TEST_CASE("strip smoothing of the identity") {
  const SmoothingProfile p = fit_profile(identity_map(), 0.0, 1.0, 0.3);
  const StripSmoothing g = smooth_strip(identity_map(), p);
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> ux(0.0, 1.0), uy(-0.3, 0.3);
  for (int k = 0; k < 2000; ++k) {
    const Point z(ux(rng), uy(rng));
    const Jet j = g(z);
    CHECK(j.value.real() == z.real());
    CHECK(j.D.a == 1.0);
    CHECK(j.D.b == 0.0);
    CHECK(j.D.det() >= 1.0 / 20.0);
    if (std::abs(z.imag()) <= p.beta / 9) CHECK(j.value.imag() == z.imag() / 2.0);
  }
}

TEST_CASE("strip smoothing of the fold map") {
  const MapJet f = fold_map(0.1);
  const SmoothingProfile p = fit_profile(f, 0.0, 1.0, 0.25);
  const StripSmoothing s = smooth_strip(f, p);
  const MapJet g = s.as_map();
  const double M = p.M, beta = p.beta;

  const StripEstimates e = s.estimates(257, 128);
  CHECK(e.violation.empty());
  CHECK(e.lipschitz_ratio <= 1.0);
  CHECK(e.ux_min >= 0.8);
  CHECK(e.ux_max <= 1.2);
  CHECK(e.uy_max <= 5 * M);
  CHECK(e.det_uv_min >= 3.0 / (10.0 * M));
  CHECK(e.vx_max < 1.5 * M);
  CHECK(e.vy_min >= 1.0 / (2.0 * M));
  CHECK(e.vy_max <= 5 * M);

  std::mt19937 rng(1);
  std::uniform_real_distribution<double> ux(0.0, 1.0), uy(-0.5, 0.5);
  std::size_t outside = 0, core = 0;
  for (int k = 0; k < 20000; ++k) {
    const Point z(ux(rng), uy(rng));
    const Jet gj = g(z);
    if (std::abs(z.imag()) >= beta) {
      const Jet fj = f(z);
      CHECK(gj.value == fj.value);
      ++outside;
    } else if (std::abs(z.imag()) <= beta / 9) {
      CHECK(gj.value == Point(z.real(), z.imag() / (2 * M)));
      ++core;
    }
    if (std::abs(std::abs(z.imag()) - beta) > 1e-5 && std::abs(z.imag()) > 1e-5) CHECK(jet_mismatch(g, z) < 1e-5);
  }
  CHECK(outside > 1000);
  CHECK(core > 100);

  // g is C^1 across the interface: one-sided Jacobians agree
  for (double x : {0.1, 0.5, 0.9}) {
    const Jet above = g(Point(x, 1e-9)), below = g(Point(x, -1e-9));
    CHECK(above.D.a == below.D.a);
    CHECK(above.D.b == below.D.b);
    CHECK(above.D.c == below.D.c);
    CHECK(above.D.d == below.D.d);
  }

  const BoundCertificate c = certify_bounds(g, Point(0, -0.5), Point(1, 0.5), 20 * M, 1000000);
  MESSAGE("fold: max ||Dg|| " << c.max_op_norm << ", min det " << c.min_det << ", 20M = " << 20 * M);
  CHECK(c.samples == 1000000);
  CHECK(c.violations == 0);

  // injective on a sub-rectangle
  const GridDomain d(Point(0.1, -0.4), 0.8 / 512, 512, 512);
  const InjectivityVerdict v = check_injectivity(sample_map(g, d));
  CHECK(v.orientation_uniform);
  CHECK(v.orientation == Orientation::Positive);
}

TEST_CASE("circle smoothing") {
  SUBCASE("identity stays the identity") {
    const CircleSmoothing c = smooth_circle(identity_map(), Point(0, 0), 1.0, 0.2);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> r(0.7, 1.3), th(0, 2 * pi);
    for (int k = 0; k < 2000; ++k) {
      const Point z = std::polar(r(rng), th(rng));
      const Jet gj = c.g(z);
      if (std::abs(std::log(std::abs(z))) >= c.profile.beta) CHECK(gj.value == z);
    }
  }
  SUBCASE("radial kink") {
    const MapJet f = radial_kink(0.1);
    const CircleSmoothing c = smooth_circle(f, Point(0, 0), 1.0, 0.3);
    MESSAGE("circle: M = " << c.M << ", beta = " << c.profile.beta << ", strip M = " << c.profile.M);
    CHECK(c.profile.M <= 2 * c.M);
    const double h = c.strip_halfwidth;
    const BoundCertificate cert = certify_bounds(
        c.g, Point(-std::exp(h), -std::exp(h)), Point(std::exp(h), std::exp(h)), 80 * c.M, 1000000, [&](Point z) {
          const double r = std::abs(z);
          return r > std::exp(-h) && r < std::exp(h);
        });
    MESSAGE("circle: max ||Dg|| " << cert.max_op_norm << ", min det " << cert.min_det);
    CHECK(cert.violations == 0);

    std::mt19937 rng(5);
    std::uniform_real_distribution<double> x(0, 2 * pi), y(-0.3, 0.3);
    for (int k = 0; k < 5000; ++k) {
      const Point zeta(x(rng), y(rng));
      const Jet a = c.G(zeta), b = c.G(zeta + 2 * pi);
      CHECK(std::abs(b.value - a.value - 2 * pi) <= 1e-12);
      const Point z = std::exp(I * zeta);
      if (std::abs(zeta.imag()) >= c.profile.beta) CHECK(c.g(z).value == f(z).value);
      if (std::abs(zeta.imag()) > 1e-4 && std::abs(std::abs(zeta.imag()) - c.profile.beta) > 1e-4)
        CHECK(jet_mismatch(c.g, z) < 1e-5);
    }
    // on the circle g = f = identity
    for (int k = 0; k < 16; ++k) {
      const Point z = std::polar(1.0, 2 * pi * k / 16);
      CHECK(std::abs(c.g(z).value - z) < 1e-12);
    }
  }
  CHECK_THROWS_WITH_AS(smooth_circle(identity_map(), Point(0, 0), 1.0, 0.4), "annulus too thick", Error);
}

TEST_CASE("tubular charts round-trip") {
  for (const TubularChart& c : {segment_chart(Point(0, 0), Point(2, 1), 0.3),
                                arc_chart(Point(1, 1), 2.0, 0.2, 1.4, 0.5), circle_chart(Point(0, 0), 1.5, 0.3)}) {
    CHECK(c.roundtrip_error <= 1e-9);
    CHECK(std::isfinite(c.max_D));
    CHECK(std::isfinite(c.max_Dinv));
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> s(0.0, 1.0), t(-0.99, 0.99);
    for (int k = 0; k < 500; ++k) {
      const Point q(s(rng), t(rng));
      const auto back = c.inverse(c.forward(q).value);
      REQUIRE(back);
      CHECK(std::abs(*back - q) < 1e-9);
      CHECK(jet_mismatch(c.forward, q) < 1e-6);
      CHECK(c.forward(q).D.det() > 0.0);
    }
  }
}

TEST_CASE("arc smoothing with identity charts reduces to the strip") {
  const MapJet f = fold_map(0.1);
  const TubularChart id = segment_chart(Point(0, 0), Point(1, 0), 1.0);
  const ArcSmoothing a = smooth_arc(f, id, id, 0.25, {}, 20000);
  const SmoothingProfile p = fit_profile(f, 0.0, 1.0, 0.25);
  const StripSmoothing s = smooth_strip(f, p);
  CHECK(a.profile.beta == p.beta);
  CHECK(a.profile.M == p.M);
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> ux(0.0, 1.0), uy(-0.5, 0.5);
  for (int k = 0; k < 5000; ++k) {
    const Point z(ux(rng), uy(rng));
    const Jet x = a.g(z), y = s(z);
    CHECK(x.value == y.value);
    CHECK(x.D.a == y.D.a);
    CHECK(x.D.d == y.D.d);
  }
}

namespace {

// radial compression k and angular shear sigma inside the circle of radius R
// about c, identity outside
MapJet arc_bend(Point c, double R, double k, double sigma) {
  return [=](Point z) -> Jet {
    const Complex d = z - c;
    const double rho = std::abs(d);
    if (rho >= R) return {z, {1, 0, 0, 1}};
    const double th = std::arg(d);
    const double rho2 = R - k * (R - rho), th2 = th + sigma * (R - rho);
    const Complex e = std::polar(1.0, th2);
    // d/drho and d/dtheta of the image, then chain to x, y
    const Complex d_rho = k * e - sigma * rho2 * I * e;
    const Complex d_th = rho2 * I * e;
    const double x = d.real() / rho, y = d.imag() / rho;  // drho/dx, drho/dy
    const double tx = -d.imag() / (rho * rho), ty = d.real() / (rho * rho);
    const Complex gx = d_rho * x + d_th * tx, gy = d_rho * y + d_th * ty;
    return {c + rho2 * e, {gx.real(), gy.real(), gx.imag(), gy.imag()}};
  };
}

}  // namespace

TEST_CASE("arc smoothing across a circular arc") {
  const Point c(0, 0);
  const double R = 2.0;
  const MapJet f = arc_bend(c, R, 0.6, 0.2);
  CHECK(jet_mismatch(f, Point(0.3, 1.7)) < 1e-6);
  const TubularChart chart = arc_chart(c, R, 0.3, 1.3, 0.4);
  const ArcSmoothing wide = smooth_arc(f, chart, chart, 0.5, {}, 200000);
  const ArcSmoothing thin = smooth_arc(f, chart, chart, 0.25, {}, 200000);
  MESSAGE("arc: M' wide " << wide.M_prime << ", thin " << thin.M_prime << "; beta " << wide.profile.beta << " / "
                          << thin.profile.beta);
  CHECK(wide.certificate.violations == 0);
  CHECK(thin.certificate.violations == 0);
  CHECK(std::abs(wide.M_prime - thin.M_prime) <= 0.05 * std::max(wide.M_prime, thin.M_prime));

  std::mt19937 rng(7);
  std::uniform_real_distribution<double> s(-0.2, 1.2), t(-1.0, 1.0);
  for (int k = 0; k < 5000; ++k) {
    const Point z = chart.forward(Point(s(rng), t(rng))).value;
    const auto st = chart.inverse(z);
    if (!st || std::abs(st->imag()) >= 0.5 || st->real() < 0 || st->real() > 1) CHECK(wide.g(z).value == f(z).value);
    if (st && std::abs(st->imag()) > 1e-3 && std::abs(std::abs(st->imag()) - wide.profile.beta) > 1e-3 &&
        st->real() > 1e-3 && st->real() < 1 - 1e-3)
      CHECK(jet_mismatch(wide.g, z) < 1e-5);
  }
  // on the arc itself g = f
  for (int k = 1; k < 16; ++k) {
    const Point z = chart.forward(Point(k / 16.0, 0.0)).value;
    CHECK(std::abs(wide.g(z).value - f(z).value) < 1e-12);
  }
  CHECK_THROWS_WITH_AS(smooth_arc(f, chart, chart, 0.0), "neighborhood too thin for charts", Error);
}

TEST_CASE("closed-curve smoothing through a periodic chart") {
  const MapJet f = radial_kink(0.1);
  const TubularChart chart = circle_chart(Point(0, 0), 1.0, 0.3);
  const ArcSmoothing a = smooth_arc(f, chart, chart, 0.8, {}, 200000);
  CHECK(a.certificate.violations == 0);
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> r(0.6, 1.5), th(0, 2 * pi);
  for (int k = 0; k < 5000; ++k) {
    const Point z = std::polar(r(rng), th(rng));
    const auto st = chart.inverse(z);
    if (!st || std::abs(st->imag()) >= a.profile.beta) CHECK(a.g(z).value == f(z).value);
  }
  const GridDomain d = GridDomain::from_predicate(Point(-1.4, -1.4), 2.8 / 256, 256, 256, [](Point z) {
    return std::abs(z) > 0.75 && std::abs(z) < 1.3;
  });
  CHECK(check_injectivity(sample_map(a.g, d)).orientation == Orientation::Positive);
}
