#include "hs/smoothing.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/random/sobol.hpp>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>

#include "hs/error.hpp"
#include "hs/parallel.hpp"

namespace hs {

using std::numbers::pi;

double Mat2::op_norm() const {
  const double s = a * a + b * b + c * c + d * d;
  const double dt = det();
  return std::sqrt(0.5 * (s + std::sqrt(std::max(0.0, s * s - 4.0 * dt * dt))));
}

Mat2 Mat2::inverse() const {
  const double dt = det();
  return {d / dt, -b / dt, -c / dt, a / dt};
}

Mat2 Mat2::operator*(const Mat2& o) const {
  return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
}

GridMapping sample_map(const MapJet& f, const GridDomain& domain) {
  GridMapping out(domain);
  parallel_for(domain.node_count(), [&](std::size_t b, std::size_t e) {
    for (std::size_t n = b; n < e; ++n)
      if (domain.node_masked(n)) out[n] = f(domain.node(n)).value;
  });
  return out;
}

MapJet interpolate_jet(const GridMapping& h) {
  auto data = std::make_shared<const GridMapping>(h);
  return [data](Point z) -> Jet {
    const GridMapping& g = *data;
    const GridDomain& d = g.domain();
    const double s = d.spacing();
    const double px = (z.real() - d.origin().real()) / s, py = (z.imag() - d.origin().imag()) / s;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const Jet none{Point(nan, nan), {nan, nan, nan, nan}};
    if (!(px >= 0.0 && py >= 0.0 && px <= d.cells_x() && py <= d.cells_y())) return none;
    const int i = std::min(static_cast<int>(px), d.cells_x() - 1);
    const int j = std::min(static_cast<int>(py), d.cells_y() - 1);
    if (!d.cell(i, j)) return none;
    const double fx = px - i, fy = py - j;
    const Complex a = g.at(i, j), c = g.at(i + 1, j + 1);
    Complex dx, dy, v;
    if (fx >= fy) {
      const Complex b = g.at(i + 1, j);
      v = a + fx * (b - a) + fy * (c - b);
      dx = (b - a) / s;
      dy = (c - b) / s;
    } else {
      const Complex u = g.at(i, j + 1);
      v = a + fy * (u - a) + fx * (c - u);
      dx = (c - u) / s;
      dy = (u - a) / s;
    }
    return {v, {dx.real(), dy.real(), dx.imag(), dy.imag()}};
  };
}

GridMapping resample_mapping(const GridMapping& h, int cells) {
  if (cells < 2) throw Error("resolution must be at least 2");
  const GridDomain& src = h.domain();
  const double wx = src.cells_x() * src.spacing(), wy = src.cells_y() * src.spacing();
  const double s = std::max(wx, wy) / cells;
  const int cx = std::max(1, static_cast<int>(std::lround(wx / s))), cy = std::max(1, static_cast<int>(std::lround(wy / s)));
  const MapJet f = interpolate_jet(h);
  auto defined = [&](Point p) { return std::isfinite(f(p).value.real()); };
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(cx) * cy, 0);
  const Point o = src.origin();
  for (int j = 0; j < cy; ++j)
    for (int i = 0; i < cx; ++i) {
      bool ok = defined(o + Point((i + 0.5) * s, (j + 0.5) * s));
      for (int c = 0; ok && c < 4; ++c) ok = defined(o + Point((i + c % 2) * s, (j + c / 2) * s));
      mask[static_cast<std::size_t>(j) * cx + i] = ok;
    }
  GridDomain d(o, s, cx + 1, cy + 1, std::move(mask));
  if (d.masked_cell_count() == 0) throw Error("resampled grid is empty");
  d.validate();
  GridMapping out(d);
  for (std::size_t n = 0; n < d.node_count(); ++n)
    if (d.node_masked(n)) out[n] = f(d.node(n)).value;
  return out;
}

namespace {

struct BumpTable {
  static constexpr int N = 4096;
  double h = 2.0 / N;
  std::vector<double> phi, cdf, integral;

  static double bump(double z) { return std::abs(z) >= 1.0 ? 0.0 : std::exp(-1.0 / (1.0 - z * z)); }

  BumpTable() : phi(N + 1), cdf(N + 1), integral(N + 1) {
    using Q = boost::math::quadrature::gauss<double, 64>;
    std::vector<double> mass(N), moment(N);
    for (int k = 0; k < N; ++k) {
      const double lo = -1.0 + k * h, hi = lo + h;
      mass[k] = Q::integrate(bump, lo, hi);
      moment[k] = Q::integrate([](double w) { return w * bump(w); }, lo, hi);
    }
    // symmetric normalisation so that cdf(0) = 1/2 and cdf(1) = 1 exactly
    double total = 0.0;
    for (int k = 0; k < N; ++k) total += mass[k];
    const std::vector<double> m0 = mass, w0 = moment;
    for (int k = 0; k < N; ++k) {
      mass[k] = 0.5 * (m0[k] + m0[N - 1 - k]) / total;
      moment[k] = 0.5 * (w0[k] - w0[N - 1 - k]) / total;
    }
    double m = 0.0, w = 0.0;
    for (int k = 0; k <= N; ++k) {
      const double z = -1.0 + k * h;
      phi[k] = bump(z) / total;
      cdf[k] = m;
      integral[k] = z * m - w + m;  // int_{-1}^z cdf = (z + 1) cdf - int (w + 1) phi
      if (k < N) {
        m += mass[k];
        w += moment[k] + mass[k];
      }
    }
    cdf[N] = 1.0;
    integral[N] = 1.0;
  }

  // cubic Hermite on nondecreasing data; in the far tails of the bump the
  // slopes are limited (Fritsch-Carlson) so the interpolant stays monotone
  static double hermite(double y0, double y1, double d0, double d1, double h, double tau) {
    const double m = (y1 - y0) / h;
    if (m <= 0.0) return y0;
    const double r = std::hypot(d0 / m, d1 / m);
    if (r > 3.0) {
      d0 *= 3.0 / r;
      d1 *= 3.0 / r;
    }
    const double t2 = tau * tau, t3 = t2 * tau;
    const double v = (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + tau) * h * d0 + (-2 * t3 + 3 * t2) * y1 +
                     (t3 - t2) * h * d1;
    return std::clamp(v, y0, y1);
  }

  double eval_cdf(double z) const {
    if (z <= -1.0) return 0.0;
    if (z >= 1.0) return 1.0;
    const double f = (z + 1.0) / h;
    const int k = std::min(N - 1, static_cast<int>(f));
    return hermite(cdf[k], cdf[k + 1], phi[k], phi[k + 1], h, f - k);
  }

  double eval_integral(double z) const {
    if (z <= -1.0) return 0.0;
    if (z >= 1.0) return z;
    const double f = (z + 1.0) / h;
    const int k = std::min(N - 1, static_cast<int>(f));
    return hermite(integral[k], integral[k + 1], cdf[k], cdf[k + 1], h, f - k);
  }
};

const BumpTable& bump_table() {
  static const BumpTable t;
  return t;
}

std::string where(Point z) {
  std::ostringstream os;
  os.precision(6);
  os << "(" << z.real() << ", " << z.imag() << ")";
  return os.str();
}

bool finite_jet(const Jet& j) {
  return std::isfinite(j.value.real()) && std::isfinite(j.value.imag()) && std::isfinite(j.D.a) &&
         std::isfinite(j.D.b) && std::isfinite(j.D.c) && std::isfinite(j.D.d);
}

Jet nan_jet() {
  const double n = std::numeric_limits<double>::quiet_NaN();
  return {Point(n, n), {n, n, n, n}};
}

}  // namespace

double bump_cdf(double z) { return bump_table().eval_cdf(z); }
double bump_cdf_integral(double z) { return bump_table().eval_integral(z); }

CutoffAlpha::CutoffAlpha(double eta) : eta_(eta) {
  if (!(eta > 0.0)) throw Error("eta must be positive");
  if (eta > 1.0 / 24.0) throw Error("slope bound unattainable");
  a_ = 1.0 / 3.0 + eta;
  b_ = 2.0 / 3.0 - eta;
  slope_ = 3.0 / (1.0 - 6.0 * eta);
}

double CutoffAlpha::operator()(double t) const {
  if (t <= 1.0 / 3.0) return 0.0;
  if (t >= 2.0 / 3.0) return 1.0;
  // symmetric about t = 1/2; evaluating the upper half by reflection avoids
  // cancellation near 1
  if (t > 0.5) return 1.0 - (*this)(1.0 - t);
  const BumpTable& tb = bump_table();
  const double v = slope_ * eta_ * (tb.eval_integral((t - a_) / eta_) - tb.eval_integral((t - b_) / eta_));
  return std::clamp(v, 0.0, 1.0);
}

double CutoffAlpha::derivative(double t) const {
  if (t <= 1.0 / 3.0 || t >= 2.0 / 3.0) return 0.0;
  if (t > 0.5) return derivative(1.0 - t);
  const BumpTable& tb = bump_table();
  return std::max(0.0, slope_ * (tb.eval_cdf((t - a_) / eta_) - tb.eval_cdf((t - b_) / eta_)));
}

// ---------------------------------------------------------------------------
// Strip

namespace {

std::vector<double> strip_offsets(double beta, int ny) {
  std::vector<double> ys;
  for (int j = 1; j < ny; ++j) {
    ys.push_back(beta * j / ny);
    ys.push_back(-beta * j / ny);
  }
  // one-sided limits at both edges of the strip
  for (double e : {1.0 - 1e-9, 1e-9}) {
    ys.push_back(beta * e);
    ys.push_back(-beta * e);
  }
  return ys;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) xs[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return xs;
}

}  // namespace

SmoothingProfile fit_profile(const MapJet& f, double x0, double x1, double beta0, const ProfileOptions& opts) {
  if (!(beta0 > 0.0) || !(x1 > x0)) throw Error("invalid strip");
  const auto xs = linspace(x0, x1, opts.x_samples);
  for (double x : xs) {
    const Jet j = f(Point(x, 0.0));
    if (!(std::abs(j.value - Point(x, 0.0)) <= 1e-9 * std::max(1.0, std::abs(x))))
      throw CertificationError("profile infeasible: f is not the identity on the interface at " + where(Point(x, 0)));
  }

  SmoothingProfile p;
  p.alpha = CutoffAlpha(opts.eta);
  p.x0 = x0;
  p.x1 = x1;

  const auto ys0 = strip_offsets(beta0, opts.y_samples);
  double M = 0.0;
  for (double x : xs)
    for (double y : ys0) {
      const Jet j = f(Point(x, y));
      const double dt = j.D.det();
      if (!finite_jet(j) || !(dt > 0.0))
        throw CertificationError("profile infeasible: det Df > 0 fails at " + where(Point(x, y)));
      M = std::max({M, j.D.op_norm(), 1.0 / dt});
    }
  p.M = opts.M ? *opts.M : M;
  const double Mv = p.M;

  std::string failed;
  for (int k = 0; k <= opts.max_halvings; ++k) {
    const double beta = std::ldexp(beta0, -k);
    failed.clear();
    for (double x : xs) {
      for (double y : strip_offsets(beta, opts.y_samples)) {
        const Jet j = f(Point(x, y));
        const double u = j.value.real(), v = j.value.imag();
        const double tol = 1e-12;
        const bool tiny = std::abs(y) < 1e-6 * beta;
        const double sgy = y > 0 ? 1.0 : -1.0;
        const double slack = 1e-12 * std::max({1.0, std::abs(x), std::abs(u)});
        if (!finite_jet(j))
          failed = "f undefined";
        else if (std::abs(j.D.c) > (1 + tol) / (50.0 * Mv * Mv))
          failed = "|v_x| <= 1/(50M^2)";
        else if (std::abs(j.D.a - 1.0) > 0.1 * (1 + tol))
          failed = "|u_x - 1| <= 1/10";
        // the ratios are ill-conditioned at the interface; check them away
        // from it, with an absolute slack for roundoff in u and v
        else if (!tiny && (sgy * v < sgy * y * (1 - tol) / (2.0 * Mv) - slack ||
                           sgy * v > sgy * y * Mv * (1 + tol) + slack))
          failed = "1/(2M) <= v/y <= M";
        else if (!tiny && std::abs(u - x) > Mv * std::abs(y) * (1 + tol) + slack)
          failed = "|u - x| <= M|y|";
        if (!failed.empty()) break;
      }
      if (!failed.empty()) break;
    }
    if (failed.empty()) {
      p.beta = beta;
      p.halvings = k;
      return p;
    }
  }
  throw CertificationError("profile infeasible: " + failed);
}

StripSmoothing::StripSmoothing(MapJet f, SmoothingProfile profile) : f_(std::move(f)), p_(std::move(profile)) {}

Jet StripSmoothing::operator()(Point z) const {
  const double x = z.real(), y = z.imag(), beta = p_.beta, M = p_.M;
  const double ay = std::abs(y);
  if (ay >= beta) return f_(z);
  if (ay <= beta / 9.0) return {Point(x, y / (2.0 * M)), {1.0, 0.0, 0.0, 1.0 / (2.0 * M)}};
  const double sg = y > 0 ? 1.0 : -1.0;
  const double t = ay / beta, s = 3.0 * ay / beta;
  const double at = p_.alpha(t), dat = p_.alpha.derivative(t);
  const double as = p_.alpha(s), das = p_.alpha.derivative(s);
  const Jet fj = f_(z);
  const double u = fj.value.real(), v = fj.value.imag();
  const Mat2& D = fj.D;
  Jet g;
  const double lin = y / (2.0 * M);
  g.value = Point(x + at * (u - x), lin + as * (v - lin));
  g.D.a = 1.0 + at * (D.a - 1.0);
  g.D.b = dat * sg / beta * (u - x) + at * D.b;
  g.D.c = as * D.c;
  g.D.d = das * 3.0 * sg / beta * (v - y / (2.0 * M)) + as * D.d + (1.0 - as) / (2.0 * M);
  return g;
}

MapJet StripSmoothing::as_map() const {
  return [self = *this](Point z) { return self(z); };
}

StripEstimates StripSmoothing::estimates(int nx, int ny) const {
  StripEstimates e;
  const double M = p_.M, beta = p_.beta;
  const double tol = 1e-12;
  for (double x : linspace(p_.x0, p_.x1, nx))
    for (double y : strip_offsets(beta, ny)) {
      const Point z(x, y);
      const Jet fj = f_(z);
      const Jet g = (*this)(z);
      ++e.samples;
      const double ratio = std::abs(y) < 1e-6 * beta ? 0.0 : std::abs(fj.value.real() - x) / (M * std::abs(y));
      e.lipschitz_ratio = std::max(e.lipschitz_ratio, ratio);
      // u~ with the unmodified v
      const double ux = g.D.a, uy = g.D.b;
      e.ux_min = std::min(e.ux_min, ux);
      e.ux_max = std::max(e.ux_max, ux);
      e.uy_max = std::max(e.uy_max, std::abs(uy));
      std::string bad;
      if (ratio > 1 + tol) bad = "|u - x| <= M|y|";
      else if (ux < 0.8 - tol || ux > 1.2 + tol) bad = "8/10 <= u~_x <= 12/10";
      else if (std::abs(uy) > 5 * M * (1 + tol)) bad = "|u~_y| <= 5M";
      if (std::abs(y) >= beta / 3.0) {
        const double det = ux * fj.D.d - uy * fj.D.c;
        e.det_uv_min = std::min(e.det_uv_min, det);
        if (bad.empty() && det < 3.0 / (10.0 * M) * (1 - tol)) bad = "u~_x v_y - u~_y v_x >= 3/(10M)";
      } else {
        e.vx_max = std::max(e.vx_max, std::abs(g.D.c));
        e.vy_min = std::min(e.vy_min, g.D.d);
        e.vy_max = std::max(e.vy_max, g.D.d);
        if (bad.empty() && std::abs(g.D.c) >= 1.5 * M) bad = "|v~_x| < 3M/2";
        else if (bad.empty() && (g.D.d < 1.0 / (2.0 * M) * (1 - tol) || g.D.d > 5 * M * (1 + tol)))
          bad = "1/(2M) <= v~_y <= 5M";
      }
      if (!bad.empty() && e.violation.empty()) e.violation = bad + " at " + where(z);
    }
  return e;
}

StripSmoothing smooth_strip(MapJet f, const SmoothingProfile& profile) {
  StripSmoothing s(std::move(f), profile);
  const StripEstimates e = s.estimates();
  if (!e.violation.empty()) throw CertificationError("certification failed: " + e.violation);
  return s;
}

BoundCertificate certify_bounds(const MapJet& g, Point lo, Point hi, double K, std::size_t samples,
                                const std::function<bool(Point)>& inside) {
  std::vector<Point> pts;
  pts.reserve(samples);
  boost::random::sobol gen(2);
  const double scale = 0x1p-64;
  while (pts.size() < samples) {
    const double a = static_cast<double>(gen()) * scale, b = static_cast<double>(gen()) * scale;
    const Point p(lo.real() + a * (hi.real() - lo.real()), lo.imag() + b * (hi.imag() - lo.imag()));
    if (!inside || inside(p)) pts.push_back(p);
  }
  const unsigned W = worker_count();
  std::vector<BoundCertificate> part(W);
  std::vector<double> worst_val(W, 0.0);
  const std::size_t chunk = (pts.size() + W - 1) / W;
  parallel_for(W, [&](std::size_t b, std::size_t e) {
    for (std::size_t w = b; w < e; ++w) {
      BoundCertificate& c = part[w];
      for (std::size_t k = w * chunk; k < std::min(pts.size(), (w + 1) * chunk); ++k) {
        const Jet j = g(pts[k]);
        const double op = j.D.op_norm(), dt = j.D.det();
        ++c.samples;
        c.max_op_norm = std::max(c.max_op_norm, op);
        c.min_det = std::min(c.min_det, dt);
        const double m = dt > 0 ? std::max(op, 1.0 / dt) : INFINITY;
        if (!(m <= c.measured_M)) {
          c.measured_M = m;
          c.worst = pts[k];
        }
        if (!(op <= K) || !(dt >= 1.0 / K)) ++c.violations;
      }
    }
  });
  BoundCertificate out;
  for (const auto& c : part) {
    out.samples += c.samples;
    out.violations += c.violations;
    out.max_op_norm = std::max(out.max_op_norm, c.max_op_norm);
    out.min_det = std::min(out.min_det, c.min_det);
    if (c.measured_M > out.measured_M) {
      out.measured_M = c.measured_M;
      out.worst = c.worst;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Circle

namespace {

const Complex kI(0.0, 1.0);

}  // namespace

CircleSmoothing smooth_circle(MapJet f, Point center, double radius, double halfwidth, const ProfileOptions& opts) {
  if (!(radius > 0.0) || !(halfwidth > 0.0)) throw Error("invalid circle");
  if (halfwidth > std::log(2.0) / 2.0) throw Error("annulus too thick");
  CircleSmoothing out;
  out.center = center;
  out.radius = radius;
  out.strip_halfwidth = halfwidth;

  double M = 0.0;
  for (double x : linspace(0.0, 2 * pi, opts.x_samples))
    for (double y : strip_offsets(halfwidth, opts.y_samples)) {
      const Jet j = f(center + radius * std::exp(-y) * std::polar(1.0, x));
      const double dt = j.D.det();
      if (!(dt > 0.0)) throw CertificationError("profile infeasible: det Df > 0 fails");
      M = std::max({M, j.D.op_norm(), 1.0 / dt});
    }
  out.M = M;

  out.F = [f, center, radius](Point zeta) -> Jet {
    const double x = zeta.real(), y = zeta.imag();
    const Complex p = std::exp(kI * zeta);
    const Jet fj = f(center + radius * p);
    const Complex fw = (fj.value - center) / radius;
    if (fw == Complex(0.0)) return nan_jet();
    Jet r;
    r.value = Point(std::arg(fw * std::polar(1.0, -x)) + x, -std::log(std::abs(fw)));
    r.D = Mat2::complex_mul(1.0 / (kI * fw)) * fj.D * Mat2::complex_mul(kI * p);
    (void)y;
    return r;
  };
  out.profile = fit_profile(out.F, 0.0, 2 * pi, halfwidth, opts);
  const StripSmoothing G = smooth_strip(out.F, out.profile);
  out.G = G.as_map();
  const double beta = out.profile.beta;
  out.g = [f, G, center, radius, beta](Point z) -> Jet {
    const Complex w = (z - center) / radius;
    if (w == Complex(0.0)) return f(z);
    const double y = -std::log(std::abs(w));
    if (std::abs(y) >= beta) return f(z);
    const Jet gj = G(Point(std::arg(w), y));
    const Complex q = std::exp(kI * gj.value);
    Jet r;
    r.value = center + radius * q;
    r.D = Mat2::complex_mul(kI * q) * gj.D * Mat2::complex_mul(1.0 / (kI * w));
    return r;
  };
  return out;
}

// ---------------------------------------------------------------------------
// Charts

namespace {

constexpr double kChartExtension = 0.25;

void measure_chart(TubularChart& c) {
  c.max_D = 0.0;
  c.max_Dinv = 0.0;
  c.roundtrip_error = 0.0;
  for (int i = 0; i <= 64; ++i)
    for (int j = 1; j < 64; ++j) {
      const Point q(i / 64.0, -1.0 + 2.0 * j / 64.0);
      const Jet fj = c.forward(q);
      c.max_D = std::max(c.max_D, fj.D.op_norm());
      c.max_Dinv = std::max(c.max_Dinv, fj.D.inverse().op_norm());
      const auto back = c.inverse(fj.value);
      if (!back) {
        c.roundtrip_error = INFINITY;
        continue;
      }
      c.roundtrip_error = std::max(c.roundtrip_error, std::abs(c.forward(*back).value - fj.value));
    }
}

bool in_chart(double s, double t) {
  return s > -kChartExtension && s < 1.0 + kChartExtension && std::abs(t) < 1.0;
}

}  // namespace

TubularChart segment_chart(Point a, Point b, double w) {
  if (a == b || !(w > 0.0)) throw Error("degenerate chart");
  const Complex e = b - a;
  const Complex n = kI * e / std::abs(e);
  TubularChart c;
  c.forward = [a, e, n, w](Point q) -> Jet {
    return {a + q.real() * e + q.imag() * w * n, {e.real(), w * n.real(), e.imag(), w * n.imag()}};
  };
  c.inverse = [a, e, n, w](Point p) -> std::optional<Point> {
    const Complex d = p - a;
    const double s = (d * std::conj(e)).real() / std::norm(e);
    const double t = (d * std::conj(n)).real() / w;
    if (!in_chart(s, t)) return std::nullopt;
    return Point(s, t);
  };
  measure_chart(c);
  return c;
}

TubularChart arc_chart(Point center, double R, double th0, double th1, double w) {
  if (!(R > 0.0) || !(w > 0.0) || w >= R || th0 == th1) throw Error("degenerate chart");
  const double dth = th1 - th0, mid = 0.5 * (th0 + th1);
  TubularChart c;
  c.forward = [=](Point q) -> Jet {
    const Complex e = std::polar(1.0, th0 + q.real() * dth);
    const double rho = R - q.imag() * w;
    const Complex ds = rho * dth * kI * e, dt = -w * e;
    return {center + rho * e, {ds.real(), dt.real(), ds.imag(), dt.imag()}};
  };
  c.inverse = [=](Point p) -> std::optional<Point> {
    const Complex d = p - center;
    const double t = (R - std::abs(d)) / w;
    const double s = 0.5 + std::remainder(std::arg(d) - mid, 2 * pi) / dth;
    if (!in_chart(s, t)) return std::nullopt;
    return Point(s, t);
  };
  measure_chart(c);
  return c;
}

TubularChart circle_chart(Point center, double r, double L) {
  if (!(r > 0.0) || !(L > 0.0)) throw Error("degenerate chart");
  TubularChart c;
  c.periodic = true;
  c.forward = [=](Point q) -> Jet {
    const Complex v = r * std::exp(-q.imag() * L) * std::polar(1.0, 2 * pi * q.real());
    const Complex ds = 2 * pi * kI * v, dt = -L * v;
    return {center + v, {ds.real(), dt.real(), ds.imag(), dt.imag()}};
  };
  c.inverse = [=](Point p) -> std::optional<Point> {
    const Complex d = p - center;
    if (d == Complex(0.0)) return std::nullopt;
    const double t = -std::log(std::abs(d) / r) / L;
    double s = std::arg(d) / (2 * pi);
    if (s < 0) s += 1.0;
    if (s >= 1.0) s -= 1.0;
    if (!(std::abs(t) < 1.0)) return std::nullopt;
    return Point(s, t);
  };
  measure_chart(c);
  return c;
}

ArcSmoothing smooth_arc(MapJet f, const TubularChart& gamma, const TubularChart& image, double width,
                        const ProfileOptions& opts, std::size_t certify_samples) {
  if (!(width > 0.0) || width > 1.0) throw Error("neighborhood too thin for charts");
  ArcSmoothing out;
  const bool periodic = gamma.periodic;
  out.F = [f, gamma, image, periodic](Point q) -> Jet {
    const Jet pj = gamma.forward(q);
    const Jet fj = f(pj.value);
    const auto st = image.inverse(fj.value);
    if (!st) return nan_jet();
    Point val = *st;
    if (periodic) val = Point(q.real() + std::remainder(val.real() - q.real(), 1.0), val.imag());
    const Jet psi = image.forward(*st);
    return {val, psi.D.inverse() * fj.D * pj.D};
  };

  // shrink the starting strip until F is defined on all of it
  double beta0 = width;
  const auto xs = linspace(0.0, 1.0, opts.x_samples);
  bool ok = false;
  for (int k = 0; k <= opts.max_halvings && !ok; ++k) {
    beta0 = std::ldexp(width, -k);
    ok = true;
    for (double x : xs) {
      for (double y : strip_offsets(beta0, opts.y_samples))
        if (!finite_jet(out.F(Point(x, y)))) {
          ok = false;
          break;
        }
      if (!ok) break;
    }
  }
  if (!ok) throw Error("neighborhood too thin for charts");

  out.profile = fit_profile(out.F, 0.0, 1.0, beta0, opts);
  const StripSmoothing G = smooth_strip(out.F, out.profile);
  out.G = G.as_map();
  const double beta = out.profile.beta;
  out.g = [f, G, gamma, image, beta, periodic](Point p) -> Jet {
    const auto st = gamma.inverse(p);
    if (!st || std::abs(st->imag()) >= beta) return f(p);
    if (!periodic && (st->real() < 0.0 || st->real() > 1.0)) return f(p);
    const Jet gj = G(*st);
    const Jet psi = image.forward(gj.value);
    const Jet phi = gamma.forward(*st);
    return {psi.value, psi.D * gj.D * phi.D.inverse()};
  };

  // measured constant on the chart image of (0,1) x (-width, width)
  double x0 = INFINITY, y0 = INFINITY, x1 = -INFINITY, y1 = -INFINITY;
  for (int i = 0; i <= 64; ++i)
    for (int j = 0; j <= 16; ++j) {
      const Point p = gamma.forward(Point(i / 64.0, width * (-1.0 + j / 8.0))).value;
      x0 = std::min(x0, p.real());
      x1 = std::max(x1, p.real());
      y0 = std::min(y0, p.imag());
      y1 = std::max(y1, p.imag());
    }
  const double K = 20.0 * out.profile.M * image.max_D * gamma.max_Dinv;
  out.certificate = certify_bounds(out.g, Point(x0, y0), Point(x1, y1), K, certify_samples, [&](Point p) {
    const auto st = gamma.inverse(p);
    return st && std::abs(st->imag()) < width && st->real() > 0.0 && st->real() < 1.0;
  });
  out.M_prime = out.certificate.measured_M;
  return out;
}

}  // namespace hs
