#pragma once

// Explicit smoothing of a piecewise-smooth homeomorphism across an interface:
// a straight segment, a circle, or a regular arc given by tubular charts.
// Maps are closures returning the value and the Jacobian ("jets"), so bounds
// are certified from analytic derivatives rather than finite differences.

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hs/grid.hpp"

namespace hs {

/// [[a, b], [c, d]] = [[u_x, u_y], [v_x, v_y]]
struct Mat2 {
  double a = 1.0, b = 0.0, c = 0.0, d = 1.0;
  double det() const { return a * d - b * c; }
  /// Largest singular value.
  double op_norm() const;
  Mat2 inverse() const;
  Mat2 operator*(const Mat2& o) const;
  /// Multiplication by the complex number w as a real-linear map.
  static Mat2 complex_mul(Complex w) { return {w.real(), -w.imag(), w.imag(), w.real()}; }
};

struct Jet {
  Point value;
  Mat2 D;
};

using MapJet = std::function<Jet(Point)>;

/// Sample a jet closure at the masked nodes of a grid.
GridMapping sample_map(const MapJet& f, const GridDomain& domain);

/// The P1 interpolant of grid data as a jet: the value and the constant
/// gradient of the triangle containing z (NaN off the masked cells).
MapJet interpolate_jet(const GridMapping& h);

/// P1 interpolant of `h` on a grid over the same bounding box with `cells`
/// cells along the longer side. A cell is kept when its center and its four
/// corners lie on masked cells of `h`. Throws when the result is empty or
/// disconnected.
GridMapping resample_mapping(const GridMapping& h, int cells);

/// Nondecreasing smooth cutoff: 0 for t <= 1/3, 1 for t >= 2/3. Built as the
/// mollification of the ramp from 1/3 + eta to 2/3 - eta by a bump of
/// half-width eta, so alpha' <= 3 / (1 - 6 eta).
class CutoffAlpha {
 public:
  explicit CutoffAlpha(double eta = 1.0 / 30.0);
  double eta() const { return eta_; }
  double slope_bound() const { return slope_; }
  double operator()(double t) const;
  double derivative(double t) const;

 private:
  double eta_;
  double a_, b_, slope_;
};

/// Kernel CDF and its antiderivative on [-1, 1] for the unit bump, tabulated
/// once with Gauss quadrature and read back by cubic Hermite interpolation.
double bump_cdf(double z);
double bump_cdf_integral(double z);

struct SmoothingProfile {
  /// max(||Df||_op, 1 / det Df) over the sampled neighbourhood
  double M = 1.0;
  /// strip half-width, V(beta) = {|y| < beta}
  double beta = 0.0;
  CutoffAlpha alpha;
  double x0 = 0.0, x1 = 1.0;
  /// number of halvings of the initial width
  int halvings = 0;
};

struct ProfileOptions {
  int x_samples = 257;
  int y_samples = 64;
  int max_halvings = 40;
  double eta = 1.0 / 30.0;
  /// When set, use this M instead of the sampled one.
  std::optional<double> M;
};

/// Largest beta = beta0 / 2^k meeting the strip conditions on samples of
/// [x0, x1] x (-beta, beta). f must be the identity on the x-axis. Throws
/// CertificationError "profile infeasible: ..." naming the failed condition.
SmoothingProfile fit_profile(const MapJet& f, double x0, double x1, double beta0, const ProfileOptions& opts = {});

/// Sampled intermediate estimates of the strip construction.
struct StripEstimates {
  std::size_t samples = 0;
  double lipschitz_ratio = 0.0;  // max |u - x| / (M |y|)
  double ux_min = INFINITY, ux_max = -INFINITY;
  double uy_max = 0.0;
  double det_uv_min = INFINITY;  // u~_x v_y - u~_y v_x on beta/3 <= |y| < beta
  double vx_max = 0.0;
  double vy_min = INFINITY, vy_max = -INFINITY;
  std::string violation;  // empty when every bound holds
};

class StripSmoothing {
 public:
  StripSmoothing(MapJet f, SmoothingProfile profile);
  const SmoothingProfile& profile() const { return p_; }
  Jet operator()(Point z) const;
  MapJet as_map() const;
  /// Checks the intermediate estimates on an nx x (2 ny) grid over the strip.
  StripEstimates estimates(int nx = 129, int ny = 64) const;

 private:
  MapJet f_;
  SmoothingProfile p_;
};

/// Strip smoothing with certification of the intermediate estimates; throws
/// CertificationError "certification failed at (x, y): ..." on a violation.
StripSmoothing smooth_strip(MapJet f, const SmoothingProfile& profile);

struct BoundCertificate {
  std::size_t samples = 0;
  std::size_t violations = 0;
  double max_op_norm = 0.0;
  double min_det = INFINITY;
  /// max(||Dg||_op, 1 / det Dg)
  double measured_M = 0.0;
  Point worst;
};

/// Sobol samples of the box [lo, hi] (optionally restricted by `inside`);
/// counts samples with ||Dg||_op > K or det Dg < 1 / K.
BoundCertificate certify_bounds(const MapJet& g, Point lo, Point hi, double K, std::size_t samples,
                                const std::function<bool(Point)>& inside = {});

struct CircleSmoothing {
  Point center;
  double radius = 1.0;
  /// half-width of the log-radius strip handed to the strip construction
  double strip_halfwidth = 0.0;
  /// bound measured for f on the annulus
  double M = 1.0;
  SmoothingProfile profile;
  MapJet F;  // conjugated map on the strip
  MapJet G;  // its smoothing
  MapJet g;
};

/// f must be the identity on the circle |z - center| = radius; g differs from
/// f only where |ln(|z - center| / radius)| < beta. Throws "annulus too thick"
/// when halfwidth > ln(2) / 2.
CircleSmoothing smooth_circle(MapJet f, Point center, double radius, double halfwidth,
                              const ProfileOptions& opts = {});

/// Diffeomorphism Phi from (0,1) x (-1,1) (or the cylinder when periodic).
struct TubularChart {
  std::function<Jet(Point)> forward;
  /// (s, t) with s in [0,1) for periodic charts; nullopt off the chart.
  std::function<std::optional<Point>(Point)> inverse;
  bool periodic = false;
  double max_D = 0.0;
  double max_Dinv = 0.0;
  /// max |forward(inverse(p)) - p| over the sampled points
  double roundtrip_error = 0.0;
};

/// a + s (b - a) + t w n with n the left unit normal.
TubularChart segment_chart(Point a, Point b, double half_width);
/// center + (radius - t w) e^{i(theta0 + s (theta1 - theta0))}
TubularChart arc_chart(Point center, double radius, double theta0, double theta1, double half_width);
/// center + radius e^{t log_half_width} e^{2 pi i s}, periodic in s
TubularChart circle_chart(Point center, double radius, double log_half_width);

struct ArcSmoothing {
  SmoothingProfile profile;
  MapJet F;
  MapJet G;
  MapJet g;
  /// measured on the chart image of (0,1) x (-width, width)
  double M_prime = 0.0;
  BoundCertificate certificate;
};

/// F = Psi^-1 o f o Phi must be the identity on (0,1) x {0}. `width` is the
/// chart half-width (in t) of the neighbourhood allowed to change. Throws
/// "neighborhood too thin for charts" when F is undefined on every strip
/// tried.
ArcSmoothing smooth_arc(MapJet f, const TubularChart& gamma, const TubularChart& image, double width,
                        const ProfileOptions& opts = {}, std::size_t certify_samples = 200000);

}  // namespace hs
