#include "hs/acceptance.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numbers>
#include <random>
#include <sstream>

#include "hs/error.hpp"
#include "hs/field.hpp"
#include "hs/fixtures.hpp"
#include "hs/harmonic.hpp"
#include "hs/hopf.hpp"
#include "hs/pipeline.hpp"
#include "hs/smoothing.hpp"

namespace hs {

namespace {

using std::numbers::pi;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

// per-criterion seeds stay independent of which criteria run
std::mt19937 rng_for(unsigned seed, int id) {
  std::seed_seq s{seed, static_cast<unsigned>(id)};
  return std::mt19937(s);
}

NodeSet rect(const GridDomain& d, int i0, int j0, int i1, int j1) {
  NodeSet s(d.node_count());
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i) s.insert(d.index(i, j));
  return s;
}

// 1 ---------------------------------------------------------------------

double annulus_hopf_error(int cells) {
  const GridMapping h = annulus_fixture(cells);
  const GridDomain& d = h.domain();
  const HopfField f = hopf_differential(h);
  const double band = 2.0 * d.spacing();
  double worst = 0.0;
  for (std::size_t n = 0; n < d.node_count(); ++n) {
    if (!f.f_valid[n]) continue;
    const Point z = d.node(n);
    if (std::abs(std::abs(z) - 1.0) <= band) continue;
    const Complex exact = example_annulus_hopf(z);
    worst = std::max(worst, std::abs(f.F[n] - exact) / std::abs(exact));
  }
  return worst;
}

void criterion_annulus(CriterionResult& r, const AcceptanceOptions&) {
  const double e128 = annulus_hopf_error(128), e256 = annulus_hopf_error(256);
  const double ratio = e128 / e256;
  r.pass = e256 <= 0.01 && ratio >= 3.5;
  r.detail = "max rel err 256^2 = " + fmt(e256) + " (<= 0.01), err128/err256 = " + fmt(ratio) + " (>= 3.5)";
}

// 2 ---------------------------------------------------------------------

void criterion_dirichlet(CriterionResult& r, const AcceptanceOptions& opts) {
  std::mt19937 rng = rng_for(opts.seed, 2);
  std::uniform_int_distribution<int> corner(0, 40), extent(8, 23);
  std::normal_distribution<double> g;
  const GridDomain d(Point(0, 0), 1.0 / 64, 64, 64);
  int increases = 0, mismatched = 0;
  double worst_slack = 0.0;
  for (int k = 0; k < 200; ++k) {
    const int i0 = corner(rng), j0 = corner(rng);
    const int i1 = i0 + extent(rng), j1 = j0 + extent(rng);
    const NodeSet region = rect(d, i0, j0, i1, j1);
    const bool harmonic = k % 5 == 0;
    std::array<Complex, 4> c;
    for (auto& x : c) x = Complex(g(rng), g(rng));
    const GridMapping h = GridMapping::sample(d, [&](Point z) {
      // affine plus a real quadratic harmonic polynomial is discrete harmonic on the grid
      if (harmonic) return c[0] * z + c[1] * std::conj(z) + c[2] * (z * z).real();
      return c[0] * z + c[1] * std::sin(3 * z.real()) * z.imag() + c[2] * std::cos(5 * z.imag()) + c[3] * z * z;
    });
    const HarmonicSolve s = poisson_extend(h, region);
    const double slack = s.energy_before - s.energy_after;
    worst_slack = std::min(worst_slack, slack);
    if (slack < -1e-10) ++increases;
    const bool equal = std::abs(slack) <= 1e-10;
    if (equal != harmonic) ++mismatched;
  }
  r.pass = increases == 0 && mismatched == 0;
  r.detail = "200 instances, min(E_before - E_after) = " + fmt(worst_slack) + ", increases " +
             std::to_string(increases) + ", equality/harmonic mismatches " + std::to_string(mismatched);
}

// 3 ---------------------------------------------------------------------

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

// Monotone boundary trace with angular density 1 + amp cos(freq theta + phase);
// the four grid corners land on the target vertices listed in `corners`.
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
    const double w = q[k] + (u - p[k]) / (p[k + 1] - p[k]) * (q[k + 1] - q[k]);
    return along(target, w - std::floor(w));
  });
}

void criterion_rkc(CriterionResult& r, const AcceptanceOptions& opts) {
  std::mt19937 rng = rng_for(opts.seed, 3);
  std::uniform_real_distribution<double> amp(0.0, 0.9), phase(0.0, 2 * pi);
  std::uniform_int_distribution<int> freq(1, 4);
  const GridDomain d(Point(-1, -1), 2.0 / 64, 64, 64);
  Polygon hex;
  for (int k = 0; k < 6; ++k) hex.push_back(std::polar(1.0, 2 * pi * k / 6));
  const Polygon sq = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
  int ok = 0;
  double min_jac = INFINITY;
  for (int k = 0; k < 50; ++k) {
    const Polygon& target = k % 2 ? hex : sq;
    const std::array<int, 4> corners = k % 2 ? std::array<int, 4>{1, 2, 4, 5} : std::array<int, 4>{2, 3, 0, 1};
    const double a = amp(rng);
    const int f = freq(rng);
    const RkcVerdict v =
        rkc_certify(monotone_trace(d, target, a, f, phase(rng), corners), NodeSet::all_masked(d), target);
    ok += v.orientation_uniform && v.min_jacobian > 0.0;
    min_jac = std::min(min_jac, v.min_jacobian);
  }
  r.pass = ok == 50;
  r.detail = std::to_string(ok) + "/50 orientation-uniform, min Jacobian " + fmt(min_jac);
}

// 4 ---------------------------------------------------------------------

void criterion_smoothing(CriterionResult& r, const AcceptanceOptions& opts) {
  const MapJet f = fold_jet(0.1);
  const SmoothingProfile p = fit_profile(f, 0.0, 1.0, 0.25);
  const StripSmoothing s = smooth_strip(f, p);
  const MapJet g = s.as_map();
  const double M = p.M, beta = p.beta;
  const BoundCertificate c = certify_bounds(g, Point(0, -0.5), Point(1, 0.5), 20 * M, 1000000);

  std::mt19937 rng = rng_for(opts.seed, 4);
  std::uniform_real_distribution<double> ux(0.0, 1.0), uy(-0.5, 0.5), ucore(-1.0, 1.0);
  std::size_t outside_bad = 0, core_bad = 0;
  for (int k = 0; k < 100000; ++k) {
    const Point z(ux(rng), uy(rng));
    if (std::abs(z.imag()) >= beta) {
      const Point a = g(z).value, b = f(z).value;
      outside_bad += std::memcmp(&a, &b, sizeof(Point)) != 0;
    }
    const Point w(ux(rng), ucore(rng) * beta / 9);
    core_bad += g(w).value != Point(w.real(), w.imag() / (2 * M));
  }

  const MapJet fk = radial_kink_jet(0.1);
  const CircleSmoothing cs = smooth_circle(fk, Point(0, 0), 1.0, 0.3);
  const double h = cs.strip_halfwidth;
  const BoundCertificate cc = certify_bounds(cs.g, Point(-std::exp(h), -std::exp(h)), Point(std::exp(h), std::exp(h)),
                                             80 * cs.M, 1000000, [&](Point z) {
                                               const double a = std::abs(z);
                                               return a > std::exp(-h) && a < std::exp(h);
                                             });

  r.pass = c.samples == 1000000 && c.violations == 0 && outside_bad == 0 && core_bad == 0 && cc.violations == 0 &&
           cc.samples == 1000000;
  r.detail = "fold: M = " + fmt(M) + ", max|Dg| " + fmt(c.max_op_norm) + ", min det " + fmt(c.min_det) + ", " +
             std::to_string(c.violations) + " violations at 20M; g != f outside beta: " + std::to_string(outside_bad) +
             ", core mismatches: " + std::to_string(core_bad) + "; circle: " + std::to_string(cc.violations) +
             " violations at 80M";
}

// 5 ---------------------------------------------------------------------

void criterion_cutoff(CriterionResult& r, const AcceptanceOptions&) {
  const CutoffAlpha a;
  double max_slope = 0.0;
  std::size_t support_bad = 0;
  const int N = 100000;
  for (int k = 0; k < N; ++k) {
    const double t = -0.5 + 2.0 * k / (N - 1);
    const double v = a(t);
    if (t <= 1.0 / 3.0 && v != 0.0) ++support_bad;
    if (t >= 2.0 / 3.0 && v != 1.0) ++support_bad;
    max_slope = std::max(max_slope, a.derivative(t));
  }
  r.pass = support_bad == 0 && max_slope <= 3.75;
  r.detail = "support violations " + std::to_string(support_bad) + ", max alpha' = " + fmt(max_slope) + " (<= 3.75)";
}

// 6 ---------------------------------------------------------------------

void criterion_pipeline(CriterionResult& r, const AcceptanceOptions&) {
  const GridMapping h = shear_kink_fixture(256);
  const double E0 = dirichlet_energy(h);
  bool pass = true;
  std::ostringstream os;
  for (double eps : {0.4, 0.2, 0.1}) {
    const auto t0 = std::chrono::steady_clock::now();
    PipelineConfig cfg;
    cfg.epsilon = eps;
    cfg.finite_energy = true;
    bool ok = false;
    try {
      const PipelineResult res = run_pipeline(h, cfg);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const PipelineReport& rep = res.report;
      bool inj = rep.injective;
      for (const auto& s : rep.steps) inj = inj && s.injective;
      const double a = difference_norm(res.H, h).royden();
      const double EH = dirichlet_energy(res.H);
      ok = rep.boundary_exact && a <= eps && EH <= E0 + 1e-8 && inj && rep.all_budgets_met() && secs < 600;
      os << "eps " << eps << ": A " << fmt(a) << ", E[H]-E[h] " << fmt(EH - E0) << ", boundary "
         << (rep.boundary_exact ? "exact" : "CHANGED") << ", injective " << (inj ? "yes" : "NO") << ", "
         << fmt(secs) << " s; ";
    } catch (const Error& e) {
      os << "eps " << eps << ": " << e.what() << "; ";
    }
    pass = pass && ok;
  }
  r.pass = pass;
  r.detail = os.str();
  if (r.detail.size() >= 2) r.detail.resize(r.detail.size() - 2);
}

// 7 ---------------------------------------------------------------------

void criterion_dbar(CriterionResult& r, const AcceptanceOptions&) {
  std::vector<double> l1;
  for (int cells : {32, 64, 128}) {
    const GridDomain d(Point(0, 0), 1.0 / cells, cells, cells);
    const GridMapping trace =
        GridMapping::sample(d, [](Point z) { return z + 0.3 * std::conj(z * z) + 0.2 * std::abs(z) * z; });
    const GridMapping h = harmonic_replace(trace, NodeSet::all_masked(d));
    l1.push_back(hopf_differential(h).l1_residual);
  }
  const double r1 = std::log2(l1[0] / l1[1]), r2 = std::log2(l1[1] / l1[2]);
  r.pass = r1 >= 1.0 && r2 >= 1.0;
  r.detail = "dbar l1 " + fmt(l1[0]) + ", " + fmt(l1[1]) + ", " + fmt(l1[2]) + "; rates " + fmt(r1) + ", " + fmt(r2) +
             " (>= 1)";
}

// 8 ---------------------------------------------------------------------

void criterion_energy_comparison(CriterionResult& r, const AcceptanceOptions& opts) {
  std::ostringstream os;
  bool pass = true;
  {
    const GridDomain d(Point(0, 0), 1.0 / 32, 32, 32);
    const GridMapping h = GridMapping::sample(d, [](Point z) { return z + 0.3 * std::conj(z * z) + 0.1 * z * z * z; });
    NodeSet q(d.node_count());
    for (std::size_t n = 0; n < d.node_count(); ++n)
      if (std::abs(d.node(n) - Point(0.5, 0.5)) < 0.35) q.insert(n);
    const EnergyComparison c = energy_comparison(h, h, q, GridMapping::identity(d));
    const double worst = std::max({std::abs(c.slack_direct()), std::abs(c.slack_chain()), std::abs(c.chain)});
    pass = pass && worst <= 1e-8;
    os << "identity slacks " << fmt(worst) << " (<= 1e-8); ";
  }
  {
    const Complex rot = std::polar(1.0, 0.37);
    const Complex a(1.2, 0.1), b(0.3, -0.2);
    auto h_of = [&](Point z) { return a * z + b * std::conj(z); };
    const GridDomain d(Point(0, 0), 1.0 / 32, 32, 32);
    const GridMapping h = GridMapping::sample(d, h_of);
    const GridMapping chi = GridMapping::sample(d, [&](Point z) { return rot * z; });
    const GridDomain D(Point(-1, -0.5), 1.0 / 40, 100, 100);
    const GridMapping H = GridMapping::sample(D, [&](Point w) { return h_of(w / rot); });
    const EnergyComparison c = energy_comparison(h, H, NodeSet::all_masked(d), chi);
    const double gap = std::abs(c.direct - c.substitution);
    pass = pass && gap <= 1e-6;
    os << "rotation |direct - substitution| " << fmt(gap) << " (<= 1e-6); ";
  }
  std::mt19937 rng = rng_for(opts.seed, 8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const GridDomain d(Point(0, 0), 1.0 / 64, 64, 64);
  int chain_ok = 0;
  double worst = -INFINITY;
  for (int k = 0; k < 20; ++k) {
    const Complex c(u(rng), u(rng));
    const double fx = 1 + (k % 3), fy = 1 + (k % 2);
    const GridMapping h = GridMapping::sample(d, [&](Point z) {
      return z + 0.04 * c * std::sin(pi * fx * z.real()) * std::sin(pi * fy * z.imag());
    });
    const GridMapping H = harmonic_replace(h, NodeSet::all_masked(d));
    const InverseComposition ic = compose_inverse(H, h);
    NodeSet q(d.node_count());
    for (std::size_t n = 0; n < d.node_count(); ++n)
      if (ic.valid[n]) q.insert(n);
    try {
      const EnergyComparison e = energy_comparison(h, H, q, ic.chi);
      const double excess = e.chain - (e.substitution - e.energy_h);
      worst = std::max(worst, excess);
      chain_ok += excess <= 1e-6;
    } catch (const Error&) {
    }
  }
  pass = pass && chain_ok == 20;
  os << "chain bound " << chain_ok << "/20, max (c) - [(b) - E[h]] = " << fmt(worst);
  r.pass = pass;
  r.detail = os.str();
}

// 9 ---------------------------------------------------------------------

void criterion_case0(CriterionResult& r, const AcceptanceOptions& opts) {
  std::mt19937 rng = rng_for(opts.seed, 9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const GridDomain d(Point(-0.5, -0.5), 1.0 / 64, 64, 64);
  int ok = 0;
  double worst = -INFINITY;
  for (int k = 0; k < 20; ++k) {
    const Complex a = 0.3 * Complex(u(rng), u(rng)), b = 0.2 * Complex(u(rng), u(rng)),
                  c = 0.2 * Complex(u(rng), u(rng));
    const GridMapping h =
        GridMapping::sample(d, [&](Point z) { return z + a * std::conj(z) + b * z * z + c * std::conj(z * z) / 2.0; });
    const Case0Report rep = case0_check(h);
    worst = std::max(worst, rep.positive_gap);
    ok += rep.negative == 0 && rep.positive > 0 && rep.positive_gap <= 1e-12 + d.spacing();
  }
  r.pass = ok == 20;
  r.detail = std::to_string(ok) + "/20 fixtures, max(|h_zbar|^2 - |F|) = " + fmt(worst) + " (<= 1e-12 + " +
             fmt(d.spacing()) + ")";
}

struct Criterion {
  const char* name;
  double limit;
  void (*run)(CriterionResult&, const AcceptanceOptions&);
};

const std::array<Criterion, kCriterionCount> kCriteria = {{
    {"annulus Hopf field", 10.0, criterion_annulus},
    {"Dirichlet principle", 30.0, criterion_dirichlet},
    {"RKC suite", 60.0, criterion_rkc},
    {"smoothing bounds", 60.0, criterion_smoothing},
    {"cutoff alpha", 0.0, criterion_cutoff},
    {"end-to-end pipeline", 1800.0, criterion_pipeline},
    {"dbar convergence", 0.0, criterion_dbar},
    {"composed-energy identity", 0.0, criterion_energy_comparison},
    {"case 0 inequality", 0.0, criterion_case0},
}};

}  // namespace

CriterionResult run_criterion(int id, const AcceptanceOptions& opts) {
  if (id < 1 || id > kCriterionCount) throw Error("no acceptance criterion " + std::to_string(id));
  const Criterion& c = kCriteria[id - 1];
  CriterionResult r;
  r.id = id;
  r.name = c.name;
  r.limit_seconds = c.limit;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    c.run(r, opts);
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail = std::string("error: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (r.limit_seconds > 0 && r.seconds >= r.limit_seconds) {
    r.pass = false;
    r.detail += " [over time limit " + fmt(r.limit_seconds) + " s]";
  }
  return r;
}

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts,
                                            const std::function<void(const CriterionResult&)>& progress) {
  std::vector<int> ids = opts.only;
  if (ids.empty())
    for (int k = 1; k <= kCriterionCount; ++k) ids.push_back(k);
  std::vector<CriterionResult> out;
  for (int id : ids) {
    out.push_back(run_criterion(id, opts));
    if (progress) progress(out.back());
  }
  return out;
}

std::string format_result(const CriterionResult& r) {
  std::ostringstream os;
  os << (r.pass ? "[PASS] " : "[FAIL] ") << r.id << ' ' << r.name << ": " << r.detail << " (";
  os.precision(3);
  os << r.seconds << " s)";
  return os.str();
}

}  // namespace hs
