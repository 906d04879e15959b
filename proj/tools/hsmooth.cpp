#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "hs/acceptance.hpp"
#include "hs/error.hpp"
#include "hs/field.hpp"
#include "hs/fixtures.hpp"
#include "hs/hopf.hpp"
#include "hs/io.hpp"
#include "hs/parallel.hpp"
#include "hs/pipeline.hpp"
#include "hs/smoothing.hpp"

using namespace hs;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFormat = 2;
constexpr int kExitCertification = 3;
constexpr int kExitStep = 4;

std::vector<double> parse_numbers(const std::string& s, std::size_t count, const char* what) {
  std::vector<double> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw FormatError(std::string("bad number in ") + what + ": '" + item + "'");
    }
  }
  if (out.size() != count)
    throw FormatError(std::string(what) + " needs " + std::to_string(count) + " comma-separated numbers");
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json budget_line(double measured, double bound) {
  return {{"measured", measured}, {"bound", bound}, {"pass", measured <= bound}};
}

// ---- energy ----

struct EnergyArgs {
  std::string input;
  std::vector<std::string> regions;
  std::string csv;
};

int cmd_energy(const EnergyArgs& a) {
  const GridMapping h = read_mapping(a.input);
  const GridDomain& d = h.domain();
  std::vector<int> labels(d.cell_count(), -1);
  for (std::size_t r = 0; r < a.regions.size(); ++r) {
    const auto v = parse_numbers(a.regions[r], 4, "--region");
    for (int j = 0; j < d.cells_y(); ++j)
      for (int i = 0; i < d.cells_x(); ++i) {
        const Point c = d.node(i, j) + Point(0.5, 0.5) * d.spacing();
        if (labels[static_cast<std::size_t>(j) * d.cells_x() + i] < 0 && c.real() >= v[0] && c.real() <= v[2] &&
            c.imag() >= v[1] && c.imag() <= v[3])
          labels[static_cast<std::size_t>(j) * d.cells_x() + i] = static_cast<int>(r);
      }
  }
  const EnergyReport e = royden_norm(h, labels);
  std::cout.precision(12);
  std::cout << "total energy: " << e.total << "\n";
  std::ostringstream csv;
  csv.precision(17);
  csv << "region,energy\n" << "total," << e.total << "\n";
  for (std::size_t r = 0; r < a.regions.size(); ++r) {
    const auto it = e.per_region.find(static_cast<int>(r));
    const double v = it == e.per_region.end() ? 0.0 : it->second;
    std::cout << "region " << r << " [" << a.regions[r] << "]: " << v << "\n";
    csv << r << ',' << v << "\n";
  }
  std::cout << "sup norm: " << e.sup_norm << "\n"
            << "gradient L2: " << e.grad_l2 << "\n"
            << "Royden norm: " << e.royden << "\n";
  if (!a.csv.empty()) write_text_atomic(a.csv, csv.str());
  return kExitOk;
}

// ---- hopf ----

struct HopfArgs {
  std::string input;
  std::string norm = "l1";
  double band = 0.0;
  std::string circle;
  std::string segment;
  std::string csv;
  bool annulus = false;
};

double segment_distance(Point p, Point a, Point b) {
  const Point ab = b - a;
  const double t = std::clamp(std::real((p - a) * std::conj(ab)) / std::norm(ab), 0.0, 1.0);
  return std::abs(p - (a + t * ab));
}

int cmd_hopf(const HopfArgs& a) {
  const GridMapping h = read_mapping(a.input);
  const GridDomain& d = h.domain();
  std::vector<std::uint8_t> exclude(d.node_count(), 0);
  const bool banded = a.band > 0.0;
  if (banded) {
    if (a.circle.empty() && a.segment.empty())
      throw FormatError("--exclude-band needs --interface-circle or --interface-segment");
    const double w = a.band * d.spacing();
    std::optional<std::vector<double>> c, s;
    if (!a.circle.empty()) c = parse_numbers(a.circle, 3, "--interface-circle");
    if (!a.segment.empty()) s = parse_numbers(a.segment, 4, "--interface-segment");
    for (std::size_t n = 0; n < d.node_count(); ++n) {
      const Point p = d.node(n);
      if (c && std::abs(std::abs(p - Point((*c)[0], (*c)[1])) - (*c)[2]) <= w) exclude[n] = 1;
      if (s && segment_distance(p, Point((*s)[0], (*s)[1]), Point((*s)[2], (*s)[3])) <= w) exclude[n] = 1;
    }
  }
  const HopfField f = hopf_differential(h, banded ? &exclude : nullptr);
  std::cout.precision(12);
  std::size_t valid = 0;
  double max_f = 0.0;
  for (std::size_t n = 0; n < d.node_count(); ++n)
    if (f.f_valid[n]) {
      ++valid;
      max_f = std::max(max_f, std::abs(f.F[n]));
    }
  std::cout << "valid nodes: " << valid << "\n"
            << "max |F|: " << max_f << "\n"
            << "dbar residual (" << a.norm << "): " << (a.norm == "l1" ? f.l1_residual : f.l2_residual) << "\n";
  if (a.annulus) {
    double worst = 0.0, worst_rel = 0.0;
    for (std::size_t n = 0; n < d.node_count(); ++n) {
      if (!f.f_valid[n]) continue;
      const Complex exact = example_annulus_hopf(d.node(n));
      worst = std::max(worst, std::abs(f.F[n] - exact));
      worst_rel = std::max(worst_rel, std::abs(f.F[n] - exact) / std::abs(exact));
    }
    std::cout << "max |F + 1/(4z^2)|: " << worst << "\n"
              << "max relative error: " << worst_rel << "\n";
  }
  if (!a.csv.empty()) write_text_atomic(a.csv, field_csv(d, f.F, f.f_valid));
  return kExitOk;
}

// ---- smooth ----

struct SmoothArgs {
  std::string input;
  std::string interface = "segment";
  std::string segment;
  std::string circle;
  double width = 0.25;
  double eta = 1.0 / 30.0;
  std::string out;
  std::string report;
  std::size_t samples = 1000000;
};

int cmd_smooth(const SmoothArgs& a, unsigned seed) {
  const GridMapping h = read_mapping(a.input);
  const MapJet f = interpolate_jet(h);
  ProfileOptions po;
  po.eta = a.eta;
  json rep = {{"command", "smooth"},
              {"seed", seed},
              {"input", a.input},
              {"input_hash", hex64(fnv1a(read_file(a.input)))},
              {"interface", a.interface},
              {"width", a.width},
              {"eta", a.eta},
              {"samples", a.samples}};
  int code = kExitOk;
  std::optional<GridMapping> g_samples;
  try {
    if (a.interface == "segment") {
      const auto s = parse_numbers(a.segment, 4, "--segment");
      const Point p0(s[0], s[1]), p1(s[2], s[3]);
      rep["segment"] = s;
      const TubularChart chart = segment_chart(p0, p1, 1.0);
      const ArcSmoothing sm = smooth_arc(f, chart, chart, a.width, po, a.samples);
      const double K = 20 * sm.profile.M;
      rep["M"] = sm.profile.M;
      rep["beta"] = sm.profile.beta;
      rep["certificate"] = {{"bound", "20M"},
                            {"K", K},
                            {"samples", sm.certificate.samples},
                            {"violations", sm.certificate.violations},
                            {"max_op_norm", sm.certificate.max_op_norm},
                            {"min_det", sm.certificate.min_det},
                            {"pass", sm.certificate.violations == 0}};
      if (sm.certificate.violations) code = kExitCertification;
      g_samples = sample_map(sm.g, h.domain());
    } else if (a.interface == "circle") {
      const auto c = parse_numbers(a.circle, 3, "--circle");
      rep["circle"] = c;
      const CircleSmoothing sm = smooth_circle(f, Point(c[0], c[1]), c[2], a.width, po);
      const double hw = sm.strip_halfwidth, r = c[2];
      const Point center(c[0], c[1]);
      const double K = 80 * sm.M;
      const BoundCertificate cert =
          certify_bounds(sm.g, center - Point(1, 1) * r * std::exp(hw), center + Point(1, 1) * r * std::exp(hw), K,
                         a.samples, [&](Point z) {
                           const double q = std::abs(z - center) / r;
                           return q > std::exp(-hw) && q < std::exp(hw);
                         });
      rep["M"] = sm.M;
      rep["beta"] = sm.profile.beta;
      rep["certificate"] = {{"bound", "80M"},
                            {"K", K},
                            {"samples", cert.samples},
                            {"violations", cert.violations},
                            {"max_op_norm", cert.max_op_norm},
                            {"min_det", cert.min_det},
                            {"pass", cert.violations == 0}};
      if (cert.violations) code = kExitCertification;
      g_samples = sample_map(sm.g, h.domain());
    } else {
      throw FormatError("--interface must be segment or circle");
    }
  } catch (const CertificationError& e) {
    rep["error"] = e.what();
    code = kExitCertification;
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    // a map that cannot be put in the strip normal form is an infeasible profile
    rep["error"] = e.what();
    code = kExitCertification;
  }
  rep["pass"] = code == kExitOk;
  if (g_samples) {
    // off the smoothed neighbourhood g = f, so node values outside it are the input
    for (std::size_t n = 0; n < h.domain().node_count(); ++n)
      if (h.domain().node_masked(n) && !std::isfinite((*g_samples)[n].real())) (*g_samples)[n] = h[n];
    if (!a.out.empty() && code == kExitOk) write_mapping(a.out, *g_samples);
  }
  if (!a.report.empty()) write_text_atomic(a.report, rep.dump(2) + "\n");
  std::cout << rep.dump(2) << "\n";
  if (code != kExitOk) std::cerr << "certification failed" << (rep.contains("error") ? ": " + rep["error"].get<std::string>() : "") << "\n";
  return code;
}

// ---- pipeline ----

struct PipelineArgs {
  std::string input;
  double epsilon = 0.1;
  bool finite_energy = true;
  int resolution = 0;
  std::string out;
  std::string manifest;
};

json audit_json(const StepAudit& s) {
  return {{"step", s.step},
          {"name", s.name},
          {"sup", s.sup},
          {"grad", s.grad},
          {"royden", budget_line(s.royden(), s.bound)},
          {"budget_met", s.budget_met},
          {"injective", s.injective},
          {"energy", s.energy},
          {"changed_nodes", s.changed_nodes},
          {"note", s.note}};
}

int cmd_pipeline(const PipelineArgs& a, unsigned seed) {
  const auto t_start = std::chrono::steady_clock::now();
  const auto bytes = read_file(a.input);
  GridMapping h = decode_mapping(bytes);
  if (a.resolution > 0) h = resample_mapping(h, a.resolution);

  PipelineConfig cfg;
  cfg.epsilon = a.epsilon;
  cfg.finite_energy = a.finite_energy;
  cfg.validate();

  const std::string manifest = a.manifest.empty() ? a.out + ".manifest.json" : a.manifest;
  json m = {{"command", "pipeline"},
            {"seed", seed},
            {"config",
             {{"epsilon", cfg.epsilon},
              {"epsilon_internal", cfg.epsilon / 14.0},
              {"finite_energy", cfg.finite_energy},
              {"resolution", a.resolution},
              {"max_refine_level", cfg.max_refine_level},
              {"certify_samples", cfg.certify_samples},
              {"solver_tolerance", cfg.solver.relative_tolerance}}},
            {"input", {{"path", a.input}, {"fnv1a", hex64(fnv1a(bytes))}}},
            {"grid",
             {{"nx", h.domain().nx()},
              {"ny", h.domain().ny()},
              {"spacing", h.domain().spacing()},
              {"masked_nodes", h.domain().masked_node_count()}}}};

  std::vector<StepAudit> audits;
  std::vector<double> sup_from_input;
  json timing = json::object();
  auto last = std::chrono::steady_clock::now();
  auto on_step = [&](const StepAudit& s, const GridMapping& hk) {
    audits.push_back(s);
    sup_from_input.push_back(sup_distance(hk, h));
    write_mapping(a.out + ".step" + std::to_string(s.step) + ".hsmf", hk);
    const auto now = std::chrono::steady_clock::now();
    timing["step" + std::to_string(s.step)] = std::chrono::duration<double>(now - last).count();
    last = now;
  };
  auto write_curves = [&](double energy_h) {
    std::ostringstream os;
    os.precision(17);
    os << "step,energy,sup_from_input,sup_change,grad_change,royden_change,bound\n";
    os << "0," << energy_h << ",0,0,0,0,0\n";
    for (std::size_t k = 0; k < audits.size(); ++k) {
      const StepAudit& s = audits[k];
      os << s.step << ',' << s.energy << ',' << sup_from_input[k] << ',' << s.sup << ',' << s.grad << ','
         << s.royden() << ',' << s.bound << "\n";
    }
    write_text_atomic(a.out + ".steps.csv", os.str());
  };

  int code = kExitOk;
  try {
    const PipelineResult res = run_pipeline(h, cfg, on_step);
    const PipelineReport& r = res.report;
    write_mapping(a.out, res.H);
    json steps = json::array();
    for (const auto& s : r.steps) steps.push_back(audit_json(s));
    m["steps"] = steps;
    m["early_return"] = r.early_return;
    m["energy_h"] = r.energy_h;
    m["energy_H"] = r.energy_H;
    if (r.delta) m["delta"] = *r.delta;
    m["counts"] = {{"squares", r.squares},           {"subsquares", r.subsquares},
                   {"lenses", r.lenses},             {"active_lenses", r.active_lenses},
                   {"vertices", r.vertices},         {"active_disks", r.active_disks},
                   {"certified_arcs", r.certified_arcs}, {"certified_circles", r.certified_circles},
                   {"max_arc_M", r.max_arc_M}};
    m["checks"] = {{"royden_distance", budget_line(r.royden_diff.royden(), r.epsilon)},
                   {"boundary_exact", r.boundary_exact},
                   {"injective", r.injective}};
    if (r.finite_energy) m["checks"]["energy"] = budget_line(r.energy_H, r.energy_h + 1e-8);
    m["all_budgets_met"] = r.all_budgets_met();
    if (!r.all_budgets_met()) {
      code = kExitStep;
      for (const auto& s : r.steps)
        if (!s.budget_met || !s.injective) {
          m["failed_step"] = s.step;
          break;
        }
    }
    write_curves(r.energy_h);
  } catch (const StepError& e) {
    code = kExitStep;
    m["error"] = e.what();
    m["failed_step"] = e.step();
    json steps = json::array();
    for (const auto& s : audits) steps.push_back(audit_json(s));
    m["steps"] = steps;
    m["all_budgets_met"] = false;
    write_curves(dirichlet_energy(h));
    std::cerr << e.what() << "\n";
  }
  timing["total"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  m["timing"] = timing;
  write_text_atomic(manifest, m.dump(2) + "\n");
  std::cout << "manifest: " << manifest << "\n";
  if (code == kExitOk) std::cout << "all budgets met; wrote " << a.out << "\n";
  return code;
}

// ---- verify ----

int cmd_verify(const std::vector<int>& only, const std::string& manifest, unsigned seed) {
  AcceptanceOptions opts;
  opts.seed = seed;
  opts.only = only;
  json checks = json::array();
  bool all = true;
  run_acceptance(opts, [&](const CriterionResult& r) {
    std::cout << format_result(r) << std::endl;
    all = all && r.pass;
    checks.push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
  });
  if (!manifest.empty()) {
    json m = {{"command", "verify"}, {"seed", seed}, {"checks", checks}, {"pass", all}};
    write_text_atomic(manifest, m.dump(2) + "\n");
  }
  return all ? kExitOk : kExitCertification;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Harmonic smoothing of planar grid homeomorphisms"};
  app.require_subcommand(1);
  unsigned seed = 0;
  app.add_option("--seed", seed, "seed for all sampling and random instances")->capture_default_str();

  EnergyArgs ea;
  auto* energy = app.add_subcommand("energy", "Dirichlet energy, per-region energies and Royden norm");
  energy->add_option("input", ea.input, "mapping file")->required();
  energy->add_option("--region", ea.regions, "x0,y0,x1,y1 box of cells (repeatable)");
  energy->add_option("--csv", ea.csv, "per-region energies as CSV");

  HopfArgs ha;
  auto* hopf = app.add_subcommand("hopf", "Hopf differential and its dbar residual");
  hopf->add_option("input", ha.input, "mapping file")->required();
  hopf->add_option("--residual-norm", ha.norm)->check(CLI::IsMember({"l1", "l2"}))->capture_default_str();
  hopf->add_option("--exclude-band", ha.band, "exclude nodes within this many cells of the interface");
  hopf->add_option("--interface-circle", ha.circle, "cx,cy,r");
  hopf->add_option("--interface-segment", ha.segment, "x0,y0,x1,y1");
  hopf->add_option("--csv", ha.csv, "F on the valid nodes as CSV");
  hopf->add_flag("--annulus-check", ha.annulus, "compare F against -1/(4z^2)");

  SmoothArgs sa;
  auto* smooth = app.add_subcommand("smooth", "Smooth a mapping across an interface and certify the bounds");
  smooth->add_option("input", sa.input, "mapping file")->required();
  smooth->add_option("--interface", sa.interface)->check(CLI::IsMember({"segment", "circle"}))->capture_default_str();
  smooth->add_option("--segment", sa.segment, "x0,y0,x1,y1");
  smooth->add_option("--circle", sa.circle, "cx,cy,r");
  smooth->add_option("--width", sa.width, "neighbourhood half-width (chart units; log-radius for circles)")
      ->capture_default_str();
  smooth->add_option("--eta", sa.eta, "mollifier half-width of the cutoff")->capture_default_str();
  smooth->add_option("--out", sa.out, "smoothed mapping file");
  smooth->add_option("--report", sa.report, "certification report (JSON)");
  smooth->add_option("--samples", sa.samples, "certification samples")->capture_default_str();

  PipelineArgs pa;
  auto* pipeline = app.add_subcommand("pipeline", "Approximate by a diffeomorphism within epsilon");
  pipeline->add_option("input", pa.input, "mapping file")->required();
  pipeline->add_option("--epsilon", pa.epsilon)->capture_default_str();
  pipeline->add_flag("--finite-energy,!--no-finite-energy", pa.finite_energy, "energy-monotone mode (default on)");
  pipeline->add_option("--resolution", pa.resolution, "resample the input to this many cells first");
  pipeline->add_option("--out", pa.out, "output mapping file")->required();
  pipeline->add_option("--manifest", pa.manifest, "run manifest (default: <out>.manifest.json)");

  std::vector<int> only;
  std::string verify_manifest;
  auto* verify = app.add_subcommand("verify", "Run the acceptance suite");
  verify->add_option("--only", only, "criterion ids")->delimiter(',');
  verify->add_option("--manifest", verify_manifest, "results as JSON");

  std::string fx_name, fx_out;
  int fx_cells = 64;
  auto* fixture = app.add_subcommand("make-fixture", "Write a test fixture mapping");
  fixture->add_option("name", fx_name, "identity, shear-kink, fold, annulus or bump")->required();
  fixture->add_option("--cells", fx_cells)->capture_default_str();
  fixture->add_option("--out", fx_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitFormat;
  }

  try {
    if (*energy) return cmd_energy(ea);
    if (*hopf) return cmd_hopf(ha);
    if (*smooth) return cmd_smooth(sa, seed);
    if (*pipeline) return cmd_pipeline(pa, seed);
    if (*verify) return cmd_verify(only, verify_manifest, seed);
    if (*fixture) {
      write_mapping(fx_out, make_fixture(fx_name, fx_cells));
      std::cout << "wrote " << fx_out << "\n";
      return kExitOk;
    }
  } catch (const StepError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStep;
  } catch (const CertificationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCertification;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFormat;
  }
  return kExitFormat;
}
