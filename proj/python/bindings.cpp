#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hs/acceptance.hpp"
#include "hs/error.hpp"
#include "hs/field.hpp"
#include "hs/fixtures.hpp"
#include "hs/harmonic.hpp"
#include "hs/hopf.hpp"
#include "hs/io.hpp"
#include "hs/pipeline.hpp"
#include "hs/smoothing.hpp"

namespace py = pybind11;
using namespace hs;

namespace {

using CArray = py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>;
using BArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

GridMapping make_mapping(Complex origin, double spacing, CArray values, std::optional<BArray> mask) {
  if (values.ndim() != 2) throw Error("values must be a 2-D array indexed [j, i]");
  const int ny = static_cast<int>(values.shape(0)), nx = static_cast<int>(values.shape(1));
  std::vector<std::uint8_t> cells(static_cast<std::size_t>(nx - 1) * (ny - 1), 1);
  if (mask) {
    if (mask->ndim() != 2 || mask->shape(0) != ny - 1 || mask->shape(1) != nx - 1)
      throw Error("cell mask must have shape (ny - 1, nx - 1)");
    std::copy(mask->data(), mask->data() + cells.size(), cells.begin());
    for (auto& c : cells) c = c != 0;
  }
  GridDomain d(origin, spacing, nx, ny, std::move(cells));
  d.validate();
  std::vector<Complex> v(values.data(), values.data() + values.size());
  for (std::size_t n = 0; n < d.node_count(); ++n)
    if (!d.node_masked(n)) v[n] = 0.0;
  return GridMapping(std::move(d), std::move(v));
}

CArray values_of(const GridMapping& h) {
  const GridDomain& d = h.domain();
  CArray out({d.ny(), d.nx()});
  std::copy(h.values().begin(), h.values().end(), out.mutable_data());
  return out;
}

template <class T>
py::array_t<T> node_array(const GridDomain& d, const std::vector<T>& v) {
  py::array_t<T> out({d.ny(), d.nx()});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

NodeSet region_of(const GridMapping& h, std::optional<BArray> region) {
  const GridDomain& d = h.domain();
  if (!region) return NodeSet::all_masked(d);
  if (static_cast<std::size_t>(region->size()) != d.node_count()) throw Error("region must have shape (ny, nx)");
  NodeSet s(d.node_count());
  for (std::size_t n = 0; n < d.node_count(); ++n)
    if (region->data()[n] && d.node_masked(n)) s.insert(n);
  return s;
}

py::dict audit_dict(const StepAudit& s) {
  py::dict a;
  a["step"] = s.step;
  a["name"] = s.name;
  a["sup"] = s.sup;
  a["grad"] = s.grad;
  a["royden"] = s.royden();
  a["bound"] = s.bound;
  a["budget_met"] = s.budget_met;
  a["injective"] = s.injective;
  a["energy"] = s.energy;
  a["changed_nodes"] = s.changed_nodes;
  a["note"] = s.note;
  return a;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Harmonic smoothing of planar grid homeomorphisms";

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  static py::exception<FormatError> format_error(m, "FormatError", error.ptr());
  static py::exception<CertificationError> cert_error(m, "CertificationError", error.ptr());
  static py::exception<StepError> step_error(m, "StepError", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const StepError& e) {
      step_error(e.what());
    } catch (const CertificationError& e) {
      cert_error(e.what());
    } catch (const FormatError& e) {
      format_error(e.what());
    } catch (const Error& e) {
      error(e.what());
    }
  });

  py::class_<GridMapping>(m, "GridMapping")
      .def(py::init(&make_mapping), py::arg("origin"), py::arg("spacing"), py::arg("values"),
           py::arg("cell_mask") = py::none())
      .def_property_readonly("nx", [](const GridMapping& h) { return h.domain().nx(); })
      .def_property_readonly("ny", [](const GridMapping& h) { return h.domain().ny(); })
      .def_property_readonly("spacing", [](const GridMapping& h) { return h.domain().spacing(); })
      .def_property_readonly("origin", [](const GridMapping& h) { return h.domain().origin(); })
      .def_property_readonly("values", &values_of)
      .def_property_readonly("cell_mask",
                             [](const GridMapping& h) {
                               const GridDomain& d = h.domain();
                               py::array_t<std::uint8_t> out({d.cells_y(), d.cells_x()});
                               std::copy(d.cell_mask().begin(), d.cell_mask().end(), out.mutable_data());
                               return out;
                             })
      .def_property_readonly("node_mask",
                             [](const GridMapping& h) {
                               const GridDomain& d = h.domain();
                               std::vector<std::uint8_t> v(d.node_count());
                               for (std::size_t n = 0; n < d.node_count(); ++n) v[n] = d.node_masked(n);
                               return node_array(d, v);
                             })
      .def("nodes",
           [](const GridMapping& h) {
             const GridDomain& d = h.domain();
             std::vector<Complex> v(d.node_count());
             for (std::size_t n = 0; n < d.node_count(); ++n) v[n] = d.node(n);
             return node_array(d, v);
           })
      .def("__repr__", [](const GridMapping& h) {
        return "<GridMapping " + std::to_string(h.domain().nx()) + "x" + std::to_string(h.domain().ny()) + ">";
      });

  m.def("read_mapping", &read_mapping, py::arg("path"));
  m.def("write_mapping", &write_mapping, py::arg("path"), py::arg("mapping"));
  m.def("encode_mapping", [](const GridMapping& h) {
    const auto b = encode_mapping(h);
    return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
  });
  m.def("decode_mapping", [](py::bytes b) {
    const std::string s = b;
    return decode_mapping(std::vector<std::uint8_t>(s.begin(), s.end()));
  });
  m.def("make_fixture", &make_fixture, py::arg("name"), py::arg("cells") = 64);
  m.def("fixture_names", &fixture_names);
  m.def("resample", &resample_mapping, py::arg("mapping"), py::arg("cells"));

  m.def(
      "dirichlet_energy",
      [](const GridMapping& h, std::optional<BArray> region) {
        if (!region) return dirichlet_energy(h);
        return dirichlet_energy(h, region_of(h, region)).value;
      },
      py::arg("mapping"), py::arg("region") = py::none());
  m.def("royden_norm", [](const GridMapping& h) {
    const EnergyReport e = royden_norm(h);
    py::dict d;
    d["energy"] = e.total;
    d["sup_norm"] = e.sup_norm;
    d["grad_l2"] = e.grad_l2;
    d["royden"] = e.royden;
    return d;
  });
  m.def("difference_norm", [](const GridMapping& a, const GridMapping& b) {
    const DifferenceNorm n = difference_norm(a, b);
    return py::make_tuple(n.sup, n.grad_l2);
  });
  m.def("check_injectivity", [](const GridMapping& h) {
    const InjectivityVerdict v = check_injectivity(h);
    py::dict d;
    d["orientation_uniform"] = v.orientation_uniform;
    d["orientation"] = v.orientation == Orientation::Positive   ? "positive"
                       : v.orientation == Orientation::Negative ? "negative"
                                                                : "mixed";
    d["min_abs_area"] = v.min_abs_area;
    d["violating"] = v.violating.size();
    return d;
  });
  m.def(
      "harmonic_replace",
      [](const GridMapping& h, std::optional<BArray> region, double tol) {
        SolverOptions o;
        o.relative_tolerance = tol;
        return harmonic_replace(h, region_of(h, region), o);
      },
      py::arg("mapping"), py::arg("region") = py::none(), py::arg("tolerance") = 1e-10);
  m.def(
      "harmonic_residual",
      [](const GridMapping& h, std::optional<BArray> region) { return harmonic_residual(h, region_of(h, region)); },
      py::arg("mapping"), py::arg("region") = py::none());

  m.def(
      "hopf_differential",
      [](const GridMapping& h, std::optional<BArray> exclude) {
        std::vector<std::uint8_t> ex;
        if (exclude) ex.assign(exclude->data(), exclude->data() + exclude->size());
        if (exclude && ex.size() != h.domain().node_count()) throw Error("exclude must have shape (ny, nx)");
        const HopfField f = hopf_differential(h, exclude ? &ex : nullptr);
        py::dict d;
        d["F"] = node_array(f.domain, f.F);
        d["valid"] = node_array(f.domain, f.f_valid);
        d["dbar"] = node_array(f.domain, f.dbar_residual);
        d["l1_residual"] = f.l1_residual;
        d["l2_residual"] = f.l2_residual;
        return d;
      },
      py::arg("mapping"), py::arg("exclude") = py::none());
  m.def("annulus_hopf", &example_annulus_hopf);

  m.def(
      "cutoff_alpha",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> t, double eta) {
        const CutoffAlpha a(eta);
        py::array_t<double> v(t.size()), dv(t.size());
        for (py::ssize_t k = 0; k < t.size(); ++k) {
          v.mutable_data()[k] = a(t.data()[k]);
          dv.mutable_data()[k] = a.derivative(t.data()[k]);
        }
        return py::make_tuple(v, dv);
      },
      py::arg("t"), py::arg("eta") = 1.0 / 30.0);

  m.def(
      "run_pipeline",
      [](const GridMapping& h, double epsilon, bool finite_energy, int resolution) {
        PipelineConfig cfg;
        cfg.epsilon = epsilon;
        cfg.finite_energy = finite_energy;
        cfg.resolution = resolution;
        PipelineResult res;
        {
          py::gil_scoped_release release;
          res = run_pipeline(h, cfg);
        }
        const PipelineReport& r = res.report;
        py::dict d;
        d["epsilon"] = r.epsilon;
        d["epsilon_internal"] = r.epsilon_internal;
        d["early_return"] = r.early_return;
        py::list steps;
        for (const auto& s : r.steps) steps.append(audit_dict(s));
        d["steps"] = steps;
        d["delta"] = r.delta ? py::cast(*r.delta) : py::none();
        d["energy_h"] = r.energy_h;
        d["energy_H"] = r.energy_H;
        d["royden_distance"] = r.royden_diff.royden();
        d["boundary_exact"] = r.boundary_exact;
        d["injective"] = r.injective;
        d["subsquares"] = r.subsquares;
        d["all_budgets_met"] = r.all_budgets_met();
        return py::make_tuple(res.H, d);
      },
      py::arg("mapping"), py::arg("epsilon") = 0.1, py::arg("finite_energy") = true, py::arg("resolution") = 0);

  m.def(
      "run_acceptance",
      [](std::vector<int> only, unsigned seed) {
        AcceptanceOptions o;
        o.only = std::move(only);
        o.seed = seed;
        std::vector<CriterionResult> rs;
        {
          py::gil_scoped_release release;
          rs = run_acceptance(o);
        }
        py::list out;
        for (const auto& r : rs) {
          py::dict d;
          d["id"] = r.id;
          d["name"] = r.name;
          d["pass"] = r.pass;
          d["detail"] = r.detail;
          d["seconds"] = r.seconds;
          out.append(d);
        }
        return out;
      },
      py::arg("only") = std::vector<int>{}, py::arg("seed") = 0u);
}
