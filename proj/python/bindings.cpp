#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ermlab/config.hpp"
#include "ermlab/diagnostics.hpp"
#include "ermlab/erm.hpp"
#include "ermlab/fixed_points.hpp"
#include "ermlab/geometry.hpp"
#include "ermlab/harness.hpp"
#include "ermlab/parallel.hpp"
#include "ermlab/rng.hpp"
#include "ermlab/sim.hpp"
#include "ermlab/widths.hpp"

namespace py = pybind11;
using namespace ermlab;

namespace {

ConvexBody make_body(const std::string& kind, int d, double radius, int p, int q) {
  switch (body_kind_from_string(kind)) {
    case BodyKind::l1_ball: return ConvexBody::l1(d, radius);
    case BodyKind::l2_ball: return ConvexBody::l2(d, radius);
    case BodyKind::linf_ball: return ConvexBody::linf(d, radius);
    case BodyKind::maxnorm_ball: return ConvexBody::maxnorm(p, q, radius);
  }
  throw ArgumentError("unknown body kind");
}

FixedPointQuery make_query(const std::string& kind, int N, double eta, double Q, int k) {
  if (kind == "s_star") return FixedPointQuery::s_star(N, eta);
  if (kind == "r_star") return FixedPointQuery::r_star(N, Q);
  if (kind == "r_k") return FixedPointQuery::r_k(k, Q);
  if (kind == "q_star") return FixedPointQuery::q_star(N, eta);
  throw ArgumentError("unknown fixed point kind '" + kind + "'");
}

Model make_model(int d, double sigma, const std::optional<Vector>& t_star, const std::string& design,
                 const std::string& noise) {
  Model model{DesignSpec::make(design_kind_from_string(design), d),
              NoiseSpec{noise_kind_from_string(noise), sigma}, t_star};
  model.validate();
  return model;
}

py::dict run(const std::map<std::string, std::string>& flat, const std::string& constants) {
  const auto cfg = ExperimentConfig::from_flat(flat, constants);
  ExperimentResult res;
  {
    py::gil_scoped_release release;
    res = run_experiment(cfg);
  }
  py::dict out;
  out["csv"] = res.csv;
  out["summary_json"] = res.summary_json;
  out["config_echo"] = res.config_echo;
  out["failures"] = res.failures;
  out["exit_code"] = res.exit_code();
  return out;
}

}  // namespace

PYBIND11_MODULE(_ermlab, m) {
  m.doc() = "Bindings for the ermlab C++ core.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<UnsupportedError>(m, "UnsupportedError", PyExc_NotImplementedError);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<ConvexBody>(m, "ConvexBody")
      .def(py::init(&make_body), py::arg("kind"), py::arg("d") = 1, py::arg("radius") = 1.0, py::arg("p") = 0,
           py::arg("q") = 0)
      .def_property_readonly("kind", [](const ConvexBody& b) { return to_string(b.kind); })
      .def_readonly("dim", &ConvexBody::dim)
      .def_readonly("rows", &ConvexBody::rows)
      .def_readonly("cols", &ConvexBody::cols)
      .def_readonly("radius", &ConvexBody::radius)
      .def("diameter", &ConvexBody::diameter)
      .def("__repr__", [](const ConvexBody& b) {
        return "ConvexBody(" + to_string(b.kind) + ", dim=" + std::to_string(b.dim) + ", radius=" +
               format_real(b.radius) + ")";
      });

  m.def("project", &project, py::arg("body"), py::arg("x"));
  m.def("support", [](const ConvexBody& b, const Vector& g) { return support(b, g).value; }, py::arg("body"),
        py::arg("g"));
  m.def("support_intersection",
        [](const ConvexBody& b, double r, const Vector& g) {
          const auto s = support_intersection(b, r, g);
          return py::make_tuple(s.value, s.argmax);
        },
        py::arg("body"), py::arg("r"), py::arg("g"));
  m.def("project_intersection", [](const ConvexBody& b, double r, const Vector& x) { return project_intersection(b, r, x); },
        py::arg("body"), py::arg("r"), py::arg("x"));
  m.def("gauge", &gauge, py::arg("body"), py::arg("x"));

  py::class_<WidthEstimate>(m, "WidthEstimate")
      .def_readonly("r", &WidthEstimate::r)
      .def_readonly("mean", &WidthEstimate::mean)
      .def_readonly("std_error", &WidthEstimate::std_error)
      .def_readonly("trials", &WidthEstimate::trials);

  m.def("gaussian_width_mc",
        [](const ConvexBody& b, double r, int trials, std::uint64_t seed) {
          py::gil_scoped_release release;
          return gaussian_width_mc(b, r, trials, seed);
        },
        py::arg("body"), py::arg("r"), py::arg("trials") = 400, py::arg("seed") = 1);
  m.def("maxnorm_atom_width",
        [](int p, int q, int trials, std::uint64_t seed) { return maxnorm_atom_width(p, q, trials, seed); },
        py::arg("p"), py::arg("q"), py::arg("trials") = 400, py::arg("seed") = 1);
  m.def("kernel_section_diameter",
        [](const ConvexBody& b, const Matrix& x, int directions, std::uint64_t seed) {
          SectionConfig cfg;
          cfg.directions = directions;
          cfg.seed = seed;
          return kernel_section_diameter(b, x, cfg).diameter;
        },
        py::arg("body"), py::arg("X"), py::arg("directions") = 1000, py::arg("seed") = 7);

  py::class_<FixedPointResult>(m, "FixedPointResult")
      .def_readonly("value", &FixedPointResult::value)
      .def_readonly("residual", &FixedPointResult::residual)
      .def_readonly("std_error", &FixedPointResult::std_error)
      .def_readonly("clipped", &FixedPointResult::clipped)
      .def_readonly("floored", &FixedPointResult::floored)
      .def_readonly("converged", &FixedPointResult::converged)
      .def_readonly("note", &FixedPointResult::note);

  m.def("solve_fixed_point",
        [](const ConvexBody& b, const std::string& kind, int N, double eta, double Q, int k, int trials,
           std::uint64_t seed) {
          const auto query = make_query(kind, N, eta, Q, k);
          py::gil_scoped_release release;
          return solve_fixed_point(b, query, trials, seed);
        },
        py::arg("body"), py::arg("kind") = "s_star", py::arg("N") = 1, py::arg("eta") = 0.0, py::arg("Q") = 0.0,
        py::arg("k") = 0, py::arg("trials") = 400, py::arg("seed") = 1);

  m.def("predicted_rate",
        [](const ConvexBody& b, int N, double sigma, double c1, double c3, double Q, int trials, std::uint64_t seed) {
          RatePrediction pred;
          {
            py::gil_scoped_release release;
            pred = predicted_rate(b, N, sigma, RateConstants{c1, c3, Q}, trials, seed);
          }
          py::dict out;
          out["rate"] = pred.rate;
          out["regime"] = to_string(pred.regime);
          out["s_star"] = pred.s_star;
          out["r_star"] = pred.r_star;
          return out;
        },
        py::arg("body"), py::arg("N"), py::arg("sigma"), py::arg("c1") = 1.0, py::arg("c3") = 1.0, py::arg("Q") = 1.0,
        py::arg("trials") = 400, py::arg("seed") = 1);

  m.def("sample_dataset",
        [](int d, int N, double sigma, const std::optional<Vector>& t_star, std::uint64_t seed,
           const std::string& design, const std::string& noise) {
          const Dataset data = sample_dataset(make_model(d, sigma, t_star, design, noise), N, seed);
          return py::make_tuple(data.X, data.Y);
        },
        py::arg("d"), py::arg("N"), py::arg("sigma"), py::arg("t_star") = std::nullopt, py::arg("seed") = 1,
        py::arg("design") = "gaussian", py::arg("noise") = "gaussian");

  m.def("erm",
        [](const ConvexBody& b, const Matrix& X, const Vector& Y) {
          Dataset data;
          data.X = X;
          data.Y = Y;
          data.validate();
          ErmSolution sol;
          {
            py::gil_scoped_release release;
            if (b.kind == BodyKind::maxnorm_ball) {
              ErmConfig cfg;
              cfg.maxnorm_radius = b.radius;
              sol = erm_maxnorm_factorized(b.rows, b.cols, data, 0, cfg);
            } else {
              sol = erm_linear(b, data);
            }
          }
          py::dict out;
          out["t_hat"] = sol.t_hat;
          out["empirical_risk"] = sol.empirical_risk;
          out["iterations"] = sol.iterations;
          out["solver"] = sol.solver;
          out["certificate"] = sol.certificate;
          out["converged"] = sol.converged;
          return out;
        },
        py::arg("body"), py::arg("X"), py::arg("Y"));

  m.def("excess_risk",
        [](const Vector& t_hat, const std::optional<Vector>& t_star, const std::string& noise) {
          const int d = static_cast<int>(t_hat.size());
          return excess_risk(t_hat, make_model(d, 1.0, t_star, "gaussian", noise)).value;
        },
        py::arg("t_hat"), py::arg("t_star") = std::nullopt, py::arg("noise") = "gaussian");

  m.def("gaussian_shift_bound", &gaussian_shift_bound, py::arg("alpha"), py::arg("shift"));
  m.def("accuracy_confidence_lower", &accuracy_confidence_lower, py::arg("sigma"), py::arg("N"), py::arg("delta"),
        py::arg("d_F"), py::arg("c1") = 1.0);
  m.def("normal_quantile", &normal_quantile, py::arg("p"));

  m.def("preset_names", &preset_names);
  m.def("preset_config", [](const std::string& name) { return preset(name).to_flat(); }, py::arg("name"));
  m.def("run_experiment", &run, py::arg("config"), py::arg("constants") = "");
  m.def("fit_rate",
        [](const std::string& csv, const std::string& x, const std::string& y) {
          const auto fit = fit_rate(parse_csv(csv), x, y);
          py::dict out;
          out["slope"] = fit.slope;
          out["intercept"] = fit.intercept;
          out["r2"] = fit.r2;
          out["points"] = fit.points;
          return out;
        },
        py::arg("csv"), py::arg("x") = "N", py::arg("y") = "excess_risk");
  m.def("set_num_threads", &set_num_threads, py::arg("threads"));
  m.def("num_threads", &num_threads);
  m.def("derive_seed", [](std::uint64_t master, const std::string& tag, std::uint64_t index) {
    return derive_seed(master, tag, index);
  }, py::arg("master"), py::arg("tag"), py::arg("index") = 0);
}
