#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fsisens/cli.hpp"
#include "fsisens/sensitivity.hpp"

namespace py = pybind11;
using namespace fsisens;

namespace {

struct Channel {
  double height;
  Discretization disc;

  Channel(double h, double length, double height_, bool obstacle, int refinements)
      : height(height_), disc(make(h, length, height_, obstacle, refinements)) {}

  static Mesh make(double h, double length, double height, bool obstacle, int refinements) {
    ChannelGeometry g = ChannelGeometry::straight_channel(length, height, h);
    if (obstacle) {
      // same proportions as the default benchmark geometry
      const Point c{0.3 * length, 0.5 * height};
      g.obstacle_outer = axis_aligned_square(c, 0.4 * height);
      g.obstacle_inner = axis_aligned_square(c, 0.2 * height);
    }
    Mesh m = build_channel_mesh(g);
    for (int k = 0; k < refinements; ++k) m = refine_uniform(m);
    return m;
  }
};

Eigen::MatrixXd points_of(const FESpace& s) {
  Eigen::MatrixXd p(s.n_scalar(), 2);
  for (int i = 0; i < s.n_scalar(); ++i) p.row(i) << s.points[i].x, s.points[i].y;
  return p;
}

py::dict report_dict(const SolverReport& r) {
  py::dict d;
  d["iterations"] = r.iterations;
  d["converged"] = r.converged;
  d["increments"] = r.increments;
  d["increment_ratios"] = r.increment_ratios;
  d["residuals"] = r.residual_history;
  return d;
}

struct Model {
  std::shared_ptr<Channel> channel;
  FSIProblem problem;

  Model(std::shared_ptr<Channel> c, double nu, double lam, double mu)
      : channel(std::move(c)), problem(channel->disc, nu, Lame{lam, mu}) {}

  InflowProfile inflow(double m) const { return {m, channel->height}; }
};

struct CoupledState {
  std::shared_ptr<Model> model;
  FSIState state;
  TractionMode traction;
};

CouplingOptions coupling(double omega, double tol, int max_iter, const std::string& traction, double fluid_tol) {
  CouplingOptions o;
  o.omega = omega;
  o.tol = tol;
  o.max_outer_iter = max_iter;
  o.traction = parse_traction_mode(traction);
  o.fluid.tol = fluid_tol;
  o.validate();
  return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Stationary fluid-structure interaction with shape sensitivities (C++ core)";

  static py::exception<FSIError> coupling_error(m, "CouplingError", PyExc_RuntimeError);
  static py::exception<DivergenceError> divergence_error(m, "DivergenceError", PyExc_RuntimeError);
  static py::exception<MeshTanglingError> tangling_error(m, "MeshTanglingError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const FSIError& e) {
      coupling_error(e.what());
    } catch (const DivergenceError& e) {
      divergence_error(e.what());
    } catch (const MeshTanglingError& e) {
      tangling_error(e.what());
    } catch (const cli::ConfigError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def("set_num_threads", &set_num_threads, py::arg("n"));
  m.def("num_threads", &num_threads);

  py::class_<Channel, std::shared_ptr<Channel>>(m, "Channel")
      .def(py::init<double, double, double, bool, int>(), py::arg("h") = 0.08, py::arg("length") = 4.0,
           py::arg("height") = 1.0, py::arg("obstacle") = true, py::arg("refinements") = 0)
      .def_property_readonly("n_velocity_dofs", [](const Channel& c) { return c.disc.velocity().n_dofs(); })
      .def_property_readonly("n_pressure_dofs", [](const Channel& c) { return c.disc.pressure().n_dofs(); })
      .def_property_readonly("n_displacement_dofs", [](const Channel& c) { return c.disc.displacement().n_dofs(); })
      .def_property_readonly("fluid_area", [](const Channel& c) { return c.disc.mesh().area(Subdomain::fluid); })
      .def_property_readonly("solid_area", [](const Channel& c) { return c.disc.mesh().area(Subdomain::solid); })
      .def("velocity_points", [](const Channel& c) { return points_of(c.disc.velocity()); })
      .def("pressure_points", [](const Channel& c) { return points_of(c.disc.pressure()); })
      .def("displacement_points", [](const Channel& c) { return points_of(c.disc.displacement()); })
      .def("validate", [](const Channel& c) { return validate_mesh(c.disc.mesh()).problems; });

  py::class_<Model, std::shared_ptr<Model>>(m, "Model")
      .def(py::init<std::shared_ptr<Channel>, double, double, double>(), py::arg("channel"), py::arg("nu") = 1.0,
           py::arg("lam") = 75.0, py::arg("mu") = 50.0)
      .def(
          "solve_fluid",
          [](const Model& self, double magnitude, double tol, int max_iter) {
            const auto fields = TransformFields::make_identity(self.channel->disc);
            const auto [s, rep] = self.problem.fluid().solve(fields, inflow_data(self.inflow(magnitude)), {},
                                                             {tol, max_iter});
            py::dict d = report_dict(rep);
            d["w"] = s.w.coefficients;
            d["p"] = s.p.coefficients;
            return d;
          },
          py::arg("magnitude"), py::arg("tol") = 1e-10, py::arg("max_iter") = 50)
      .def(
          "solve_fsi",
          [](std::shared_ptr<Model> self, double magnitude, double omega, double tol, int max_iter,
             const std::string& traction, double fluid_tol) {
            const auto opts = coupling(omega, tol, max_iter, traction, fluid_tol);
            CoupledState cs{self, {}, opts.traction};
            {
              py::gil_scoped_release release;
              cs.state = self->problem.solve(self->inflow(magnitude), opts);
            }
            return cs;
          },
          py::arg("magnitude"), py::arg("omega") = 1.0, py::arg("tol") = 1e-9, py::arg("max_iter") = 100,
          py::arg("traction") = "full-vector", py::arg("fluid_tol") = 1e-10)
      .def(
          "taylor_test",
          [](const Model& self, double magnitude, double direction, std::vector<double> hs) {
            auto opts = coupling(1.0, 1e-12, 400, "full-vector", 1e-13);
            const auto r = taylor_test(self.problem, self.inflow(magnitude), self.inflow(direction), hs, opts,
                                       {1e-13, 200});
            py::dict d;
            py::list rows;
            for (const auto& row : r.rows) rows.append(py::make_tuple(row.h, row.r_u, row.r_w, row.r_p, row.valid));
            d["rows"] = rows;
            d["slope_u"] = r.slope_u;
            d["slope_w"] = r.slope_w;
            d["slope_p"] = r.slope_p;
            return d;
          },
          py::arg("magnitude"), py::arg("direction") = 1.0,
          py::arg("hs") = std::vector<double>{1e-2, 3e-3, 1e-3, 3e-4});

  py::class_<CoupledState>(m, "CoupledState")
      .def_property_readonly("u", [](const CoupledState& s) { return s.state.u.coefficients; })
      .def_property_readonly("w", [](const CoupledState& s) { return s.state.fluid.w.coefficients; })
      .def_property_readonly("p", [](const CoupledState& s) { return s.state.fluid.p.coefficients; })
      .def_property_readonly("converged", [](const CoupledState& s) { return s.state.report.converged; })
      .def_property_readonly("min_J", [](const CoupledState& s) { return s.state.fields.min_J; })
      .def_property_readonly("log",
                             [](const CoupledState& s) {
                               py::list l;
                               for (const auto& it : s.state.log) {
                                 py::dict d;
                                 d["iter"] = it.iter;
                                 d["du"] = it.du;
                                 d["ratio"] = it.ratio;
                                 d["fluid_iterations"] = it.fluid_iterations;
                                 d["min_J"] = it.min_J;
                                 d["min_eig_A"] = it.min_eig_A;
                                 l.append(d);
                               }
                               return l;
                             })
      .def("residual",
           [](const CoupledState& s, double magnitude) {
             return s.model->problem.residual(s.state, s.model->inflow(magnitude), s.traction);
           },
           py::arg("magnitude"))
      .def(
          "sensitivity",
          [](const CoupledState& s, double direction, double tol, bool monolithic) {
            const SensitivitySolver solver(s.model->problem, s.state, s.traction);
            const auto dg = s.model->inflow(direction);
            const SensitivityState r = monolithic ? solver.solve_monolithic(dg) : solver.solve(dg, {tol, 200});
            py::dict d = report_dict(r.report);
            d["du"] = r.du.coefficients;
            d["dw"] = r.dfluid.w.coefficients;
            d["dp"] = r.dfluid.p.coefficients;
            return d;
          },
          py::arg("direction") = 1.0, py::arg("tol") = 1e-10, py::arg("monolithic") = false)
      .def(
          "probe",
          [](const CoupledState& s, double direction, int samples, std::uint64_t seed, int steps) {
            const SensitivitySolver solver(s.model->problem, s.state, s.traction);
            const auto r = contraction_probe(solver, s.model->inflow(direction), samples, seed, steps);
            py::dict d;
            d["eta_power"] = r.eta_power;
            d["eta_t_iteration"] = r.eta_t_iteration;
            d["t_iteration_converged"] = r.t_iteration_converged;
            d["power_ratios"] = r.power_ratios;
            return d;
          },
          py::arg("direction") = 1.0, py::arg("samples") = 3, py::arg("seed") = 0, py::arg("power_steps") = 30);

  m.def(
      "mms",
      [](int levels, double h0, double nu, const std::string& solution) {
        if (solution != "trigonometric" && solution != "polynomial")
          throw std::invalid_argument("solution must be 'trigonometric' or 'polynomial'");
        const auto r = mms_convergence_study(solution == "trigonometric" ? trigonometric_solution(nu)
                                                                         : polynomial_solution(nu),
                                             levels, h0, nu);
        py::dict d;
        py::list rows;
        for (const auto& l : r.levels) rows.append(py::make_tuple(l.h, l.dofs, l.error_w_h1, l.error_p_l2));
        d["levels"] = rows;
        d["rate_w"] = r.rate_w_fit;
        d["rate_p"] = r.rate_p_fit;
        return d;
      },
      py::arg("levels") = 4, py::arg("h0") = 0.25, py::arg("nu") = 1.0, py::arg("solution") = "trigonometric");

  m.def("scenarios", [] {
    std::vector<std::string> names;
    for (const auto& s : cli::scenarios()) names.push_back(s.name);
    return names;
  });
  m.def("describe", &cli::describe, py::arg("scenario"));
  m.def("default_config_json", [] { return cli::default_config().dump(); });
  m.def(
      "run_json",
      [](const std::string& scenario, const std::string& config_json, const std::filesystem::path& out,
         std::optional<std::uint64_t> seed) {
        cli::json user;
        try {
          user = cli::json::parse(config_json);
        } catch (const cli::json::parse_error& e) {
          throw cli::ConfigError(e.what());
        }
        const auto resolved = cli::resolve_config(user, seed);
        cli::RunResult r;
        {
          py::gil_scoped_release release;
          r = cli::run(scenario, resolved, out);
        }
        return py::make_tuple(r.exit_code, r.summary.dump());
      },
      py::arg("scenario"), py::arg("config_json"), py::arg("out"), py::arg("seed") = py::none());
}
