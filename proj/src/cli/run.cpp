#include <cmath>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "cli_internal.hpp"
#include "fsisens/sensitivity.hpp"

namespace fsisens::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------------------------
// artifacts

ArtifactWriter::ArtifactWriter(fs::path dir, std::string scenario, const json& config)
    : dir_(std::move(dir)), scenario_(std::move(scenario)), config_(config), config_dump_(config.dump()),
      config_hash_(hex64(fnv1a64(config_dump_))) {
  fs::create_directories(dir_);
}

namespace {

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out << bytes;
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

}  // namespace

void ArtifactWriter::write_text(const std::string& name, const std::string& body) {
  const std::string h = hex64(fnv1a64(body));
  hashes_[name] = h;
  write_file(dir_ / name, "# scenario=" + scenario_ + "\n# config=" + config_dump_ + "\n# config_fnv1a64=" +
                              config_hash_ + "\n# content_fnv1a64=" + h + "\n" + body);
}

void ArtifactWriter::write_vtk(const std::string& name, const FESpace& space, const std::vector<NodalField>& fields) {
  std::ostringstream os;
  write_p2_vtk(os, "-", space, fields);
  std::string text = os.str();
  // the second line is the title; the hash covers everything after it
  const auto l1 = text.find('\n');
  const auto l2 = text.find('\n', l1 + 1);
  const std::string body = text.substr(l2 + 1);
  const std::string h = hex64(fnv1a64(body));
  hashes_[name] = h;
  write_file(dir_ / name, text.substr(0, l1 + 1) + "fsisens " + scenario_ + " config_fnv1a64=" + config_hash_ +
                              " content_fnv1a64=" + h + "\n" + body);
}

void ArtifactWriter::write_summary(json summary) {
  summary["scenario"] = scenario_;
  summary["config"] = config_;
  summary["config_fnv1a64"] = config_hash_;
  summary["artifacts"] = hashes_;
  summary.erase("content_fnv1a64");
  summary["content_fnv1a64"] = hex64(fnv1a64(summary.dump()));
  write_file(dir_ / "summary.json", summary.dump(2) + "\n");
}

double observed_ratio(const std::vector<double>& increments, double tol) {
  double r = 0.0;
  for (std::size_t k = 1; k < increments.size(); ++k)
    if (increments[k] > 100.0 * tol && increments[k - 1] > 0.0) r = std::max(r, increments[k] / increments[k - 1]);
  return r;
}

namespace {

class Checks {
 public:
  void add(const std::string& name, double value, const std::string& relation, double limit) {
    bool pass = false;
    if (relation == "<=") pass = value <= limit;
    else if (relation == ">=") pass = value >= limit;
    else if (relation == "<") pass = value < limit;
    else if (relation == ">") pass = value > limit;
    record(name, {{"value", value}, {"relation", relation}, {"limit", limit}, {"pass", pass}}, pass);
  }
  void add_flag(const std::string& name, bool pass) { record(name, {{"pass", pass}}, pass); }
  bool all() const { return all_; }
  const json& to_json() const { return checks_; }

 private:
  void record(const std::string& name, json entry, bool pass) {
    checks_[name] = std::move(entry);
    all_ = all_ && pass;
    spdlog::info("check {}: {}", name, pass ? "pass" : "FAIL");
  }
  json checks_ = json::object();
  bool all_ = true;
};

struct Context {
  const json& config;
  ArtifactWriter& out;
  Checks checks;
  json metrics = json::object();
};

Discretization make_disc(const json& c) {
  Mesh m = build_channel_mesh(geometry_of(c));
  for (int k = 0; k < get<int>(c, "geometry.refinements"); ++k) m = refine_uniform(m);
  return Discretization(std::move(m));
}

Lame lame_of(const json& c) { return Lame{get<double>(c, "physics.lambda"), get<double>(c, "physics.mu")}; }

/// Mirror defect of a velocity and a solid displacement, or NaN for asymmetric geometry.
std::optional<double> mirror_defect(const Discretization& d, const json& c, const FluidState& fl, const FEFunction* u) {
  const double height = get<double>(c, "geometry.height");
  try {
    const auto mv = mirror_scalar_map(d.velocity(), height);
    double defect = (mirror_vector_field(d.velocity(), mv, fl.w.coefficients) - fl.w.coefficients).cwiseAbs().maxCoeff();
    if (u && d.has_solid()) {
      const auto ms = mirror_scalar_map(d.displacement(), height);
      defect = std::max(defect,
                        (mirror_vector_field(d.displacement(), ms, u->coefficients) - u->coefficients).cwiseAbs().maxCoeff());
    }
    return defect;
  } catch (const DofError&) {
    return std::nullopt;
  }
}

std::vector<NodalField> fluid_fields(const Discretization& d, const FluidState& s, const FEFunction* phi,
                                     const std::string& prefix = "") {
  std::vector<NodalField> f{nodal_vector(prefix + "velocity", d.velocity(), s.w.coefficients),
                            nodal_scalar_p1(prefix + "pressure", d.velocity(), d.pressure(), s.p.coefficients)};
  if (phi) f.push_back(nodal_vector("mesh_displacement", d.velocity(), phi->coefficients));
  return f;
}

std::string report_csv(const std::string& header, const std::vector<double>& increments,
                       const std::vector<double>* residuals) {
  std::ostringstream os;
  os << header << '\n';
  for (std::size_t k = 0; k < increments.size(); ++k) {
    os << k + 1 << ',';
    if (residuals) os << format_double(k < residuals->size() ? (*residuals)[k] : 0.0) << ',';
    os << format_double(increments[k]) << ',' << format_double(k ? increments[k] / increments[k - 1] : 0.0) << '\n';
  }
  return os.str();
}

void write_fsi_fields(Context& ctx, const Discretization& d, const FSIState& s) {
  ctx.out.write_vtk("fields_fluid.vtk", d.velocity(), fluid_fields(d, s.fluid, &s.map.displacement));
  ctx.out.write_vtk("fields_solid.vtk", d.displacement(), {nodal_vector("displacement", d.displacement(), s.u.coefficients)});
}

FSIState coupled_solve(Context& ctx, const FSIProblem& problem, const VelocityData& g, const CouplingOptions& opts) {
  try {
    return problem.solve(g, opts);
  } catch (const FSIError& e) {
    ctx.out.write_vtk("fields_last_iterate.vtk", problem.disc().displacement(),
                      {nodal_vector("displacement", problem.disc().displacement(), e.last_u().coefficients)});
    std::ostringstream os;
    write_fsi_log_csv(os, e.log());
    ctx.out.write_text("report_fsi.csv", os.str());
    throw;
  }
}

// ---------------------------------------------------------------------------------------------
// scenarios

void run_mesh(Context& ctx) {
  const auto& c = ctx.config;
  Mesh m = build_channel_mesh(geometry_of(c));
  for (int k = 0; k < get<int>(c, "geometry.refinements"); ++k) m = refine_uniform(m);
  const MeshReport rep = validate_mesh(m);
  std::ostringstream os;
  write_mesh(os, m);
  ctx.out.write_text("mesh.txt", os.str());
  const Discretization d(m);
  ctx.out.write_vtk("fields_mesh.vtk", d.velocity(), {});
  ctx.metrics["nodes"] = m.nodes.size();
  ctx.metrics["triangles"] = m.triangles.size();
  ctx.metrics["fluid_area"] = m.area(Subdomain::fluid);
  ctx.metrics["solid_area"] = m.area(Subdomain::solid);
  ctx.metrics["max_edge_length"] = m.max_edge_length();
  ctx.metrics["velocity_dofs"] = d.velocity().n_dofs();
  ctx.metrics["pressure_dofs"] = d.pressure().n_dofs();
  ctx.metrics["displacement_dofs"] = d.displacement().n_dofs();
  for (auto t : {BoundaryTag::inflow, BoundaryTag::outflow, BoundaryTag::wall, BoundaryTag::interface,
                 BoundaryTag::clamped})
    ctx.metrics["length_" + std::string(to_string(t))] = m.tagged_length(t);
  json problems = json::array();
  for (const auto& p : rep.problems) problems.push_back(p);
  ctx.metrics["validator_problems"] = problems;
  ctx.checks.add_flag("mesh_valid", rep.ok());
}

void run_solve_ns(Context& ctx) {
  const auto& c = ctx.config;
  const Discretization d = make_disc(c);
  const double nu = get<double>(c, "physics.nu");
  const auto g = profile_of(c, "inflow", get<double>(c, "inflow.magnitude"));
  const PicardOptions opts{get<double>(c, "fluid.tol"), get<int>(c, "fluid.max_iter")};
  const FluidSolver solver(d, nu);
  const auto fields = TransformFields::make_identity(d);
  const auto [s, rep] = solver.solve(fields, {g, {}}, {}, opts);
  ctx.out.write_vtk("fields_fluid.vtk", d.velocity(), fluid_fields(d, s, nullptr));
  ctx.out.write_text("report_picard.csv", report_csv("iter,residual,increment,ratio", rep.increments, &rep.residual_history));
  ctx.metrics["iterations"] = rep.iterations;
  ctx.metrics["final_residual"] = rep.residual_history.empty() ? 0.0 : rep.residual_history.back();
  ctx.metrics["dofs"] = fluid_size(d);
  ctx.metrics["outflow_functional"] = outflow_functional(d, nullptr, s, nu);
  ctx.checks.add_flag("converged", rep.converged);
  ctx.checks.add("picard_ratio", observed_ratio(rep.increments, opts.tol), "<=", 0.9);
  if (const auto m = mirror_defect(d, c, s, nullptr)) ctx.checks.add("mirror_symmetry", *m, "<=", 1e-8);
}

void run_solve_fsi(Context& ctx) {
  const auto& c = ctx.config;
  const Discretization d = make_disc(c);
  const FSIProblem problem(d, get<double>(c, "physics.nu"), lame_of(c));
  const auto g = profile_of(c, "inflow", get<double>(c, "inflow.magnitude"));
  const auto opts = coupling_of(c);
  const FSIState s = coupled_solve(ctx, problem, g, opts);
  write_fsi_fields(ctx, d, s);
  std::ostringstream os;
  write_fsi_log_csv(os, s.log);
  ctx.out.write_text("report_fsi.csv", os.str());
  const double res = problem.residual(s, g, opts.traction);
  ctx.metrics["outer_iterations"] = s.log.size();
  ctx.metrics["outer_ratio"] = observed_ratio(s.report.increments, opts.tol);
  ctx.metrics["displacement_h1"] = d.h1_norm(s.u);
  ctx.metrics["min_J"] = s.fields.min_J;
  ctx.metrics["min_eig_A"] = s.fields.min_eig_A;
  ctx.checks.add_flag("converged", s.report.converged);
  ctx.checks.add("coupled_residual", res, "<=", 1e-7);
  if (const auto m = mirror_defect(d, c, s.fluid, &s.u)) ctx.checks.add("mirror_symmetry", *m, "<=", 1e-8);
}

void run_sensitivity(Context& ctx) {
  const auto& c = ctx.config;
  const Discretization d = make_disc(c);
  const FSIProblem problem(d, get<double>(c, "physics.nu"), lame_of(c));
  const auto opts = coupling_of(c);
  const FSIState base = coupled_solve(ctx, problem, profile_of(c, "inflow", get<double>(c, "inflow.magnitude")), opts);
  write_fsi_fields(ctx, d, base);
  const SensitivitySolver solver(problem, base, opts.traction);
  const auto dg = profile_of(c, "direction", get<double>(c, "direction.magnitude"));
  const SensitivityOptions sopts{get<double>(c, "sensitivity.tol"), get<int>(c, "sensitivity.max_iter")};
  const SensitivityState s = solver.solve(dg, sopts);
  ctx.out.write_vtk("fields_sensitivity_fluid.vtk", d.velocity(), fluid_fields(d, s.dfluid, nullptr, "d_"));
  ctx.out.write_vtk("fields_sensitivity_solid.vtk", d.displacement(),
                    {nodal_vector("d_displacement", d.displacement(), s.du.coefficients)});
  ctx.out.write_text("report_sensitivity.csv", report_csv("iter,increment,ratio", s.report.increments, nullptr));
  const double eta = observed_ratio(s.report.increments, sopts.tol);
  ctx.metrics["iterations"] = s.report.iterations;
  ctx.metrics["du_h1"] = d.h1_norm(s.du);
  ctx.metrics["dw_dp_norm"] = product_norm(d, s.dfluid.monolithic());
  ctx.checks.add_flag("converged", s.report.converged);
  ctx.checks.add("contraction", eta, "<", 1.0);
  if (get<bool>(c, "sensitivity.monolithic_check")) {
    const auto mono = solver.solve_monolithic(dg);
    FEFunction du = s.du;
    du.coefficients -= mono.du.coefficients;
    const double scale = d.h1_norm(mono.du) + product_norm(d, mono.dfluid.monolithic());
    const double diff = d.h1_norm(du) + product_norm(d, s.dfluid.monolithic() - mono.dfluid.monolithic());
    ctx.checks.add("monolithic_agreement", scale > 0 ? diff / scale : diff, "<=", 1e-8);
  }
}

void run_taylor(Context& ctx) {
  const auto& c = ctx.config;
  const Discretization d = make_disc(c);
  const FSIProblem problem(d, get<double>(c, "physics.nu"), lame_of(c));
  auto opts = coupling_of(c);
  opts.tol = get<double>(c, "taylor.coupling_tol");
  opts.fluid.tol = get<double>(c, "taylor.fluid_tol");
  opts.max_outer_iter = std::max(opts.max_outer_iter, 400);
  const auto rep = taylor_test(problem, profile_of(c, "inflow", get<double>(c, "inflow.magnitude")),
                               profile_of(c, "direction", get<double>(c, "direction.magnitude")),
                               get<std::vector<double>>(c, "taylor.h"), opts,
                               {get<double>(c, "taylor.sensitivity_tol"), get<int>(c, "sensitivity.max_iter")});
  std::ostringstream os;
  write_taylor_csv(os, rep);
  ctx.out.write_text("report_taylor.csv", os.str());
  const double min_slope = get<double>(c, "taylor.min_slope");
  ctx.metrics["derivative_norm_u"] = rep.derivative_norm_u;
  ctx.metrics["derivative_norm_w"] = rep.derivative_norm_w;
  ctx.metrics["derivative_norm_p"] = rep.derivative_norm_p;
  ctx.checks.add("valid_rows", rep.valid_rows(), ">=", 3);
  ctx.checks.add("slope_u", rep.slope_u, ">=", min_slope);
  ctx.checks.add("slope_w", rep.slope_w, ">=", min_slope);
  ctx.checks.add("slope_p", rep.slope_p, ">=", min_slope);
}

void run_mms(Context& ctx) {
  const auto& c = ctx.config;
  const double nu = get<double>(c, "physics.nu");
  const bool trig = get<std::string>(c, "mms.solution") == "trigonometric";
  const auto res = mms_convergence_study(trig ? trigonometric_solution(nu) : polynomial_solution(nu),
                                         get<int>(c, "mms.levels"), get<double>(c, "mms.h0"), nu);
  std::ostringstream os;
  os << "level,h,dofs,error_w_h1,error_p_l2,rate_w,rate_p,picard_iterations\n";
  for (std::size_t k = 0; k < res.levels.size(); ++k) {
    const auto& l = res.levels[k];
    double rw = 0.0, rp = 0.0;
    if (k > 0) {
      const auto& prev = res.levels[k - 1];
      const double lh = std::log(prev.h / l.h);
      rw = std::log(prev.error_w_h1 / l.error_w_h1) / lh;
      rp = std::log(prev.error_p_l2 / l.error_p_l2) / lh;
    }
    os << k << ',' << format_double(l.h) << ',' << l.dofs << ',' << format_double(l.error_w_h1) << ','
       << format_double(l.error_p_l2) << ',' << format_double(rw) << ',' << format_double(rp) << ','
       << l.picard_iterations << '\n';
  }
  ctx.out.write_text("report_mms.csv", os.str());
  ctx.metrics["rate_w_fit"] = res.rate_w_fit;
  ctx.metrics["rate_p_fit"] = res.rate_p_fit;
  ctx.metrics["rate_w_last"] = res.rate_w_last;
  ctx.metrics["rate_p_last"] = res.rate_p_last;
  if (trig) {
    ctx.checks.add("rate_w_fit_low", res.rate_w_fit, ">=", 1.8);
    ctx.checks.add("rate_w_fit_high", res.rate_w_fit, "<=", 2.2);
    ctx.checks.add("rate_p_fit_low", res.rate_p_fit, ">=", 1.7);
    ctx.checks.add("rate_p_fit_high", res.rate_p_fit, "<=", 2.3);
  } else {
    double ew = 0.0, ep = 0.0;
    for (const auto& l : res.levels) ew = std::max(ew, l.error_w_h1), ep = std::max(ep, l.error_p_l2);
    ctx.checks.add("exact_velocity", ew, "<=", 1e-10);
    ctx.checks.add("exact_pressure", ep, "<=", 1e-10);
  }
}

void run_probes(Context& ctx) {
  const auto& c = ctx.config;
  const Discretization d = make_disc(c);
  const double nu = get<double>(c, "physics.nu");
  const FSIProblem problem(d, nu, lame_of(c));
  const auto opts = coupling_of(c);
  const auto fields = TransformFields::make_identity(d);
  const auto dg = profile_of(c, "direction", get<double>(c, "direction.magnitude"));
  const auto seed = static_cast<std::uint64_t>(get<std::int64_t>(c, "seed"));
  std::ostringstream os;
  os << "magnitude,picard_ratio,fsi_ratio,eta_power,eta_t_iteration,t_iteration_converged\n";
  std::vector<double> picard, outer, eta;
  bool all_contract = true;
  for (double m : get<std::vector<double>>(c, "probes.magnitudes")) {
    const auto g = profile_of(c, "inflow", m);
    const auto ns = problem.fluid().solve(fields, {g, {}}, {}, opts.fluid).second;
    const FSIState s = coupled_solve(ctx, problem, g, opts);
    const SensitivitySolver solver(problem, s, opts.traction);
    const auto probe = contraction_probe(solver, dg, get<int>(c, "probes.samples"), seed, get<int>(c, "probes.power_steps"));
    picard.push_back(observed_ratio(ns.increments, opts.fluid.tol));
    outer.push_back(observed_ratio(s.report.increments, opts.tol));
    eta.push_back(probe.eta_power);
    all_contract = all_contract && probe.eta_power < 1.0 && probe.t_iteration_converged;
    os << format_double(m) << ',' << format_double(picard.back()) << ',' << format_double(outer.back()) << ','
       << format_double(probe.eta_power) << ',' << format_double(probe.eta_t_iteration) << ','
       << (probe.t_iteration_converged ? 1 : 0) << '\n';
  }
  ctx.out.write_text("report_probes.csv", os.str());
  auto increasing = [](const std::vector<double>& v) {
    for (std::size_t k = 1; k < v.size(); ++k)
      if (!(v[k] > v[k - 1])) return false;
    return true;
  };
  ctx.checks.add_flag("picard_ratio_increasing", increasing(picard));
  ctx.checks.add_flag("fsi_ratio_increasing", increasing(outer));
  ctx.checks.add_flag("eta_increasing", increasing(eta));
  ctx.checks.add_flag("contraction", all_contract);
}

}  // namespace

RunResult run(const std::string& name, const json& resolved, const fs::path& out) {
  RunResult result;
  std::unique_ptr<ArtifactWriter> writer;
  json summary = json::object();
  auto fail = [&](int code, const std::string& category, const std::string& msg) {
    result.exit_code = code;
    result.message = msg;
    summary["status"] = category;
    summary["error"] = msg;
    spdlog::error("{}: {}", category, msg);
  };
  try {
    const auto& info = scenario(name);
    writer = std::make_unique<ArtifactWriter>(out, info.name, resolved);
    Context ctx{resolved, *writer, {}, json::object()};
    static const std::map<std::string, void (*)(Context&)> table = {
        {"mesh", run_mesh},       {"solve-ns", run_solve_ns}, {"solve-fsi", run_solve_fsi},
        {"sensitivity", run_sensitivity}, {"taylor-test", run_taylor}, {"mms", run_mms},
        {"probes", run_probes}};
    spdlog::info("running scenario {} (config {})", name, writer->config_hash());
    try {
      table.at(name)(ctx);
      summary["checks"] = ctx.checks.to_json();
      summary["metrics"] = ctx.metrics;
      summary["pass"] = ctx.checks.all();
      summary["status"] = ctx.checks.all() ? "ok" : "checks_failed";
      if (!ctx.checks.all()) {
        result.exit_code = exit_checks_failed;
        result.message = "one or more checks failed";
      }
    } catch (...) {
      summary["checks"] = ctx.checks.to_json();
      summary["metrics"] = ctx.metrics;
      summary["pass"] = false;
      throw;
    }
  } catch (const ConfigError& e) {
    fail(exit_config, "config_error", e.what());
  } catch (const GeometryError& e) {
    fail(exit_config, "config_error", e.what());
  } catch (const FSIError& e) {
    fail(exit_divergence, "divergence", e.what());
  } catch (const DivergenceError& e) {
    fail(exit_divergence, "divergence", e.what());
  } catch (const MeshTanglingError& e) {
    fail(exit_divergence, "divergence", e.what());
  } catch (const std::exception& e) {
    fail(exit_internal, "internal_error", e.what());
  }
  if (writer) {
    try {
      writer->write_summary(summary);
    } catch (const std::exception& e) {
      if (result.exit_code == exit_ok) fail(exit_internal, "internal_error", e.what());
    }
  }
  result.summary = std::move(summary);
  return result;
}

}  // namespace fsisens::cli
