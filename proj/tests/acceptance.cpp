// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>

#include "fsisens/cli.hpp"
#include "fsisens/sensitivity.hpp"
#include "oracles.hpp"

using namespace fsisens;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [violated]");
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

const Discretization& default_disc() {
  static const Discretization d(build_channel_mesh(ChannelGeometry::default_geometry()));
  return d;
}
const Discretization& coarse_disc() {
  static const Discretization d(build_channel_mesh(ChannelGeometry::default_geometry(0.2)));
  return d;
}

constexpr double nu = 1.0;
const Lame lame{75.0, 50.0};
const InflowProfile g_default{0.05, 1.0};
const VelocityData dg_default = InflowProfile{1.0, 1.0};

CouplingOptions tight() {
  CouplingOptions o;
  o.tol = 1e-12;
  o.fluid.tol = 1e-13;
  o.max_outer_iter = 400;
  return o;
}

const FSIProblem& default_problem() {
  static const FSIProblem p(default_disc(), nu, lame);
  return p;
}
const FSIState& default_base() {
  static const FSIState s = default_problem().solve(g_default, tight());
  return s;
}

double observed_ratio(const std::vector<double>& inc, double tol) {
  double r = 0.0;
  for (std::size_t k = 1; k < inc.size(); ++k)
    if (inc[k] > 100.0 * tol && inc[k - 1] > 0.0) r = std::max(r, inc[k] / inc[k - 1]);
  return r;
}

bool increasing(const std::vector<double>& v) {
  for (std::size_t k = 1; k < v.size(); ++k)
    if (!(v[k] > v[k - 1])) return false;
  return true;
}

double max_entry_diff(const SparseMatrix& a, const SparseMatrix& b) {
  const SparseMatrix d = a - b;
  double m = 0.0;
  for (int k = 0; k < d.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(d, k); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

double max_block_diff(const SparseSaddleSystem& x, const SparseSaddleSystem& y) {
  return std::max({max_entry_diff(x.A, y.A), max_entry_diff(x.B, y.B), max_entry_diff(x.C, y.C),
                   max_entry_diff(x.D, y.D)});
}

// ---------------------------------------------------------------------------------------------

Outcome identity_reduction() {
  Outcome o;
  const auto& d = default_disc();
  const auto fields = transform_fields(d, flow_map(d, FEFunction::zero(d.displacement())));
  const auto w_hat = interpolate(d, spaces::velocity, [](const Point& x) {
    return Vec2(std::sin(x.x) * x.y * (1 - x.y), std::cos(2 * x.x) * x.y);
  });
  const double diff_oseen =
      max_block_diff(assemble_transformed_oseen(d, fields, fields, &w_hat, &w_hat, nu), assemble_oseen_identity(d, w_hat, nu));
  const double diff_stokes = max_block_diff(assemble_transformed_oseen(d, fields, fields, nullptr, nullptr, nu),
                                            assemble_stokes(d, nu));
  o.require(diff_oseen <= 1e-14, "Oseen entry diff " + num(diff_oseen));
  o.require(diff_stokes <= 1e-14, "Stokes entry diff " + num(diff_stokes));
  const FluidSolver solver(d, nu);
  const auto [s, rep] = solver.solve(fields, inflow_data(g_default), {}, {1e-13, 80});
  const auto ref = oracle::newton_navier_stokes(d, inflow_data(g_default), nu);
  const double rel = product_norm(d, s.monolithic() - ref.monolithic()) / product_norm(d, ref.monolithic());
  o.require(rep.converged && rel <= 1e-8, "Newton oracle rel diff " + num(rel) + " on " + std::to_string(fluid_size(d)) + " dofs");
  return o;
}

/// Even seeds: smooth random modes of amplitude 0.01. Odd seeds: a rough random interface trace
/// with amplitude far below the mesh size.
FEFunction random_admissible_displacement(const Discretization& d, std::uint64_t seed) {
  if (seed % 2) return random_interface_displacement(d, seed, 2e-3);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::array<double, 8> a;
  for (auto& x : a) x = u(rng);
  return interpolate(d, spaces::displacement, [a](const Point& p) {
    const double x = p.x - 1.2, y = p.y - 0.5;
    return Vec2(0.01 * (a[0] + a[1] * x + a[2] * y + a[3] * std::sin(2 * M_PI * y) + a[4] * std::cos(M_PI * x)),
                0.01 * (a[5] + a[6] * x * y + a[7] * std::sin(2 * M_PI * p.x)));
  });
}

Outcome piola_identity() {
  Outcome o;
  const auto& d = default_disc();
  double worst_div = 0.0, worst_aff = 0.0;
  int admissible = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const FEFunction u = random_admissible_displacement(d, seed);
    const FlowMap map = flow_map(d, u);
    const auto f = transform_fields(d, map);
    admissible += f.min_J > 0.0;
    worst_div = std::max(worst_div, max_cofactor_divergence(d, map));
    const double alpha = 0.37 + 0.1 * static_cast<double>(seed);
    FEFunction ua = u;
    ua.coefficients *= alpha;
    const auto fa = transform_fields(d, flow_map(d, ua), false);
    for (std::size_t i = 0; i < f.K.size(); ++i) {
      const Mat2 lhs = fa.K[i] - Mat2::Identity();
      const Mat2 rhs = alpha * (f.K[i] - Mat2::Identity());
      worst_aff = std::max(worst_aff, (lhs - rhs).cwiseAbs().maxCoeff());
    }
  }
  o.require(admissible == 20, std::to_string(admissible) + "/20 admissible");
  o.require(worst_div <= 1e-10, "max |div K| " + num(worst_div));
  o.require(worst_aff <= 1e-13, "affinity defect " + num(worst_aff));
  return o;
}

Outcome poiseuille() {
  Outcome o;
  const Discretization d(build_channel_mesh(ChannelGeometry::straight_channel(4.0, 1.0, 0.1)));
  const double m = 0.3;
  ExactSolution e;
  e.w = [m](const Point& x) { return InflowProfile{m, 1.0}(x); };
  e.grad_w = [m](const Point& x) {
    Mat2 g = Mat2::Zero();
    g(0, 1) = m * 4.0 * (1.0 - 2.0 * x.y);
    return g;
  };
  e.p = [m](const Point& x) { return 8.0 * nu * m * (4.0 - x.x); };
  const auto f = TransformFields::make_identity(d);
  const auto [s, rep] = solve_navier_stokes(d, f, InflowProfile{m, 1.0}, {}, nu);
  const auto [ew, ep] = solution_errors(d, s, e);
  const double outflow = outflow_functional(d, nullptr, s, nu);
  o.require(rep.converged && rep.iterations <= 3, std::to_string(rep.iterations) + " Picard iterations");
  o.require(ew <= 1e-9, "velocity H1 error " + num(ew));
  o.require(outflow <= 1e-9, "outflow residual " + num(outflow));
  o.detail += "; pressure L2 error " + num(ep);
  return o;
}

Outcome mms() {
  Outcome o;
  const auto r = mms_convergence_study(trigonometric_solution(nu), 4, 0.25, nu);
  auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
  o.require(in(r.rate_w_fit, 1.8, 2.2) && in(r.rate_w_last, 1.8, 2.2),
            "velocity H1 rate fit " + num(r.rate_w_fit) + " last " + num(r.rate_w_last));
  o.require(in(r.rate_p_fit, 1.7, 2.3) && in(r.rate_p_last, 1.7, 2.3),
            "pressure L2 rate fit " + num(r.rate_p_fit) + " last " + num(r.rate_p_last));
  return o;
}

Outcome contraction() {
  Outcome o;
  const auto& d = default_disc();
  const auto& p = default_problem();
  const auto rigid = TransformFields::make_identity(d);
  const CouplingOptions opts;
  std::vector<double> picard, outer;
  double picard_op = 0.0, outer_op = 0.0;
  for (double m : {0.0125, 0.025, 0.05, 0.1}) {
    const InflowProfile g{m, 1.0};
    const auto ns = p.fluid().solve(rigid, inflow_data(g), {}, opts.fluid).second;
    const auto s = p.solve(g, opts);
    const double fr = observed_ratio(s.report.increments, opts.tol);
    picard.push_back(observed_ratio(ns.increments, opts.fluid.tol));
    outer.push_back(fr);
    if (m == g_default.magnitude) {
      // Picard on the converged deformed geometry, from rest
      const auto def = p.fluid().solve(s.fields, inflow_data(g), {}, opts.fluid).second;
      picard_op = std::max(picard.back(), observed_ratio(def.increments, opts.fluid.tol));
      outer_op = fr;
      o.require(ns.converged && def.converged && s.report.converged, "both loops converge at 0.05");
    }
  }
  o.require(picard_op <= 0.9, "Picard ratio " + num(picard_op));
  o.require(outer_op <= 0.5, "outer ratio " + num(outer_op));
  o.require(increasing(picard), "Picard sweep " + num(picard[0]) + ".." + num(picard.back()) + " increasing");
  o.require(increasing(outer), "outer sweep " + num(outer[0]) + ".." + num(outer.back()) + " increasing");
  return o;
}

Outcome linearized_consistency() {
  Outcome o;
  const auto& d = default_disc();
  const std::vector<double> hs{1e-2, 3e-3, 1e-3};
  const VelocityData dg = [](const Point& x) { return Vec2(std::sin(M_PI * x.y), 0.2 * std::sin(2 * M_PI * x.y)); };
  const auto rg = fluid_taylor_inflow(default_problem(), default_base(), g_default, dg, hs, tight());
  const auto du = interpolate(d, spaces::displacement,
                              [](const Point& x) { return Vec2(0.02 * (x.y - 0.5), 0.01 * (x.x - 1.2)); });
  const auto ru = fluid_taylor_displacement(default_problem(), default_base(), g_default, du, hs, tight());
  o.require(rg.slope >= 1.8, "inflow direction slope " + num(rg.slope));
  o.require(ru.slope >= 1.8, "displacement direction slope " + num(ru.slope));
  return o;
}

double rel_state_diff(const Discretization& d, const SensitivityState& a, const SensitivityState& b) {
  FEFunction du = a.du;
  du.coefficients -= b.du.coefficients;
  const double scale = d.h1_norm(b.du) + product_norm(d, b.dfluid.monolithic());
  return (d.h1_norm(du) + product_norm(d, a.dfluid.monolithic() - b.dfluid.monolithic())) / scale;
}

Outcome taylor() {
  Outcome o;
  const auto& d = default_disc();
  const auto rep = taylor_test(default_problem(), g_default, dg_default, {1e-2, 3e-3, 1e-3, 3e-4}, tight(),
                               {1e-13, 200});
  o.require(rep.valid_rows() >= 3, std::to_string(rep.valid_rows()) + " valid rows");
  o.require(rep.slope_u >= 1.8 && rep.slope_w >= 1.8 && rep.slope_p >= 1.8,
            "slopes u " + num(rep.slope_u) + " w " + num(rep.slope_w) + " p " + num(rep.slope_p));
  const SensitivitySolver s(default_problem(), default_base(), TractionMode::full_vector);
  const SensitivityOptions so{1e-14, 300};
  const VelocityData dg2 = [](const Point& x) { return Vec2(std::sin(M_PI * x.y), 0.0); };
  const auto a = s.solve(dg_default, so), b = s.solve(dg2, so);
  const auto c = s.solve([&](const Point& x) { return Vec2(2.0 * dg_default(x) - 0.5 * dg2(x)); }, so);
  SensitivityState expect;
  expect.du = a.du;
  expect.du.coefficients = 2.0 * a.du.coefficients - 0.5 * b.du.coefficients;
  expect.dfluid = FluidState::from_monolithic(d, 2.0 * a.dfluid.monolithic() - 0.5 * b.dfluid.monolithic());
  const double lin = rel_state_diff(d, c, expect);
  o.require(lin <= 1e-10, "linearity defect " + num(lin));
  return o;
}

Outcome monolithic() {
  Outcome o;
  const auto& d = coarse_disc();
  const FSIProblem p(d, nu, lame);
  for (auto mode : {TractionMode::full_vector, TractionMode::normal_projected}) {
    auto opts = tight();
    opts.traction = mode;
    const auto base = p.solve(g_default, opts);
    const SensitivitySolver s(p, base, mode);
    const double diff = rel_state_diff(d, s.solve(dg_default, {1e-14, 300}), s.solve_monolithic(dg_default));
    o.require(diff <= 1e-8, std::string(to_string(mode)) + " rel diff " + num(diff));
  }
  o.detail += "; " + std::to_string(fluid_size(d) + d.displacement().n_dofs()) + " dofs";
  return o;
}

Outcome t_iteration() {
  Outcome o;
  const auto& d = default_disc();
  const SensitivitySolver s(default_problem(), default_base(), TractionMode::full_vector);
  SolverReport rep;
  const auto [it, direct] = s.t_iteration_vs_direct(dg_default, {1e-13, 300}, &rep);
  const double eta = rep.max_ratio();
  o.require(rep.converged, "T-iteration converged in " + std::to_string(rep.iterations));
  const double diff = product_norm(d, it.monolithic() - direct.monolithic()) / product_norm(d, direct.monolithic());
  o.require(diff <= 1e-8, "rel diff to direct " + num(diff));
  o.require(eta < 1.0, "eta " + num(eta));
  return o;
}

std::map<std::string, std::string> read_dir(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    files[e.path().filename().string()] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  return files;
}

Outcome symmetry_determinism() {
  Outcome o;
  const auto& d = default_disc();
  const auto& b = default_base();
  const auto mv = mirror_scalar_map(d.velocity(), 1.0);
  const auto ms = mirror_scalar_map(d.displacement(), 1.0);
  const auto mp = mirror_scalar_map(d.pressure(), 1.0);
  const double dw = (mirror_vector_field(d.velocity(), mv, b.fluid.w.coefficients) - b.fluid.w.coefficients).cwiseAbs().maxCoeff();
  const double dp = (mirror_scalar_field(mp, b.fluid.p.coefficients) - b.fluid.p.coefficients).cwiseAbs().maxCoeff();
  const double du = (mirror_vector_field(d.displacement(), ms, b.u.coefficients) - b.u.coefficients).cwiseAbs().maxCoeff();
  const SensitivitySolver s(default_problem(), b, TractionMode::full_vector);
  const auto sd = s.solve(dg_default, {1e-12, 200});
  const double ddu = (mirror_vector_field(d.displacement(), ms, sd.du.coefficients) - sd.du.coefficients).cwiseAbs().maxCoeff();
  o.require(std::max({dw, dp, du, ddu}) <= 1e-8,
            "mirror defects w " + num(dw) + " p " + num(dp) + " u " + num(du) + " du " + num(ddu));

  const fs::path root = fs::current_path() / "acceptance_runs";
  fs::remove_all(root);
  int identical = 0, total = 0;
  for (const std::string scen : {"solve-fsi", "sensitivity"}) {
    std::map<std::string, std::string> first;
    for (int threads : {1, 2, 4}) {
      set_num_threads(threads);
      const fs::path dir = root / (scen + "_t" + std::to_string(threads));
      const auto r = cli::run(scen, cli::resolve_config(cli::json::object()), dir);
      if (r.exit_code != 0) o.require(false, scen + " exit " + std::to_string(r.exit_code));
      const auto files = read_dir(dir);
      if (threads == 1) {
        first = files;
        continue;
      }
      ++total;
      identical += files == first && !files.empty();
    }
  }
  set_num_threads(1);
  o.require(identical == total, std::to_string(identical) + "/" + std::to_string(total) +
                                    " multi-thread reruns bit-identical to the single-thread artifacts");
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "identity reduction", 30, identity_reduction},
      {2, "Piola identity and cofactor affinity", 5, piola_identity},
      {3, "Poiseuille exactness", 10, poiseuille},
      {4, "manufactured-solution convergence", 180, mms},
      {5, "contraction regime", 120, contraction},
      {6, "linearized-solver consistency", 120, linearized_consistency},
      {7, "coupled Taylor test and linearity", 300, taylor},
      {8, "fixed-point vs monolithic sensitivity", 60, monolithic},
      {9, "T-iteration vs direct linearized solve", 60, t_iteration},
      {10, "symmetry and determinism", 60, symmetry_determinism},
  };
  cli::set_log_level("warn");
  // the shared default state is built once, outside the individual budgets
  default_base();
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_s) out.require(false, "runtime " + num(secs) + " s over budget " + num(c.budget_s) + " s");
    failed += !out.pass;
    std::printf("criterion %2d %s: %s (%s; %.1f s)\n", c.id, out.pass ? "PASS" : "FAIL", c.name, out.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
