#include <cmath>
#include <fstream>
#include <sstream>

#include "cli_internal.hpp"
#include "fsisens/fsi.hpp"

namespace fsisens::cli {

namespace {

std::vector<std::string> keys_with_prefix(std::initializer_list<std::string> prefixes) {
  std::vector<std::string> out;
  for (const auto& k : config_registry())
    for (const auto& p : prefixes)
      if (k.key == p || k.key.rfind(p + ".", 0) == 0) {
        out.push_back(k.key);
        break;
      }
  return out;
}

json::json_pointer pointer(const std::string& dotted) {
  std::string p;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) p += "/" + part;
  return json::json_pointer(p);
}

void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object())
      flatten(*it, key, out);
    else
      out.emplace_back(key, *it);
  }
}

bool same_kind(const json& def, const json& v) {
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_string()) return v.is_string();
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_number()) return v.is_number();
  if (def.is_array()) {
    if (!v.is_array()) return false;
    for (const auto& x : v)
      if (!x.is_number()) return false;
    return true;
  }
  return false;
}

std::string kind_name(const json& def) {
  if (def.is_boolean()) return "a boolean";
  if (def.is_string()) return "a string";
  if (def.is_number_integer()) return "an integer";
  if (def.is_number()) return "a number";
  return "an array of numbers";
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key + ": " + what);
}

void validate(const json& c) {
  try {
    geometry_of(c).validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("geometry: ") + e.what());
  }
  require(get<int>(c, "geometry.refinements") >= 0 && get<int>(c, "geometry.refinements") <= 4,
          "geometry.refinements", "must lie in [0, 4]");
  require(get<double>(c, "physics.nu") > 0, "physics.nu", "viscosity must be positive");
  require(get<double>(c, "physics.mu") > 0, "physics.mu", "shear modulus must be positive");
  require(get<double>(c, "physics.lambda") >= 0, "physics.lambda", "first Lame parameter must be non-negative");
  require(std::isfinite(get<double>(c, "inflow.magnitude")), "inflow.magnitude", "must be finite");
  require(std::isfinite(get<double>(c, "direction.magnitude")), "direction.magnitude", "must be finite");
  for (const char* k : {"inflow.profile", "direction.profile"}) {
    const auto p = get<std::string>(c, k);
    require(p == "parabolic" || p == "sine", k, "profile must be 'parabolic' or 'sine'");
  }
  require(get<double>(c, "fluid.tol") > 0, "fluid.tol", "tolerance must be positive");
  require(get<int>(c, "fluid.max_iter") >= 1, "fluid.max_iter", "must be at least 1");
  try {
    coupling_of(c).validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("coupling: ") + e.what());
  }
  require(get<double>(c, "sensitivity.tol") > 0, "sensitivity.tol", "tolerance must be positive");
  require(get<int>(c, "sensitivity.max_iter") >= 1, "sensitivity.max_iter", "must be at least 1");
  const auto hs = get<std::vector<double>>(c, "taylor.h");
  require(hs.size() >= 3, "taylor.h", "needs at least three step sizes");
  for (std::size_t i = 0; i < hs.size(); ++i)
    require(hs[i] > 0 && (i == 0 || hs[i] < hs[i - 1]), "taylor.h", "step sizes must be positive and decreasing");
  for (const char* k : {"taylor.coupling_tol", "taylor.fluid_tol", "taylor.sensitivity_tol", "taylor.min_slope"})
    require(get<double>(c, k) > 0, k, "must be positive");
  const auto sol = get<std::string>(c, "mms.solution");
  require(sol == "trigonometric" || sol == "polynomial", "mms.solution", "must be 'trigonometric' or 'polynomial'");
  require(get<int>(c, "mms.levels") >= 2 && get<int>(c, "mms.levels") <= 6, "mms.levels", "must lie in [2, 6]");
  require(get<double>(c, "mms.h0") > 0 && get<double>(c, "mms.h0") <= 0.5, "mms.h0", "must lie in (0, 0.5]");
  const auto ms = get<std::vector<double>>(c, "probes.magnitudes");
  require(ms.size() >= 2, "probes.magnitudes", "needs at least two magnitudes");
  for (std::size_t i = 0; i < ms.size(); ++i)
    require(ms[i] >= 0 && (i == 0 || ms[i] > ms[i - 1]), "probes.magnitudes",
            "magnitudes must be non-negative and increasing");
  require(get<int>(c, "probes.samples") >= 1, "probes.samples", "must be at least 1");
  require(get<int>(c, "probes.power_steps") >= 4, "probes.power_steps", "must be at least 4");
  require(get<std::int64_t>(c, "seed") >= 0, "seed", "must be non-negative");
}

}  // namespace

const std::vector<KeyInfo>& config_registry() {
  static const std::vector<KeyInfo> reg = {
      {"geometry.length", 4.0, "channel length"},
      {"geometry.height", 1.0, "channel height"},
      {"geometry.obstacle", true, "include the elastic obstacle"},
      {"geometry.obstacle_x", 1.2, "obstacle centre, x"},
      {"geometry.obstacle_y", 0.5, "obstacle centre, y"},
      {"geometry.outer_side", 0.4, "side of the elastic square"},
      {"geometry.inner_side", 0.2, "side of the clamped hole"},
      {"geometry.h", 0.08, "target edge length"},
      {"geometry.refinements", 0, "uniform refinements after meshing"},
      {"physics.nu", 1.0, "kinematic viscosity"},
      {"physics.lambda", 75.0, "first Lame parameter"},
      {"physics.mu", 50.0, "shear modulus"},
      {"inflow.magnitude", 0.05, "peak inflow velocity"},
      {"inflow.profile", "parabolic", "inflow shape: parabolic | sine"},
      {"fluid.tol", 1e-10, "Picard relative increment tolerance"},
      {"fluid.max_iter", 50, "Picard iteration limit"},
      {"coupling.omega", 1.0, "relaxation in (0, 1]"},
      {"coupling.tol", 1e-9, "outer relative H1 increment tolerance"},
      {"coupling.max_iter", 100, "outer iteration limit"},
      {"coupling.traction", "full-vector", "traction: full-vector | normal-projected"},
      {"coupling.warm_start", true, "reuse the fluid state between outer iterations"},
      {"sensitivity.tol", 1e-10, "sensitivity fixed-point tolerance"},
      {"sensitivity.max_iter", 200, "sensitivity iteration limit"},
      {"sensitivity.monolithic_check", false, "also solve the coupled linear system directly"},
      {"direction.magnitude", 1.0, "magnitude of the inflow perturbation"},
      {"direction.profile", "parabolic", "perturbation shape: parabolic | sine"},
      {"taylor.h", json::array({1e-2, 3e-3, 1e-3, 3e-4}), "step sizes, decreasing"},
      {"taylor.min_slope", 1.8, "required remainder slope"},
      {"taylor.coupling_tol", 1e-12, "outer tolerance used by the Taylor solves"},
      {"taylor.fluid_tol", 1e-13, "Picard tolerance used by the Taylor solves"},
      {"taylor.sensitivity_tol", 1e-13, "sensitivity tolerance used by the Taylor test"},
      {"mms.solution", "trigonometric", "manufactured solution: trigonometric | polynomial"},
      {"mms.levels", 4, "number of refinement levels"},
      {"mms.h0", 0.25, "coarsest edge length on the unit square"},
      {"probes.magnitudes", json::array({0.0125, 0.025, 0.05, 0.1}), "inflow magnitudes of the sweep"},
      {"probes.samples", 3, "random starting vectors of the power iteration"},
      {"probes.power_steps", 30, "power iteration steps"},
      {"seed", 0, "random seed for probes"},
  };
  return reg;
}

const std::vector<ScenarioInfo>& scenarios() {
  static const std::vector<ScenarioInfo> list = [] {
    const auto geom = keys_with_prefix({"geometry"});
    std::vector<ScenarioInfo> s;
    s.push_back({"mesh", "Build and validate the tagged channel mesh.",
                 "Structured triangulation of the channel with the annular elastic obstacle; checks orientation, "
                 "conformity, subdomain areas, boundary tags and the Euler characteristic.",
                 geom, {"mesh.txt", "fields_mesh.vtk", "summary.json"}});
    s.push_back({"solve-ns", "Steady Navier-Stokes in the undeformed channel.",
                 "Taylor-Hood P2/P1 discretization with do-nothing outflow, solved by Picard iteration with a "
                 "constant Stokes operator and lagged convection.",
                 keys_with_prefix({"geometry", "physics.nu", "inflow", "fluid"}),
                 {"fields_fluid.vtk", "report_picard.csv", "summary.json"}});
    s.push_back({"solve-fsi", "Stationary fluid-structure coupling by partitioned fixed point.",
                 "Fluid equations pulled back through the harmonic flow map (cofactor K, Jacobian J, diffusion "
                 "A = J^-1 K^T K), pressure traction p K n on the interface, linear elasticity, relaxed "
                 "displacement update.",
                 keys_with_prefix({"geometry", "physics", "inflow", "fluid", "coupling"}),
                 {"fields_fluid.vtk", "fields_solid.vtk", "report_fsi.csv", "summary.json"}});
    s.push_back({"sensitivity", "Derivative of the control-to-state map in one inflow direction.",
                 "Solves the two linearized fluid systems (inflow direction at fixed displacement and "
                 "displacement direction at fixed inflow, the latter carrying the flow-map shape terms) and "
                 "couples them through the traction derivative and the elasticity solve by a fixed point.",
                 keys_with_prefix({"geometry", "physics", "inflow", "fluid", "coupling", "sensitivity", "direction"}),
                 {"fields_fluid.vtk", "fields_solid.vtk", "fields_sensitivity_fluid.vtk",
                  "fields_sensitivity_solid.vtk", "report_sensitivity.csv", "summary.json"}});
    s.push_back({"taylor-test", "Taylor remainder test of the coupled solution map.",
                 "Remainders |Pi(g + h dg) - Pi(g) - h Pi'(g) dg| for u, w (H1) and p (L2) over a geometric "
                 "step schedule; passes when every fitted slope reaches taylor.min_slope.",
                 keys_with_prefix({"geometry", "physics", "inflow", "fluid", "coupling", "direction", "taylor"}),
                 {"report_taylor.csv", "summary.json"}});
    s.push_back({"mms", "Manufactured-solution convergence study of the fluid solver.",
                 "Untransformed Navier-Stokes on the unit square with body force and Neumann outflow data "
                 "from an exact solution; velocity H1 and pressure L2 errors over uniform refinements.",
                 keys_with_prefix({"physics.nu", "mms"}), {"report_mms.csv", "summary.json"}});
    s.push_back({"probes", "Contraction constants along an inflow sweep.",
                 "For each inflow magnitude: Picard ratio in the rigid channel, outer coupling ratio, power "
                 "iteration estimate of the sensitivity coupling operator and the constant-coefficient "
                 "linearized iteration ratio.",
                 keys_with_prefix({"geometry", "physics", "inflow.profile", "fluid", "coupling", "direction",
                                   "probes", "seed"}),
                 {"report_probes.csv", "summary.json"}});
    return s;
  }();
  return list;
}

const ScenarioInfo& scenario(const std::string& name) {
  for (const auto& s : scenarios())
    if (s.name == name) return s;
  throw ConfigError("unknown scenario '" + name + "'");
}

json default_config() {
  json c = json::object();
  for (const auto& k : config_registry()) c[pointer(k.key)] = k.default_value;
  return c;
}

json resolve_config(const json& user, std::optional<std::uint64_t> seed) {
  if (!user.is_object()) throw ConfigError("config must be a JSON object");
  json c = default_config();
  std::vector<std::pair<std::string, json>> flat;
  flatten(user, "", flat);
  for (const auto& [key, value] : flat) {
    const KeyInfo* info = nullptr;
    for (const auto& k : config_registry())
      if (k.key == key) info = &k;
    if (!info) throw ConfigError("unknown config key '" + key + "'");
    if (!same_kind(info->default_value, value)) throw ConfigError(key + ": expected " + kind_name(info->default_value));
    c[pointer(key)] = value;
  }
  if (seed) c["seed"] = *seed;
  validate(c);
  return c;
}

json load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

std::string describe(const std::string& name) {
  const auto& s = scenario(name);
  std::ostringstream os;
  os << s.name << ": " << s.summary << "\n\n" << s.method << "\n\nconfig keys:\n";
  for (const auto& key : s.keys)
    for (const auto& k : config_registry())
      if (k.key == key) os << "  " << key << " = " << k.default_value.dump() << "  (" << k.help << ")\n";
  os << "\noutputs:\n";
  for (const auto& o : s.outputs) os << "  " << o << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------------------------

template <class T>
T get(const json& c, const std::string& key) {
  return c.at(pointer(key)).get<T>();
}
template double get<double>(const json&, const std::string&);
template int get<int>(const json&, const std::string&);
template bool get<bool>(const json&, const std::string&);
template std::int64_t get<std::int64_t>(const json&, const std::string&);
template std::string get<std::string>(const json&, const std::string&);
template std::vector<double> get<std::vector<double>>(const json&, const std::string&);

ChannelGeometry geometry_of(const json& c) {
  const double h = get<double>(c, "geometry.h");
  ChannelGeometry g = ChannelGeometry::straight_channel(get<double>(c, "geometry.length"),
                                                        get<double>(c, "geometry.height"), h);
  if (get<bool>(c, "geometry.obstacle")) {
    const Point centre{get<double>(c, "geometry.obstacle_x"), get<double>(c, "geometry.obstacle_y")};
    g.obstacle_outer = axis_aligned_square(centre, get<double>(c, "geometry.outer_side"));
    g.obstacle_inner = axis_aligned_square(centre, get<double>(c, "geometry.inner_side"));
  }
  return g;
}

CouplingOptions coupling_of(const json& c) {
  CouplingOptions o;
  o.omega = get<double>(c, "coupling.omega");
  o.tol = get<double>(c, "coupling.tol");
  o.max_outer_iter = get<int>(c, "coupling.max_iter");
  try {
    o.traction = parse_traction_mode(get<std::string>(c, "coupling.traction"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("coupling.traction: ") + e.what());
  }
  o.warm_start = get<bool>(c, "coupling.warm_start");
  o.fluid = {get<double>(c, "fluid.tol"), get<int>(c, "fluid.max_iter")};
  return o;
}

VelocityData profile_of(const json& c, const std::string& group, double magnitude) {
  const double height = get<double>(c, "geometry.height");
  if (get<std::string>(c, group + ".profile") == "parabolic") return InflowProfile{magnitude, height};
  return [magnitude, height](const Point& x) { return Vec2(magnitude * std::sin(M_PI * x.y / height), 0.0); };
}

}  // namespace fsisens::cli
