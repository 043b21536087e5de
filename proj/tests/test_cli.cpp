#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "fsisens/cli.hpp"
#include "fsisens/io.hpp"

using namespace fsisens;
namespace fs = std::filesystem;

namespace {

const bool quiet = cli::set_log_level("warn");

fs::path scratch(const std::string& name) {
  const fs::path p = fs::current_path() / "cli_test_runs" / name;
  fs::remove_all(p);
  return p;
}

cli::json coarse() { return cli::json{{"geometry", {{"h", 0.2}}}}; }

}  // namespace

TEST_CASE("content hash and number formatting") {
  CHECK(hex64(fnv1a64("")) == "cbf29ce484222325");
  CHECK(hex64(fnv1a64("a")) == "af63dc4c8601ec8c");
  CHECK(format_double(0.1) == "0.1");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("VTK writer round trip") {
  const Discretization d(build_channel_mesh(ChannelGeometry::straight_channel(1.0, 1.0, 0.5)));
  const auto u = interpolate(d, spaces::velocity, [](const Point& x) { return Vec2(x.x, -x.y); });
  const auto p = interpolate(d, spaces::pressure, [](const Point& x) { return Vec2(x.x + 2 * x.y, 0); });
  std::ostringstream os;
  write_p2_vtk(os, "t", d.velocity(),
               {nodal_vector("w", d.velocity(), u.coefficients),
                nodal_scalar_p1("p", d.velocity(), d.pressure(), p.coefficients)});
  CHECK(os.str().find("CELL_TYPES") != std::string::npos);
  std::istringstream is(os.str());
  const auto fields = read_vtk_fields(is);
  REQUIRE(fields.size() == 3);
  const auto& pts = fields[0].second;
  const auto& pv = fields[2].second;
  for (int i = 0; i < d.velocity().n_scalar(); ++i)
    CHECK(pv[i] == doctest::Approx(pts[3 * i] + 2 * pts[3 * i + 1]).epsilon(1e-14));
  CHECK_THROWS_AS(write_p2_vtk(os, "two\nlines", d.velocity(), {}), std::invalid_argument);
}

TEST_CASE("describe lists every key the scenario reads") {
  std::set<std::string> registry;
  for (const auto& k : cli::config_registry()) registry.insert(k.key);
  for (const auto& s : cli::scenarios()) {
    const std::string text = cli::describe(s.name);
    CHECK(!s.keys.empty());
    for (const auto& key : s.keys) {
      CHECK(registry.count(key) == 1);
      CHECK(text.find("  " + key + " = ") != std::string::npos);
    }
    for (const auto& o : s.outputs) CHECK(text.find(o) != std::string::npos);
  }
  CHECK(cli::describe("sensitivity").find("two linearized fluid systems") != std::string::npos);
  CHECK_THROWS_AS(cli::describe("warp-drive"), cli::ConfigError);
}

TEST_CASE("config resolution rejects unknown keys, wrong types and violated invariants") {
  const auto def = cli::resolve_config(cli::json::object());
  CHECK(def == cli::default_config());
  CHECK(cli::resolve_config(cli::json::object(), 7)["seed"] == 7);
  CHECK_THROWS_WITH_AS(cli::resolve_config({{"coupling", {{"omegaa", 1.0}}}}), doctest::Contains("coupling.omegaa"),
                       cli::ConfigError);
  CHECK_THROWS_WITH_AS(cli::resolve_config({{"fluid", {{"max_iter", 2.5}}}}), doctest::Contains("integer"),
                       cli::ConfigError);
  CHECK_THROWS_WITH_AS(cli::resolve_config({{"coupling", {{"omega", 1.5}}}}), doctest::Contains("omega"),
                       cli::ConfigError);
  CHECK_THROWS_AS(cli::resolve_config({{"physics", {{"mu", 0.0}}}}), cli::ConfigError);
  CHECK_THROWS_AS(cli::resolve_config({{"taylor", {{"h", {1e-3, 1e-2, 1e-4}}}}}), cli::ConfigError);
  CHECK_THROWS_AS(cli::resolve_config({{"geometry", {{"outer_side", 2.0}}}}), cli::ConfigError);
  CHECK_THROWS_AS(cli::resolve_config(cli::json::array()), cli::ConfigError);
}

TEST_CASE("mesh scenario writes validated artifacts with provenance") {
  const auto dir = scratch("mesh");
  const auto cfg = cli::resolve_config(coarse());
  const auto r = cli::run("mesh", cfg, dir);
  CHECK(r.exit_code == cli::exit_ok);
  CHECK(r.summary["checks"]["mesh_valid"]["pass"] == true);
  for (const char* f : {"mesh.txt", "fields_mesh.vtk", "summary.json"}) CHECK(fs::exists(dir / f));
  std::ifstream in(dir / "mesh.txt");
  const Mesh m = read_mesh(in);
  CHECK(validate_mesh(m).ok());
  std::ifstream js(dir / "summary.json");
  const auto summary = cli::json::parse(js);
  CHECK(summary["config"] == cfg);
  auto copy = summary;
  copy.erase("content_fnv1a64");
  CHECK(summary["content_fnv1a64"] == hex64(fnv1a64(copy.dump())));
}

TEST_CASE("failures map to exit categories") {
  const auto dir = scratch("tangle");
  auto cfg = coarse();
  cfg["inflow"] = {{"magnitude", 60.0}};
  cfg["coupling"] = {{"max_iter", 30}};
  const auto r = cli::run("solve-fsi", cli::resolve_config(cfg), dir);
  CHECK(r.exit_code == cli::exit_divergence);
  CHECK(r.summary["status"] == "divergence");
  CHECK(fs::exists(dir / "fields_last_iterate.vtk"));
  CHECK(cli::run("no-such-scenario", cli::resolve_config(coarse()), scratch("none")).exit_code == cli::exit_config);
}

TEST_CASE("compare: identical, thread-count reruns and a finer mesh") {
  const auto cfg = cli::resolve_config(coarse());
  const auto a = scratch("ns_a"), b = scratch("ns_b"), c = scratch("ns_c");
  REQUIRE(cli::run("solve-ns", cfg, a).exit_code == 0);
  set_num_threads(3);
  REQUIRE(cli::run("solve-ns", cfg, b).exit_code == 0);
  set_num_threads(1);
  const auto same = cli::compare(a, b, 0.0);
  CHECK(same.pass);
  for (const auto& d : same.diffs) CHECK(d.rel_diff == 0.0);
  auto finer = coarse();
  finer["geometry"]["h"] = 0.1;
  REQUIRE(cli::run("solve-ns", cli::resolve_config(finer), c).exit_code == 0);
  const auto diff = cli::compare(a, c, 1e-6);
  CHECK_FALSE(diff.pass);
  CHECK(!diff.problems.empty());
}

TEST_CASE("solve-fsi and taylor-test scenarios on the coarse mesh") {
  const auto cfg = cli::resolve_config(coarse());
  const auto r = cli::run("solve-fsi", cfg, scratch("fsi"));
  CHECK(r.exit_code == 0);
  CHECK(r.summary["checks"]["mirror_symmetry"]["pass"] == true);
  const auto dir = scratch("taylor");
  const auto t = cli::run("taylor-test", cfg, dir);
  CHECK(t.exit_code == 0);
  std::ifstream in(dir / "report_taylor.csv");
  std::string line;
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#' && line.rfind("h,", 0) != 0) ++rows;
  CHECK(rows >= 3);
  CHECK(t.summary["checks"]["slope_u"]["value"].get<double>() >= 1.8);
}
