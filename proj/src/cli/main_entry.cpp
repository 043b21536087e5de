#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cli_internal.hpp"

namespace fsisens::cli {

bool set_log_level(const std::string& name) {
  const auto lvl = spdlog::level::from_str(name);
  if (lvl == spdlog::level::off && name != "off") return false;
  spdlog::set_level(lvl);
  return true;
}

int main_entry(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_st("fsisens"));
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("FSISENS_LOG_LEVEL");
  if (!set_log_level(env ? env : "warn")) set_log_level("warn");

  CLI::App app{"Stationary fluid-structure interaction solver with shape sensitivities"};
  app.require_subcommand(1);

  std::string config_path, out_dir, log_level;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string chosen;
  for (const auto& s : scenarios()) {
    auto* sub = app.add_subcommand(s.name, s.summary);
    sub->add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_option("--seed", seed, "random seed for probes");
    sub->add_option("--log-level", log_level, "trace|debug|info|warn|err|critical|off");
    sub->add_option("--threads", threads, "assembly threads")->check(CLI::Range(1, 256));
    sub->callback([&chosen, name = s.name] { chosen = name; });
  }

  std::string describe_name;
  auto* describe_cmd = app.add_subcommand("describe", "print a scenario's inputs and outputs");
  describe_cmd->add_option("scenario", describe_name, "scenario name")->required();

  std::string dir_a, dir_b;
  double tol = 0.0;
  auto* compare_cmd = app.add_subcommand("compare", "per-field relative differences of two result directories");
  compare_cmd->add_option("first", dir_a)->required()->check(CLI::ExistingDirectory);
  compare_cmd->add_option("second", dir_b)->required()->check(CLI::ExistingDirectory);
  compare_cmd->add_option("--tol", tol, "relative tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    if (describe_cmd->parsed()) {
      std::cout << describe(describe_name);
      return exit_ok;
    }
    if (compare_cmd->parsed()) {
      const auto rep = compare(dir_a, dir_b, tol);
      for (const auto& p : rep.problems) std::cout << "problem: " << p << '\n';
      for (const auto& d : rep.diffs)
        std::cout << d.file << ' ' << d.field << ' ' << format_double(d.rel_diff)
                  << (d.rel_diff <= tol ? "" : "  EXCEEDS") << '\n';
      std::cout << (rep.pass ? "PASS" : "FAIL") << " (tolerance " << format_double(tol) << ")\n";
      return rep.pass ? exit_ok : exit_checks_failed;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_internal;
  }

  if (!log_level.empty() && !set_log_level(log_level)) {
    std::cerr << "error: unknown log level '" << log_level << "'\n";
    return exit_config;
  }
  set_num_threads(threads);
  json resolved;
  try {
    const json user = config_path.empty() ? json::object() : load_config_file(config_path);
    std::optional<std::uint64_t> seed_override;
    for (auto* sub : app.get_subcommands())
      if (sub->count("--seed")) seed_override = seed;
    resolved = resolve_config(user, seed_override);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  }
  const RunResult r = run(chosen, resolved, out_dir);
  std::cout << chosen << ": " << r.summary.value("status", "unknown");
  if (!r.message.empty()) std::cout << " - " << r.message;
  std::cout << '\n';
  if (r.summary.contains("checks"))
    for (auto it = r.summary["checks"].begin(); it != r.summary["checks"].end(); ++it)
      std::cout << "  " << it.key() << ": " << ((*it)["pass"].get<bool>() ? "pass" : "FAIL") << '\n';
  return r.exit_code;
}

}  // namespace fsisens::cli
