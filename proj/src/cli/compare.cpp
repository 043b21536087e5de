#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cli_internal.hpp"

namespace fsisens::cli {

namespace fs = std::filesystem;

namespace {

double rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::isnan(a[i]) && std::isnan(b[i])) continue;
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  if (num == 0.0) return 0.0;
  return den > 0.0 ? num / den : num;
}

using Columns = std::vector<std::pair<std::string, std::vector<double>>>;

Columns read_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read '" + p.string() + "'");
  Columns cols;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t k = 0;
    while (std::getline(ss, cell, ',')) {
      if (header)
        cols.emplace_back(cell, std::vector<double>{});
      else if (k < cols.size())
        cols[k].second.push_back(std::strtod(cell.c_str(), nullptr));
      ++k;
    }
    header = false;
  }
  return cols;
}

Columns read_vtk(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read '" + p.string() + "'");
  return read_vtk_fields(in);
}

json read_summary(const fs::path& dir) {
  std::ifstream in(dir / "summary.json");
  if (!in) throw std::runtime_error("no summary.json in '" + dir.string() + "'");
  return json::parse(in);
}

}  // namespace

CompareReport compare(const fs::path& a, const fs::path& b, double tol) {
  CompareReport rep;
  rep.tolerance = tol;
  const json sa = read_summary(a), sb = read_summary(b);
  if (sa.value("scenario", "") != sb.value("scenario", "")) {
    rep.problems.push_back("scenarios differ: " + sa.value("scenario", "?") + " vs " + sb.value("scenario", "?"));
    rep.pass = false;
    return rep;
  }
  auto file_list = [](const json& s) {
    std::vector<std::string> f;
    if (s.contains("artifacts"))
      for (auto it = s["artifacts"].begin(); it != s["artifacts"].end(); ++it) f.push_back(it.key());
    return f;
  };
  const auto fa = file_list(sa), fb = file_list(sb);
  if (fa != fb) rep.problems.push_back("artifact sets differ");
  for (const auto& name : fa) {
    if (std::find(fb.begin(), fb.end(), name) == fb.end()) continue;
    Columns ca, cb;
    const auto ext = fs::path(name).extension();
    if (ext == ".csv") {
      ca = read_csv(a / name);
      cb = read_csv(b / name);
    } else if (ext == ".vtk") {
      ca = read_vtk(a / name);
      cb = read_vtk(b / name);
    } else if (name == "mesh.txt") {
      // byte comparison of the body is the meaningful check for a mesh file
      const bool same = sa["artifacts"][name] == sb["artifacts"][name];
      rep.diffs.push_back({name, "content", same ? 0.0 : 1.0});
      continue;
    } else {
      continue;
    }
    for (const auto& [field, va] : ca) {
      auto it = std::find_if(cb.begin(), cb.end(), [&](const auto& c) { return c.first == field; });
      if (it == cb.end()) {
        rep.problems.push_back(name + ": field '" + field + "' missing in second result");
      } else if (it->second.size() != va.size()) {
        rep.problems.push_back(name + ": field '" + field + "' has different length");
      } else {
        rep.diffs.push_back({name, field, rel_diff(va, it->second)});
      }
    }
  }
  if (sa.contains("metrics") && sb.contains("metrics"))
    for (auto it = sa["metrics"].begin(); it != sa["metrics"].end(); ++it) {
      if (!it->is_number() || !sb["metrics"].contains(it.key())) continue;
      rep.diffs.push_back({"summary.json", "metrics." + it.key(),
                           rel_diff({it->get<double>()}, {sb["metrics"][it.key()].get<double>()})});
    }
  rep.pass = rep.problems.empty();
  for (const auto& d : rep.diffs)
    if (!(d.rel_diff <= tol)) rep.pass = false;
  return rep;
}

}  // namespace fsisens::cli
