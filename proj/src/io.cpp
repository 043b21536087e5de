#include "fsisens/io.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace fsisens {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

NodalField nodal_vector(const std::string& name, const FESpace& s, const Vector& coeffs) {
  NodalField f{name, 2, std::vector<double>(2 * s.n_scalar())};
  for (int i = 0; i < s.n_scalar(); ++i)
    for (int c = 0; c < 2; ++c) f.values[2 * i + c] = coeffs[s.dof(i, c)];
  return f;
}

NodalField nodal_scalar_p1(const std::string& name, const FESpace& p2, const FESpace& p1, const Vector& coeffs) {
  if (p2.elements != p1.elements) throw std::invalid_argument("nodal_scalar_p1: spaces live on different cells");
  NodalField f{name, 1, std::vector<double>(p2.n_scalar(), 0.0)};
  static constexpr int edge_ends[3][2] = {{0, 1}, {1, 2}, {2, 0}};
  for (std::size_t e = 0; e < p2.elements.size(); ++e) {
    const auto& q = p2.cell_nodes[e];
    const auto& l = p1.cell_nodes[e];
    for (int k = 0; k < 3; ++k) f.values[q[k]] = coeffs[l[k]];
    for (int k = 0; k < 3; ++k)
      f.values[q[3 + k]] = 0.5 * (coeffs[l[edge_ends[k][0]]] + coeffs[l[edge_ends[k][1]]]);
  }
  return f;
}

void write_p2_vtk(std::ostream& os, const std::string& title, const FESpace& s,
                  const std::vector<NodalField>& fields) {
  if (title.find('\n') != std::string::npos || title.size() > 255)
    throw std::invalid_argument("VTK title must be a single line of at most 255 characters");
  const int n = s.n_scalar();
  const auto ne = s.elements.size();
  os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << n << " double\n";
  for (const auto& p : s.points) os << format_double(p.x) << ' ' << format_double(p.y) << " 0\n";
  os << "CELLS " << ne << ' ' << ne * 7 << '\n';
  for (const auto& c : s.cell_nodes) {
    os << 6;
    for (int k = 0; k < 6; ++k) os << ' ' << c[k];
    os << '\n';
  }
  os << "CELL_TYPES " << ne << '\n';
  for (std::size_t e = 0; e < ne; ++e) os << "22\n";
  if (fields.empty()) return;
  os << "POINT_DATA " << n << '\n';
  for (const auto& f : fields) {
    if (static_cast<int>(f.values.size()) != n * f.components)
      throw std::invalid_argument("VTK field '" + f.name + "' has the wrong length");
    if (f.components == 1) {
      os << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
      for (double v : f.values) os << format_double(v) << '\n';
    } else {
      os << "VECTORS " << f.name << " double\n";
      for (int i = 0; i < n; ++i)
        os << format_double(f.values[2 * i]) << ' ' << format_double(f.values[2 * i + 1]) << " 0\n";
    }
  }
}

std::vector<std::pair<std::string, std::vector<double>>> read_vtk_fields(std::istream& is) {
  std::vector<std::pair<std::string, std::vector<double>>> out;
  std::string line, word;
  int n = 0;
  auto read_values = [&](const std::string& name, std::size_t count) {
    std::vector<double> v(count);
    for (auto& x : v)
      if (!(is >> x)) throw std::runtime_error("truncated VTK data for '" + name + "'");
    out.emplace_back(name, std::move(v));
  };
  while (is >> word) {
    if (word == "POINTS") {
      is >> n >> word;
      read_values("points", 3 * static_cast<std::size_t>(n));
    } else if (word == "SCALARS") {
      std::string name;
      is >> name;
      std::getline(is, line);
      std::getline(is, line);  // lookup table
      read_values(name, n);
    } else if (word == "VECTORS") {
      std::string name;
      is >> name >> word;
      read_values(name, 3 * static_cast<std::size_t>(n));
    }
  }
  return out;
}

}  // namespace fsisens
