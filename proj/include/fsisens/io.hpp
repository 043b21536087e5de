#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "fsisens/fem.hpp"

namespace fsisens {

/// 64-bit FNV-1a, used as the content hash of every artifact.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t h);

/// Shortest round-trip decimal form, locale independent.
std::string format_double(double v);

/// A nodal field on the quadratic nodes of one subdomain.
struct NodalField {
  std::string name;
  int components = 1;  // 1 or 2
  std::vector<double> values;  // node-major: values[node * components + c]
};

/// Point data for the P2 nodes of a space: vector P2 functions are copied, P1 scalars are
/// interpolated linearly to edge midpoints.
NodalField nodal_vector(const std::string& name, const FESpace& p2_vector, const Vector& coeffs);
NodalField nodal_scalar_p1(const std::string& name, const FESpace& p2_vector, const FESpace& p1,
                           const Vector& coeffs);

/// Legacy VTK unstructured grid with quadratic triangles (cell type 22) on the nodes of
/// `p2_vector`. `title` must fit on one line.
void write_p2_vtk(std::ostream& os, const std::string& title, const FESpace& p2_vector,
                  const std::vector<NodalField>& fields);

/// Numeric payload of a legacy VTK file written by write_p2_vtk: field name -> values.
std::vector<std::pair<std::string, std::vector<double>>> read_vtk_fields(std::istream& is);

}  // namespace fsisens
