#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "fsisens/cli.hpp"
#include "fsisens/fluid.hpp"
#include "fsisens/fsi.hpp"
#include "fsisens/io.hpp"
#include "fsisens/mesh.hpp"

namespace fsisens::cli {

template <class T>
T get(const json& c, const std::string& key);

ChannelGeometry geometry_of(const json& c);
CouplingOptions coupling_of(const json& c);
VelocityData profile_of(const json& c, const std::string& group, double magnitude);

/// Largest increment ratio among iterates whose increment is still well above `tol`, so the
/// roundoff tail of a converged run does not count.
double observed_ratio(const std::vector<double>& increments, double tol);

/// Writes artifacts with an embedded provenance header and remembers their content hashes.
class ArtifactWriter {
 public:
  ArtifactWriter(std::filesystem::path dir, std::string scenario, const json& config);

  /// '#'-commented header (config and body hash) followed by `body`; for CSV and mesh files.
  void write_text(const std::string& name, const std::string& body);
  /// Quadratic-triangle VTK whose title line carries the config and body hashes.
  void write_vtk(const std::string& name, const FESpace& p2_vector, const std::vector<NodalField>& fields);
  /// summary.json with config, artifact hashes and its own content hash.
  void write_summary(json summary);

  const std::string& config_hash() const { return config_hash_; }

 private:
  std::filesystem::path dir_;
  std::string scenario_;
  json config_;
  std::string config_dump_, config_hash_;
  std::map<std::string, std::string> hashes_;
};

}  // namespace fsisens::cli
