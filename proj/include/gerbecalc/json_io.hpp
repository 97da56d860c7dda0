// JSON round-tripping for meshes, maps, and discrete gerbe data, plus the
// named-form vocabulary the CLI accepts.  Meshes are stored as build recipes
// (faces + explicit gluings + declared circles) so that edge ids and circle
// directions survive the trip exactly.  All files carry "schema": 1.

#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "gerbecalc/gerbedata.hpp"
#include "gerbecalc/holonomy.hpp"

namespace gerbecalc::jsonio {

class JsonIoError : public std::runtime_error {
 public:
  explicit JsonIoError(const std::string& what) : std::runtime_error(what) {}
};

// Use the path as given if it exists, otherwise look under GERBECALC_FIXTURES.
std::string resolve_input(const std::string& path);
nlohmann::json load_json(const std::string& path);
void save_json(const std::string& path, const nlohmann::json& j);

nlohmann::json mesh_to_json(const mesh::TriangulatedSurface& s);
mesh::TriangulatedSurface mesh_from_json(const nlohmann::json& j);

nlohmann::json target_to_json(const fields::TargetSpace& t);
fields::TargetSpace target_from_json(const nlohmann::json& j);

nlohmann::json map_to_json(const fields::SurfaceMap& m);
fields::SurfaceMap map_from_json(const nlohmann::json& j);

nlohmann::json deligne_to_json(const gerbe::DeligneSurfaceData& d);
gerbe::DeligneSurfaceData deligne_from_json(const nlohmann::json& j);

// {"form": "zero"|"torus_volume"|"circle_one"|"wzw_h", ...parameters}
fields::FormOracle form_from_json(const nlohmann::json& j, const fields::TargetSpace& t);

nlohmann::json result_to_json(const holonomy::HolonomyResult& r);
nlohmann::json report_to_json(const gerbe::ValidationReport& r);

}  // namespace gerbecalc::jsonio
