#include "gerbecalc/json_io.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "gerbecalc/wzw.hpp"

namespace gerbecalc::jsonio {

using nlohmann::json;

namespace {

void check_schema(const json& j, const std::string& what) {
  if (!j.is_object()) throw JsonIoError(what + ": expected a JSON object");
  int schema = j.value("schema", 1);
  if (schema != 1)
    throw JsonIoError(what + ": unsupported schema " + std::to_string(schema));
}

const json& need(const json& j, const std::string& key, const std::string& what) {
  auto it = j.find(key);
  if (it == j.end()) throw JsonIoError(what + ": missing field '" + key + "'");
  return *it;
}

mesh::Side side_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw JsonIoError("side must be [face, local]");
  return {j[0].get<int>(), j[1].get<int>()};
}

json side_to(const mesh::Side& s) { return json::array({s.face, s.local}); }

std::vector<mesh::CircleRef> circle_from(const json& j) {
  std::vector<mesh::CircleRef> refs;
  for (const auto& step : j)
    refs.emplace_back(side_from(need(step, "side", "circle step")), step.value("against", false));
  return refs;
}

// a stored circle re-expressed through the primary sides of its edges
json circle_to(const mesh::TriangulatedSurface& s, const mesh::Circle& c) {
  json out = json::array();
  for (int i = 0; i < c.length(); ++i) {
    const mesh::Edge& e = s.edges[c.edges[i]];
    out.push_back({{"side", side_to(e.sides[0])},
                   {"against", s.side_dir(e.sides[0]) != c.dirs[i]}});
  }
  return out;
}

}  // namespace

std::string resolve_input(const std::string& path) {
  namespace fs = std::filesystem;
  if (fs::exists(path)) return path;
  if (const char* root = std::getenv("GERBECALC_FIXTURES")) {
    fs::path candidate = fs::path(root) / path;
    if (fs::exists(candidate)) return candidate.string();
  }
  throw JsonIoError("cannot find input file '" + path + "'");
}

json load_json(const std::string& path) {
  std::ifstream in(resolve_input(path));
  if (!in) throw JsonIoError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw JsonIoError("parse error in '" + path + "': " + e.what());
  }
}

void save_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw JsonIoError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

json mesh_to_json(const mesh::TriangulatedSurface& s) {
  json j{{"schema", 1}, {"type", "mesh"}, {"num_vertices", s.num_vertices}};
  j["faces"] = json::array();
  for (const auto& f : s.faces) j["faces"].push_back({f[0], f[1], f[2]});
  // full gluing table in edge-id order, so the rebuild reproduces edge ids
  j["gluing"] = json::array();
  for (const auto& e : s.edges) {
    json g{{"a", side_to(e.sides[0])}};
    if (e.num_sides == 2) {
      g["b"] = side_to(e.sides[1]);
      g["flip"] = e.dir[1] == 1;  // both sides run the canonical way
    }
    j["gluing"].push_back(g);
  }
  if (!s.boundary_circles.empty()) {
    j["boundary_circles"] = json::array();
    for (const auto& c : s.boundary_circles) j["boundary_circles"].push_back(circle_to(s, c));
  }
  if (!s.defect_circles.empty()) {
    j["defect_circles"] = json::array();
    for (const auto& c : s.defect_circles) j["defect_circles"].push_back(circle_to(s, c));
  }
  return j;
}

mesh::TriangulatedSurface mesh_from_json(const json& j) {
  check_schema(j, "mesh");
  std::vector<std::array<int, 3>> faces;
  for (const auto& f : need(j, "faces", "mesh")) {
    if (!f.is_array() || f.size() != 3) throw JsonIoError("mesh: face must be [v, v, v]");
    faces.push_back({f[0].get<int>(), f[1].get<int>(), f[2].get<int>()});
  }
  mesh::BuildOptions opt;
  if (j.contains("gluing"))
    for (const auto& g : j["gluing"]) {
      mesh::Gluing decl;
      decl.a = side_from(need(g, "a", "gluing"));
      if (g.contains("b") && !g["b"].is_null()) {
        decl.b = side_from(g["b"]);
        decl.flip = g.value("flip", false);
      }
      opt.gluing.push_back(decl);
    }
  if (j.contains("boundary_circles")) {
    opt.boundary_decl.emplace();
    for (const auto& c : j["boundary_circles"]) opt.boundary_decl->push_back(circle_from(c));
  }
  if (j.contains("defect_circles"))
    for (const auto& c : j["defect_circles"]) opt.defect_decl.push_back(circle_from(c));
  try {
    return mesh::build_surface(need(j, "num_vertices", "mesh").get<int>(), faces, opt);
  } catch (const mesh::MeshError& e) {
    throw JsonIoError(std::string("mesh: ") + e.what());
  }
}

json target_to_json(const fields::TargetSpace& t) {
  using Kind = fields::TargetSpace::Kind;
  switch (t.kind) {
    case Kind::Circle:
      return {{"kind", "circle"}, {"R", t.radii[0]}};
    case Kind::Torus:
      return {{"kind", "torus"}, {"R1", t.radii[0]}, {"R2", t.radii[1]}};
    case Kind::SU2:
      return {{"kind", "su2"}};
    case Kind::Product:
      return {{"kind", "product"},
              {"factors", json::array({target_to_json(t.factors[0]), target_to_json(t.factors[1])})}};
  }
  throw JsonIoError("target: unknown kind");
}

fields::TargetSpace target_from_json(const json& j) {
  std::string kind = need(j, "kind", "target").get<std::string>();
  if (kind == "circle") return fields::TargetSpace::circle(need(j, "R", "target").get<double>());
  if (kind == "torus")
    return fields::TargetSpace::torus(need(j, "R1", "target").get<double>(),
                                      need(j, "R2", "target").get<double>());
  if (kind == "su2") return fields::TargetSpace::su2();
  if (kind == "product") {
    const json& f = need(j, "factors", "target");
    if (!f.is_array() || f.size() != 2) throw JsonIoError("target: product needs two factors");
    return fields::TargetSpace::product(target_from_json(f[0]), target_from_json(f[1]));
  }
  throw JsonIoError("target: unknown kind '" + kind + "'");
}

json map_to_json(const fields::SurfaceMap& m) {
  json j{{"schema", 1}, {"type", "map"}};
  j["mesh"] = mesh_to_json(m.surface);
  j["target"] = target_to_json(m.target);
  j["vertex_images"] = m.vertex_images;
  j["edge_windings"] = m.edge_windings;
  return j;
}

fields::SurfaceMap map_from_json(const json& j) {
  check_schema(j, "map");
  auto s = mesh_from_json(need(j, "mesh", "map"));
  auto t = target_from_json(need(j, "target", "map"));
  auto images = need(j, "vertex_images", "map").get<std::vector<fields::Point>>();
  auto windings = need(j, "edge_windings", "map").get<std::vector<std::vector<int>>>();
  try {
    return fields::make_surface_map(s, t, std::move(images), std::move(windings));
  } catch (const fields::FieldError& e) {
    throw JsonIoError(std::string("map: ") + e.what());
  }
}

json deligne_to_json(const gerbe::DeligneSurfaceData& d) {
  json j{{"schema", 1}, {"type", "deligne"}};
  j["mesh"] = mesh_to_json(d.surface);
  j["chart_of_face"] = d.chart_of_face;
  j["b"] = d.b;
  j["a"] = d.a;
  j["g"] = json::array();
  for (const auto& g : d.g) j["g"].push_back({g.real(), g.imag()});
  return j;
}

gerbe::DeligneSurfaceData deligne_from_json(const json& j) {
  check_schema(j, "deligne");
  gerbe::DeligneSurfaceData d;
  d.surface = mesh_from_json(need(j, "mesh", "deligne"));
  d.chart_of_face = need(j, "chart_of_face", "deligne").get<std::vector<int>>();
  d.b = need(j, "b", "deligne").get<std::vector<double>>();
  d.a = need(j, "a", "deligne").get<std::vector<double>>();
  for (const auto& g : need(j, "g", "deligne")) {
    if (g.is_array() && g.size() == 2)
      d.g.emplace_back(g[0].get<double>(), g[1].get<double>());
    else if (g.is_number())  // a bare angle
      d.g.push_back(std::exp(std::complex<double>(0, g.get<double>())));
    else
      throw JsonIoError("deligne: g entries are [re, im] pairs or angles");
  }
  return d;
}

fields::FormOracle form_from_json(const json& j, const fields::TargetSpace& t) {
  std::string kind = need(j, "form", "form").get<std::string>();
  if (kind == "zero") return fields::zero_form(t, j.value("degree", 2));
  if (kind == "torus_volume")
    return fields::torus_volume_form(t, need(j, "c", "form").get<double>());
  if (kind == "circle_one")
    return fields::circle_one_form(t, need(j, "c", "form").get<double>(), j.value("coord", 0));
  if (kind == "wzw_h") {
    if (t.kind != fields::TargetSpace::Kind::SU2)
      throw JsonIoError("form: wzw_h needs an su2 target");
    return wzw::canonical_three_form(need(j, "k", "form").get<int>());
  }
  throw JsonIoError("form: unknown kind '" + kind + "'");
}

json result_to_json(const holonomy::HolonomyResult& r) {
  return {{"value", {r.value.real(), r.value.imag()}},
          {"quadrature_error", r.quadrature_error},
          {"variant_spread", r.variant_spread},
          {"diagnostics", r.diagnostics}};
}

json report_to_json(const gerbe::ValidationReport& r) {
  json parts = json::object();
  for (const auto& [name, value] : r.parts) parts[name] = value;
  return {{"check", r.check},         {"tolerance", r.tolerance},
          {"max_residual", r.max_residual}, {"mean_residual", r.mean_residual},
          {"parts", parts},           {"failing_cells", r.failing_cells},
          {"notes", r.notes},         {"pass", r.pass}};
}

}  // namespace gerbecalc::jsonio
