#include "dsmreg/serialization.h"

#include <fstream>
#include <set>
#include <fmt/format.h>

#include "dsmreg/errors.h"

namespace dsmreg {

using nlohmann::json;

json to_json(const RigidTransform& t) {
  json rotation = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rotation.push_back(t.rotation()(r, c));
  const auto& tr = t.translation();
  return {{"rotation", rotation}, {"translation", {tr.x(), tr.y(), tr.z()}}};
}

json to_json(const RegistrationReport& report) {
  return {{"transform", to_json(report.transform)},
          {"err", report.err},
          {"iterations", report.iterations},
          {"n_correspondences", report.n_correspondences},
          {"converged", report.converged},
          {"mean_candidates_scanned", report.mean_candidates_scanned}};
}

json to_json(const SceneGraph& graph) {
  json vertices = json::array();
  for (const auto& v : graph.vertices) vertices.push_back({{"id", v.id}, {"path", v.path}});
  json edges = json::array();
  for (const auto& e : graph.edges) {
    json item = to_json(e.relative);
    item["i"] = e.i;
    item["j"] = e.j;
    item["err"] = e.err;
    item["overlap"] = e.overlap;
    item["quality"] = e.quality;
    item["weight"] = e.weight;
    edges.push_back(std::move(item));
  }
  return {{"vertices", vertices}, {"edges", edges}};
}

json to_json(const GlobalPoses& poses) {
  json items = json::array();
  for (std::size_t k = 0; k < poses.poses.size(); ++k) {
    json item = to_json(poses.poses[k]);
    item["id"] = k;
    items.push_back(std::move(item));
  }
  return {{"anchor", poses.anchor}, {"poses", items}, {"objective", poses.objective}};
}

json to_json(const RmseResult& result) {
  return {{"rmse_tau", result.rmse},
          {"inlier_ratio", result.inlier_ratio},
          {"n_inliers", result.n_inliers},
          {"n_compared", result.n_compared}};
}

namespace {

[[noreturn]] void schema_error(const std::string& source, const std::string& what) {
  throw ParseError(source, 0, 0, what);
}

const json& field(const json& j, const char* key, const std::string& source) {
  if (!j.is_object() || !j.contains(key)) schema_error(source, fmt::format("missing '{}'", key));
  return j.at(key);
}

double number(const json& j, const char* key, const std::string& source) {
  const json& v = field(j, key, source);
  if (!v.is_number()) schema_error(source, fmt::format("'{}' must be a number", key));
  return v.get<double>();
}

int integer(const json& j, const char* key, const std::string& source) {
  const json& v = field(j, key, source);
  if (!v.is_number_integer()) schema_error(source, fmt::format("'{}' must be an integer", key));
  return v.get<int>();
}

}  // namespace

RigidTransform rigid_from_json(const json& j, const std::string& source) {
  const json& rot = field(j, "rotation", source);
  const json& tr = field(j, "translation", source);
  if (!rot.is_array() || rot.size() != 9) schema_error(source, "rotation must have 9 numbers");
  if (!tr.is_array() || tr.size() != 3) schema_error(source, "translation must have 3 numbers");
  Eigen::Matrix3d r;
  for (int k = 0; k < 9; ++k) {
    if (!rot[k].is_number()) schema_error(source, "rotation entries must be numbers");
    r(k / 3, k % 3) = rot[k].get<double>();
  }
  Eigen::Vector3d t;
  for (int k = 0; k < 3; ++k) {
    if (!tr[k].is_number()) schema_error(source, "translation entries must be numbers");
    t(k) = tr[k].get<double>();
  }
  RigidTransform out(r, t);
  if (!out.is_valid(1e-6)) schema_error(source, "rotation is not in SO(3)");
  return out;
}

SceneGraph graph_from_json(const json& j, const std::string& source) {
  SceneGraph g;
  const json& vertices = field(j, "vertices", source);
  const json& edges = field(j, "edges", source);
  if (!vertices.is_array() || !edges.is_array()) schema_error(source, "vertices/edges must be arrays");
  for (const json& v : vertices) {
    SceneVertex vertex;
    vertex.id = integer(v, "id", source);
    if (v.contains("path")) {
      if (!v["path"].is_string()) schema_error(source, "vertex path must be a string");
      vertex.path = v["path"].get<std::string>();
    }
    g.vertices.push_back(vertex);
  }
  for (const json& e : edges) {
    SceneEdge edge;
    edge.i = integer(e, "i", source);
    edge.j = integer(e, "j", source);
    edge.relative = rigid_from_json(e, source);
    edge.err = number(e, "err", source);
    edge.overlap = number(e, "overlap", source);
    edge.quality = e.contains("quality") ? number(e, "quality", source) : 1.0;
    edge.weight = e.contains("weight") ? number(e, "weight", source) : 1.0;
    g.edges.push_back(edge);
  }
  try {
    g.validate();
  } catch (const DsmError& e) {
    schema_error(source, e.what());
  }
  return g;
}

GlobalPoses poses_from_json(const json& j, const std::string& source) {
  GlobalPoses out;
  out.anchor = integer(j, "anchor", source);
  const json& items = field(j, "poses", source);
  if (!items.is_array()) schema_error(source, "poses must be an array");
  out.poses.resize(items.size());
  std::set<int> seen;
  for (const json& item : items) {
    const int id = integer(item, "id", source);
    if (id < 0 || id >= static_cast<int>(items.size()) || !seen.insert(id).second)
      schema_error(source, fmt::format("pose id {} is out of range or repeated", id));
    out.poses[id] = rigid_from_json(item, source);
  }
  if (out.anchor < 0 || out.anchor >= static_cast<int>(out.poses.size()))
    schema_error(source, "anchor is not a pose id");
  out.objective = j.contains("objective") ? number(j, "objective", source) : 0.0;
  return out;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DsmError(ErrorCode::kIoError, fmt::format("cannot open {}", path));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path, 0, e.byte, e.what());
  }
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DsmError(ErrorCode::kIoError, fmt::format("cannot create {}", path));
  out << j.dump(2) << '\n';
  if (!out) throw DsmError(ErrorCode::kIoError, fmt::format("write failed for {}", path));
}

}  // namespace dsmreg
