#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "dsmreg/icp.h"
#include "dsmreg/metrics.h"
#include "dsmreg/motion_averaging.h"
#include "dsmreg/scene_graph.h"

namespace dsmreg {

// JSON contracts between pipeline stages. Rotations are row-major 9-arrays.
//
//   RegistrationReport {transform:{rotation,translation}, err, iterations,
//                       n_correspondences, converged, mean_candidates_scanned}
//   SceneGraph  {vertices:[{id,path}],
//                edges:[{i,j,rotation,translation,err,overlap,quality,weight}]}
//   GlobalPoses {anchor, poses:[{id,rotation,translation}], objective}

nlohmann::json to_json(const RigidTransform& t);
nlohmann::json to_json(const RegistrationReport& report);
nlohmann::json to_json(const SceneGraph& graph);
nlohmann::json to_json(const GlobalPoses& poses);
nlohmann::json to_json(const RmseResult& result);

// Throw ParseError naming `source` on schema violations.
RigidTransform rigid_from_json(const nlohmann::json& j, const std::string& source = "<json>");
SceneGraph graph_from_json(const nlohmann::json& j, const std::string& source = "<json>");
GlobalPoses poses_from_json(const nlohmann::json& j, const std::string& source = "<json>");

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const nlohmann::json& j, const std::string& path);

}  // namespace dsmreg
