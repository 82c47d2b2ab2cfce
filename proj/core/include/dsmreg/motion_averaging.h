#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "dsmreg/rigid_transform.h"
#include "dsmreg/scene_graph.h"

namespace dsmreg {

// Global poses T_i mapping DSM i into the common frame, which is the frame of
// the anchor (poses[anchor] == identity). For every edge the model is
// T_ij = T_i^-1 * T_j.
struct GlobalPoses {
  int anchor = 0;
  std::vector<RigidTransform> poses;
  double objective = 0.0;
};

struct ObjectiveTerms {
  double rotation = 0.0;     // sum w ||R_ij - R_i^T R_j||_F^2
  double translation = 0.0;  // sum w ||R_i t_ij + t_i - t_j||^2
  double total() const { return rotation + translation; }
};

// Weighted pose-graph objective of a candidate solution.
ObjectiveTerms pose_graph_objective(const SceneGraph& graph, std::span<const RigidTransform> poses);

// Nearest rotation in Frobenius norm. Throws DegenerateMatrix for rank < 2.
Eigen::Matrix3d project_to_so3(const Eigen::Matrix3d& m);

// Weighted graph connection Laplacian: diagonal blocks sum_j w_ij I,
// off-diagonal blocks -w_ij R_ij (and -w_ij R_ij^T for (j, i)). Dense; for
// tests and small graphs.
Eigen::MatrixXd connection_laplacian(const SceneGraph& graph);

// Chordal relaxation: eigenvectors of the three smallest eigenvalues of the
// connection Laplacian, each 3x3 block projected onto SO(3), gauge-fixed so the
// anchor is the identity. Throws DisconnectedGraph or NumericalFailure.
std::vector<Eigen::Matrix3d> rotation_average(const SceneGraph& graph, int anchor = 0);

// Weighted linear least squares for the translations given fixed rotations,
// with the anchor translation pinned to zero. Throws DisconnectedGraph.
std::vector<Eigen::Vector3d> translation_solve(const SceneGraph& graph,
                                               std::span<const Eigen::Matrix3d> rotations,
                                               int anchor = 0);

// rotation_average followed by translation_solve.
GlobalPoses motion_average(const SceneGraph& graph, int anchor = 0);

// Maximum-weight spanning tree (Kruskal, ties by smaller (i, j)); poses chained
// along tree paths from the anchor.
GlobalPoses greedy_mst_solve(const SceneGraph& graph, int anchor = 0);

// Edges of the maximum-weight spanning tree, in insertion order.
std::vector<SceneEdge> max_spanning_tree(const SceneGraph& graph);

}  // namespace dsmreg
