#pragma once

#include <random>
#include <utility>
#include <vector>

#include "dsmreg/motion_averaging.h"
#include "dsmreg/scene_graph.h"
#include "testing/fixtures.h"

namespace dsmreg::testing {

inline std::vector<RigidTransform> random_globals(std::mt19937_64& rng, int n,
                                                  double max_angle = M_PI, double extent = 100.0) {
  std::uniform_real_distribution<double> pos(-extent, extent);
  std::vector<RigidTransform> out;
  out.push_back(RigidTransform::identity());
  for (int k = 1; k < n; ++k) {
    out.emplace_back(random_rotation(rng, max_angle), Eigen::Vector3d(pos(rng), pos(rng), pos(rng)));
  }
  return out;
}

// Edges (i, j) carrying T_i^-1 T_j, optionally perturbed by a random rotation
// of up to `rot_noise` rad and a translation of up to `trans_noise` m.
inline SceneGraph graph_from_globals(const std::vector<RigidTransform>& globals,
                                     const std::vector<std::pair<int, int>>& pairs,
                                     std::mt19937_64& rng, double rot_noise = 0.0,
                                     double trans_noise = 0.0, bool random_weights = false) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> nd(0.0, 1.0);
  SceneGraph g;
  for (int k = 0; k < static_cast<int>(globals.size()); ++k) g.vertices.push_back({k, {}});
  for (auto [i, j] : pairs) {
    SceneEdge e;
    e.i = i;
    e.j = j;
    e.relative = globals[i].inverse() * globals[j];
    if (rot_noise > 0.0 || trans_noise > 0.0) {
      const Eigen::Matrix3d dr = random_rotation(rng, rot_noise);
      Eigen::Vector3d dt(nd(rng), nd(rng), nd(rng));
      dt = dt.normalized() * trans_noise * unit(rng);
      e.relative = RigidTransform(dr, dt) * e.relative;
    }
    e.overlap = 1.0;
    e.weight = random_weights ? 0.1 + 0.9 * unit(rng) : 1.0;
    g.edges.push_back(e);
  }
  return g;
}

inline std::vector<std::pair<int, int>> grid_pairs(int rows, int cols) {
  std::vector<std::pair<int, int>> out;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int k = r * cols + c;
      if (c + 1 < cols) out.push_back({k, k + 1});
      if (r + 1 < rows) out.push_back({k, k + cols});
    }
  }
  return out;
}

// Random connected edge set: a random spanning tree plus extra edges.
inline std::vector<std::pair<int, int>> random_connected_pairs(std::mt19937_64& rng, int n,
                                                               double extra_prob) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<bool>> used(n, std::vector<bool>(n, false));
  std::vector<std::pair<int, int>> out;
  for (int k = 1; k < n; ++k) {
    const int p = std::uniform_int_distribution<int>(0, k - 1)(rng);
    out.push_back({p, k});
    used[p][k] = true;
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (!used[i][j] && unit(rng) < extra_prob) out.push_back({i, j});
  return out;
}

// Poses chained from vertex 0 along the given tree edges.
inline std::vector<RigidTransform> chain_tree(const SceneGraph& g, const std::vector<int>& tree) {
  const int n = g.size();
  std::vector<RigidTransform> poses(n);
  std::vector<bool> done(n, false);
  done[0] = true;
  for (int pass = 0; pass < n; ++pass) {
    for (int e : tree) {
      const auto& ed = g.edges[e];
      if (done[ed.i] && !done[ed.j]) {
        poses[ed.j] = poses[ed.i] * ed.relative;
        done[ed.j] = true;
      } else if (done[ed.j] && !done[ed.i]) {
        poses[ed.i] = poses[ed.j] * ed.relative.inverse();
        done[ed.i] = true;
      }
    }
  }
  return poses;
}

// Optimal translations for fixed rotations by dense least squares on the
// stacked residuals (anchor 0 pinned).
inline std::vector<Eigen::Vector3d> dense_translations(const SceneGraph& g,
                                                       const std::vector<Eigen::Matrix3d>& rot) {
  const int n = g.size();
  const int m = static_cast<int>(g.edges.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3 * m, 3 * (n - 1));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(3 * m);
  for (int k = 0; k < m; ++k) {
    const auto& e = g.edges[k];
    const double s = std::sqrt(e.weight);
    // residual R_i t_ij + t_i - t_j
    if (e.i > 0) a.block(3 * k, 3 * (e.i - 1), 3, 3) += s * Eigen::Matrix3d::Identity();
    if (e.j > 0) a.block(3 * k, 3 * (e.j - 1), 3, 3) -= s * Eigen::Matrix3d::Identity();
    b.segment<3>(3 * k) = -s * (rot[e.i] * e.relative.translation());
  }
  const Eigen::VectorXd x = a.colPivHouseholderQr().solve(b);
  std::vector<Eigen::Vector3d> out(n, Eigen::Vector3d::Zero());
  for (int k = 1; k < n; ++k) out[k] = x.segment<3>(3 * (k - 1));
  return out;
}

}  // namespace dsmreg::testing
