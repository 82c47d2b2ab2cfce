#include "dsmreg/motion_averaging.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "dsmreg/errors.h"

namespace dsmreg {

namespace {

void check_anchor(const SceneGraph& graph, int anchor) {
  if (anchor < 0 || anchor >= graph.size()) {
    throw DsmError(ErrorCode::kInvalidArgument,
                   fmt::format("anchor {} is not a vertex of a {}-vertex graph", anchor,
                               graph.size()));
  }
}

// Chains the tree edges outward from the anchor.
std::vector<RigidTransform> chain_tree(int n, std::span<const SceneEdge> tree, int anchor) {
  std::vector<std::vector<std::size_t>> adjacent(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < tree.size(); ++k) {
    adjacent[tree[k].i].push_back(k);
    adjacent[tree[k].j].push_back(k);
  }
  std::vector<RigidTransform> poses(static_cast<std::size_t>(n));
  std::vector<bool> done(static_cast<std::size_t>(n), false);
  std::queue<int> frontier;
  frontier.push(anchor);
  done[anchor] = true;
  while (!frontier.empty()) {
    const int at = frontier.front();
    frontier.pop();
    for (std::size_t k : adjacent[at]) {
      const SceneEdge& e = tree[k];
      const int other = e.i == at ? e.j : e.i;
      if (done[other]) continue;
      // T_ij = T_i^-1 T_j  =>  T_j = T_i T_ij,  T_i = T_j T_ij^-1
      poses[other] = e.i == at ? poses[at] * e.relative : poses[at] * e.relative.inverse();
      done[other] = true;
      frontier.push(other);
    }
  }
  return poses;
}

}  // namespace

ObjectiveTerms pose_graph_objective(const SceneGraph& graph,
                                    std::span<const RigidTransform> poses) {
  ObjectiveTerms terms;
  for (const SceneEdge& e : graph.edges) {
    const RigidTransform& ti = poses[e.i];
    const RigidTransform& tj = poses[e.j];
    terms.rotation +=
        e.weight * (e.relative.rotation() - ti.rotation().transpose() * tj.rotation()).squaredNorm();
    terms.translation += e.weight * (ti.rotation() * e.relative.translation() + ti.translation() -
                                     tj.translation())
                                        .squaredNorm();
  }
  return terms;
}

Eigen::Matrix3d project_to_so3(const Eigen::Matrix3d& m) {
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d s = svd.singularValues();
  if (!(s(0) > 0.0) || s(1) <= 1e-12 * s(0)) {
    throw DsmError(ErrorCode::kDegenerateMatrix, "matrix rank < 2 has no unique nearest rotation");
  }
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

Eigen::MatrixXd connection_laplacian(const SceneGraph& graph) {
  const int n = graph.size();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  for (const SceneEdge& e : graph.edges) {
    const Eigen::Matrix3d& r = e.relative.rotation();
    l.block<3, 3>(3 * e.i, 3 * e.i) += e.weight * Eigen::Matrix3d::Identity();
    l.block<3, 3>(3 * e.j, 3 * e.j) += e.weight * Eigen::Matrix3d::Identity();
    l.block<3, 3>(3 * e.i, 3 * e.j) -= e.weight * r;
    l.block<3, 3>(3 * e.j, 3 * e.i) -= e.weight * r.transpose();
  }
  return l;
}

std::vector<SceneEdge> max_spanning_tree(const SceneGraph& graph) {
  std::vector<std::size_t> order(graph.edges.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const SceneEdge& ea = graph.edges[a];
    const SceneEdge& eb = graph.edges[b];
    if (ea.weight != eb.weight) return ea.weight > eb.weight;
    return std::tie(ea.i, ea.j) < std::tie(eb.i, eb.j);
  });
  std::vector<int> parent(static_cast<std::size_t>(graph.size()));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<SceneEdge> tree;
  for (std::size_t k : order) {
    const SceneEdge& e = graph.edges[k];
    const int a = find(e.i);
    const int b = find(e.j);
    if (a == b) continue;
    parent[std::max(a, b)] = std::min(a, b);
    tree.push_back(e);
  }
  return tree;
}

std::vector<Eigen::Matrix3d> rotation_average(const SceneGraph& graph, int anchor) {
  check_anchor(graph, anchor);
  require_connected(graph);
  const int n = graph.size();
  const Eigen::Index dim = 3 * n;

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(graph.edges.size() * 24 + static_cast<std::size_t>(dim));
  std::vector<double> degree(static_cast<std::size_t>(n), 0.0);
  for (const SceneEdge& e : graph.edges) {
    degree[e.i] += e.weight;
    degree[e.j] += e.weight;
    const Eigen::Matrix3d& r = e.relative.rotation();
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        triplets.emplace_back(3 * e.i + a, 3 * e.j + b, -e.weight * r(a, b));
        triplets.emplace_back(3 * e.j + b, 3 * e.i + a, -e.weight * r(a, b));
      }
    }
  }
  const double max_degree = *std::max_element(degree.begin(), degree.end());
  if (!(max_degree > 0.0)) {
    throw DsmError(ErrorCode::kNumericalFailure, "all edge weights are zero");
  }
  // Small shift so the (positive semidefinite) Laplacian factors; inverse
  // iteration on the shifted matrix converges onto its smallest eigenvectors.
  const double shift = 1e-10 * max_degree;
  for (int v = 0; v < n; ++v)
    for (int a = 0; a < 3; ++a) triplets.emplace_back(3 * v + a, 3 * v + a, degree[v] + shift);

  Eigen::SparseMatrix<double> laplacian(dim, dim);
  laplacian.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(laplacian);
  if (solver.info() != Eigen::Success) {
    throw DsmError(ErrorCode::kNumericalFailure, "factorization of the rotation Laplacian failed");
  }

  // Start from the spanning-tree chaining: block i = R_i^T.
  const std::vector<RigidTransform> tree_poses = chain_tree(n, max_spanning_tree(graph), anchor);
  Eigen::MatrixXd basis(dim, 3);
  for (int v = 0; v < n; ++v) basis.block<3, 3>(3 * v, 0) = tree_poses[v].rotation().transpose();

  auto orthonormalize = [dim](const Eigen::MatrixXd& m) -> Eigen::MatrixXd {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    return qr.householderQ() * Eigen::MatrixXd::Identity(dim, 3);
  };
  basis = orthonormalize(basis);

  constexpr int kMaxIterations = 500;
  constexpr double kTolerance = 1e-12;
  // Below this the change is rounding noise; stop once it stops shrinking.
  constexpr double kFloor = 1e-9;
  bool converged = false;
  double previous_change = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    Eigen::MatrixXd next = solver.solve(basis);
    if (solver.info() != Eigen::Success || !next.allFinite()) {
      throw DsmError(ErrorCode::kNumericalFailure, "rotation eigen-solve diverged");
    }
    next = orthonormalize(next);
    const double change = (next - basis * (basis.transpose() * next)).norm();
    basis = std::move(next);
    if (change < kTolerance || (change < kFloor && change > 0.9 * previous_change)) {
      spdlog::debug("rotation eigen-solve converged after {} iterations", iter + 1);
      converged = true;
      break;
    }
    previous_change = change;
  }
  if (!converged) {
    throw DsmError(ErrorCode::kNumericalFailure,
                   fmt::format("rotation eigen-solve did not converge in {} iterations",
                               kMaxIterations));
  }

  // The basis is determined up to an orthogonal 3x3 factor; flip a column if
  // that factor is a reflection for most vertices.
  int negative = 0;
  for (int v = 0; v < n; ++v) negative += basis.block<3, 3>(3 * v, 0).determinant() < 0.0;
  if (2 * negative > n) basis.col(2) *= -1.0;

  const double scale = std::sqrt(static_cast<double>(n));
  std::vector<Eigen::Matrix3d> rotations(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    rotations[v] = project_to_so3(scale * basis.block<3, 3>(3 * v, 0).transpose());
  }
  const Eigen::Matrix3d gauge = rotations[anchor].transpose();
  for (auto& r : rotations) r = gauge * r;
  rotations[anchor] = Eigen::Matrix3d::Identity();
  return rotations;
}

std::vector<Eigen::Vector3d> translation_solve(const SceneGraph& graph,
                                               std::span<const Eigen::Matrix3d> rotations,
                                               int anchor) {
  check_anchor(graph, anchor);
  require_connected(graph);
  const int n = graph.size();
  if (static_cast<int>(rotations.size()) != n) {
    throw DsmError(ErrorCode::kInvalidArgument, "one rotation per vertex is required");
  }
  // Unknowns are every vertex but the anchor; the three coordinates share one
  // scalar weighted Laplacian.
  auto slot = [anchor](int v) { return v < anchor ? v : v - 1; };
  const int m = n - 1;
  std::vector<Eigen::Vector3d> translations(static_cast<std::size_t>(n), Eigen::Vector3d::Zero());
  if (m == 0) return translations;

  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m, 3);
  for (const SceneEdge& e : graph.edges) {
    // residual t_j - t_i - R_i t_ij
    const Eigen::Vector3d d = rotations[e.i] * e.relative.translation();
    const double w = e.weight;
    if (e.i != anchor) {
      triplets.emplace_back(slot(e.i), slot(e.i), w);
      rhs.row(slot(e.i)) -= w * d.transpose();
    }
    if (e.j != anchor) {
      triplets.emplace_back(slot(e.j), slot(e.j), w);
      rhs.row(slot(e.j)) += w * d.transpose();
    }
    if (e.i != anchor && e.j != anchor) {
      triplets.emplace_back(slot(e.i), slot(e.j), -w);
      triplets.emplace_back(slot(e.j), slot(e.i), -w);
    }
  }
  Eigen::SparseMatrix<double> normal(m, m);
  normal.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(normal);
  if (solver.info() != Eigen::Success) {
    throw DsmError(ErrorCode::kNumericalFailure, "translation normal equations are singular");
  }
  const Eigen::MatrixXd solution = solver.solve(rhs);
  if (solver.info() != Eigen::Success || !solution.allFinite()) {
    throw DsmError(ErrorCode::kNumericalFailure, "translation solve failed");
  }
  for (int v = 0; v < n; ++v)
    if (v != anchor) translations[v] = solution.row(slot(v)).transpose();
  return translations;
}

GlobalPoses motion_average(const SceneGraph& graph, int anchor) {
  const auto rotations = rotation_average(graph, anchor);
  const auto translations = translation_solve(graph, rotations, anchor);
  GlobalPoses out;
  out.anchor = anchor;
  for (int v = 0; v < graph.size(); ++v) out.poses.emplace_back(rotations[v], translations[v]);
  out.poses[anchor] = RigidTransform::identity();
  out.objective = pose_graph_objective(graph, out.poses).total();
  return out;
}

GlobalPoses greedy_mst_solve(const SceneGraph& graph, int anchor) {
  check_anchor(graph, anchor);
  require_connected(graph);
  GlobalPoses out;
  out.anchor = anchor;
  out.poses = chain_tree(graph.size(), max_spanning_tree(graph), anchor);
  out.objective = pose_graph_objective(graph, out.poses).total();
  return out;
}

}  // namespace dsmreg
