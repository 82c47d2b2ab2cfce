#pragma once

#include <span>
#include <string>
#include <vector>

#include "dsmreg/icp.h"
#include "dsmreg/raster.h"
#include "dsmreg/rigid_transform.h"

namespace dsmreg {

// Edge (i, j), i < j. `relative` is T_ij: it maps points of DSM j into the
// frame of DSM i, i.e. the result of dsm_icp(moving = j, reference = i).
struct SceneEdge {
  int i = 0;
  int j = 0;
  RigidTransform relative;
  double err = 0.0;
  double overlap = 0.0;
  double quality = 1.0;
  double weight = 1.0;
};

struct SceneVertex {
  int id = 0;
  std::string path;
};

struct SceneGraph {
  std::vector<SceneVertex> vertices;
  std::vector<SceneEdge> edges;

  int size() const { return static_cast<int>(vertices.size()); }
  // Throws InvalidArgument on bad ids, i >= j, duplicate edges or overlap
  // outside [0, 1].
  void validate() const;
};

// Connected components (sorted vertex ids, ordered by smallest member).
std::vector<std::vector<int>> connected_components(const SceneGraph& graph);

// Throws DisconnectedGraphError listing the components.
void require_connected(const SceneGraph& graph);

// #overlap pixels / min(#valid(a), #valid(b)). Overlap pixels are the valid
// pixels of one raster whose center lands (nearest pixel) on a valid pixel of
// the other; the raster with fewer valid pixels is the one projected, which
// makes the score exactly symmetric. Rasters above 10^7 pixels are counted on
// every 4th row and column.
double overlap_score(const DsmGrid& a, const DsmGrid& b);

struct GraphOptions {
  double overlap_threshold = 0.05;
  IcpParams icp;
  // Concurrent pairwise registrations; each runs its ICP single-threaded when > 1.
  int threads = 1;
};

// Registers every pair whose overlap exceeds the threshold and inserts the
// edge. Vertex ids are positions in `dsms`. Pairs whose ICP fails with
// TooFewCorrespondences or NoOverlap are skipped with a warning. Edge weights
// are left at 1; see assign_weights. Throws NotEnoughDsms or
// DisconnectedGraphError.
SceneGraph build_graph(std::span<const DsmGrid> dsms, const GraphOptions& options = {});

// quality r_ij = softmax(-err) over all edges; weight = overlap * r, divided by
// the largest r so the best-registered edge keeps weight = overlap.
SceneGraph assign_weights(SceneGraph graph);

}  // namespace dsmreg
