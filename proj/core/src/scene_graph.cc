#include "dsmreg/scene_graph.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>
#include <tuple>
#include <utility>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "dsmreg/errors.h"
#include "dsmreg/parallel.h"

namespace dsmreg {

void SceneGraph::validate() const {
  for (std::size_t k = 0; k < vertices.size(); ++k) {
    if (vertices[k].id != static_cast<int>(k)) {
      throw DsmError(ErrorCode::kInvalidArgument,
                     fmt::format("vertex {} has id {}; ids must equal positions", k,
                                 vertices[k].id));
    }
  }
  std::set<std::pair<int, int>> seen;
  for (const SceneEdge& e : edges) {
    if (e.i < 0 || e.j >= size() || e.i >= e.j) {
      throw DsmError(ErrorCode::kInvalidArgument,
                     fmt::format("edge ({}, {}) is not a canonical pair of vertices", e.i, e.j));
    }
    if (!seen.emplace(e.i, e.j).second) {
      throw DsmError(ErrorCode::kInvalidArgument, fmt::format("duplicate edge ({}, {})", e.i, e.j));
    }
    if (!(e.overlap >= 0.0 && e.overlap <= 1.0) || !(e.weight >= 0.0) || !(e.err >= 0.0)) {
      throw DsmError(ErrorCode::kInvalidArgument,
                     fmt::format("edge ({}, {}) has out-of-range overlap/weight/err", e.i, e.j));
    }
    if (!e.relative.is_valid(1e-6)) {
      throw DsmError(ErrorCode::kInvalidArgument,
                     fmt::format("edge ({}, {}) rotation is not in SO(3)", e.i, e.j));
    }
  }
}

namespace {

struct DisjointSet {
  explicit DisjointSet(int n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (b < a) std::swap(a, b);
    parent[b] = a;
    return true;
  }
  std::vector<int> parent;
};

constexpr std::int64_t kDecimateAbove = 10'000'000;

std::int64_t step_for(const DsmGrid& g) { return g.pixel_count() > kDecimateAbove ? 4 : 1; }

std::int64_t count_valid(const DsmGrid& g) {
  const std::int64_t step = step_for(g);
  std::int64_t n = 0;
  for (std::int64_t v = 0; v < g.height(); v += step) {
    const Window w = read_window(g, {0, g.width() - 1, v, v});
    for (std::int64_t u = 0; u < g.width(); u += step) n += w.valid_at(u, v);
  }
  return n;
}

// Valid pixels of `from` landing on a valid pixel of `onto`, scaled back up
// when `from` is decimated.
std::int64_t count_overlap(const DsmGrid& from, const DsmGrid& onto) {
  const std::int64_t step = step_for(from);
  GridSampler sampler(onto, 4);
  const GeoTransform& gt = from.geotransform();
  std::int64_t n = 0;
  for (std::int64_t v = 0; v < from.height(); v += step) {
    const Window w = read_window(from, {0, from.width() - 1, v, v});
    for (std::int64_t u = 0; u < from.width(); u += step) {
      if (!w.valid_at(u, v)) continue;
      const Point3 x = uv_to_world(static_cast<double>(u), static_cast<double>(v), gt);
      const PixelCoord uv = world_to_uv(x.x(), x.y(), onto.geotransform());
      if (sampler.nearest(uv.u, uv.v)) ++n;
    }
  }
  return n;
}

auto order_key(const DsmGrid& g, std::int64_t valid) {
  const GeoTransform& gt = g.geotransform();
  return std::make_tuple(valid, g.id(), g.width(), g.height(), gt.x_origin, gt.y_origin,
                         gt.x_scale, gt.y_scale, gt.x_skew, gt.y_skew);
}

}  // namespace

std::vector<std::vector<int>> connected_components(const SceneGraph& graph) {
  DisjointSet ds(graph.size());
  for (const SceneEdge& e : graph.edges) ds.unite(e.i, e.j);
  std::vector<std::vector<int>> out;
  std::vector<int> slot(static_cast<std::size_t>(graph.size()), -1);
  for (int v = 0; v < graph.size(); ++v) {
    const int root = ds.find(v);
    if (slot[root] < 0) {
      slot[root] = static_cast<int>(out.size());
      out.emplace_back();
    }
    out[slot[root]].push_back(v);
  }
  return out;
}

void require_connected(const SceneGraph& graph) {
  auto components = connected_components(graph);
  if (components.size() > 1) throw DisconnectedGraphError(std::move(components));
}

double overlap_score(const DsmGrid& a, const DsmGrid& b) {
  const std::int64_t valid_a = count_valid(a);
  const std::int64_t valid_b = count_valid(b);
  if (valid_a == 0 || valid_b == 0) return 0.0;
  const bool a_first = order_key(a, valid_a) <= order_key(b, valid_b);
  const DsmGrid& from = a_first ? a : b;
  const DsmGrid& onto = a_first ? b : a;
  const double overlap = static_cast<double>(count_overlap(from, onto));
  // Decimated counts are per sampled pixel; put both sides on the same scale.
  const double from_valid = static_cast<double>(a_first ? valid_a : valid_b);
  const double onto_valid = static_cast<double>(a_first ? valid_b : valid_a);
  const double from_scale = static_cast<double>(step_for(from) * step_for(from));
  const double onto_scale = static_cast<double>(step_for(onto) * step_for(onto));
  const double denom = std::min(from_valid * from_scale, onto_valid * onto_scale);
  return std::clamp(overlap * from_scale / denom, 0.0, 1.0);
}

SceneGraph build_graph(std::span<const DsmGrid> dsms, const GraphOptions& options) {
  if (dsms.size() < 2) {
    throw DsmError(ErrorCode::kNotEnoughDsms,
                   fmt::format("need at least 2 DSMs, got {}", dsms.size()));
  }
  options.icp.validate();
  const int n = static_cast<int>(dsms.size());
  std::vector<DsmGrid> grids;
  grids.reserve(dsms.size());
  SceneGraph graph;
  for (int k = 0; k < n; ++k) {
    grids.push_back(dsms[k].with_id(k));
    graph.vertices.push_back({k, dsms[k].path()});
  }

  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);

  std::vector<double> overlaps(pairs.size());
  parallel_for(pairs.size(), options.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k)
      overlaps[k] = overlap_score(grids[pairs[k].first], grids[pairs[k].second]);
  });

  std::vector<std::size_t> jobs;
  for (std::size_t k = 0; k < pairs.size(); ++k)
    if (overlaps[k] > options.overlap_threshold) jobs.push_back(k);

  IcpParams icp = options.icp;
  const int workers = options.threads <= 0 ? default_thread_count() : options.threads;
  if (workers > 1) icp.threads = 1;

  std::vector<std::optional<SceneEdge>> results(jobs.size());
  parallel_for(jobs.size(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const auto [i, j] = pairs[jobs[k]];
      try {
        const RegistrationReport report = dsm_icp(grids[j], grids[i], icp);
        SceneEdge edge;
        edge.i = i;
        edge.j = j;
        edge.relative = report.transform;
        edge.err = report.err;
        edge.overlap = overlaps[jobs[k]];
        results[k] = edge;
      } catch (const DsmError& e) {
        if (e.code() != ErrorCode::kTooFewCorrespondences && e.code() != ErrorCode::kNoOverlap)
          throw;
        spdlog::warn("skipping edge ({}, {}): {}", i, j, e.what());
      }
    }
  });
  for (auto& r : results)
    if (r) graph.edges.push_back(*r);

  require_connected(graph);
  return graph;
}

SceneGraph assign_weights(SceneGraph graph) {
  if (graph.edges.empty()) return graph;
  double min_err = graph.edges.front().err;
  for (const SceneEdge& e : graph.edges) min_err = std::min(min_err, e.err);
  // Shifting by min_err leaves the softmax unchanged and keeps exp() in range.
  double denom = 0.0;
  for (const SceneEdge& e : graph.edges) denom += std::exp(-(e.err - min_err));
  double max_quality = 0.0;
  for (SceneEdge& e : graph.edges) {
    e.quality = std::exp(-(e.err - min_err)) / denom;
    max_quality = std::max(max_quality, e.quality);
  }
  for (SceneEdge& e : graph.edges) e.weight = e.overlap * e.quality / max_quality;
  return graph;
}

}  // namespace dsmreg
