#pragma once

#include <span>
#include <vector>

#include "dsmreg/raster.h"
#include "dsmreg/rigid_transform.h"

namespace dsmreg {

struct MetricConfig {
  double tau = 10.0;  // inlier threshold, meters
  void validate() const;
};

enum class Colocation { kBilinear, kNearest };

struct RmseResult {
  double rmse = 0.0;
  double inlier_ratio = 0.0;
  std::int64_t n_inliers = 0;
  std::int64_t n_compared = 0;
};

// Outlier-gated RMSE between co-located heights: every valid pixel center of
// `a` is sampled in `b`; differences with |a - b| < tau are inliers and the
// mean divides by the inlier count. Throws NoOverlap or NoInliers.
RmseResult rmse_tau(const DsmGrid& a, const DsmGrid& b, const MetricConfig& cfg,
                    Colocation colocation = Colocation::kBilinear);

struct PairRmse {
  int i = 0;
  int j = 0;
  RmseResult result;
};

struct PairwiseSummary {
  double mean_rmse = 0.0;
  std::vector<PairRmse> pairs;
  // Overlapping pairs without a single inlier.
  std::vector<std::pair<int, int>> excluded;
};

// Mean rmse_tau over all overlapping pairs after posing each raster.
// Throws NoOverlappingPairs.
PairwiseSummary mean_pairwise_rmse(std::span<const DsmGrid> dsms,
                                   std::span<const RigidTransform> poses, const MetricConfig& cfg);

struct ErrorMap {
  DsmGrid map;  // fused - reference on the fused lattice
  RmseResult summary;
};

// Throws NoOverlap (and NoInliers from the summary).
ErrorMap error_map(const DsmGrid& fused, const DsmGrid& reference, const MetricConfig& cfg);

}  // namespace dsmreg
