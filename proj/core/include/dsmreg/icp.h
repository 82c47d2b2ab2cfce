#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dsmreg/nn_grid.h"
#include "dsmreg/raster.h"
#include "dsmreg/rigid_transform.h"

namespace dsmreg {

struct IcpParams {
  int n_queries = 2065;
  int max_iterations = 50;
  // Stop when the RMS residual changes by less than rel_tol * previous RMS.
  double rel_tol = 1e-6;
  // Stop when rotation angle (rad) + displacement of the sample centroid (m)
  // between consecutive poses drops below this.
  double abs_tol = 1e-4;
  // Fraction of the worst surviving correspondences dropped each iteration.
  double trim_fraction = 0.1;
  // Correspondences farther apart than this (m) are dropped.
  double correspondence_reject = 10.0;
  std::uint64_t seed = 0;
  int threads = 1;
  NnOptions nn;

  // Throws InvalidArgument.
  void validate() const;
};

struct PixelIndex {
  std::int64_t u = 0;
  std::int64_t v = 0;
  bool operator==(const PixelIndex&) const = default;
};

struct Correspondence {
  Point3 p;
  Point3 q;
};

struct IterationStats {
  // Trimmed RMS distance of the correspondences found at the current pose.
  double rms_before = 0.0;
  // RMS of the same correspondences after the estimation step.
  double rms_after = 0.0;
  std::size_t n_correspondences = 0;
  double mean_candidates_scanned = 0.0;
};

struct RegistrationReport {
  // Maps moving-raster points into the reference frame (includes init).
  RigidTransform transform;
  double err = 0.0;
  int iterations = 0;
  std::size_t n_correspondences = 0;
  bool converged = false;
  double mean_candidates_scanned = 0.0;
  std::vector<IterationStats> trace;
};

// Stratified, seed-deterministic sample of valid pixels, sorted by (v, u).
// The raster is cut into ceil(sqrt(n))^2 cells with one random valid pixel per
// non-empty cell, then topped up (or thinned) randomly to n. Returns every
// valid pixel when there are at most n. Throws NoValidPixels.
std::vector<PixelIndex> sample_queries(const DsmGrid& moving, std::size_t n, std::uint64_t seed);

// Weighted least-squares rigid fit argmin sum w_i ||R p_i + t - q_i||^2 (SVD of
// the cross-covariance with reflection correction). Throws DegenerateGeometry
// for fewer than 3 points or a cross-covariance of rank < 2.
RigidTransform estimate_rigid(std::span<const Correspondence> correspondences,
                              std::span<const double> weights = {});

// Point-to-point ICP of `moving` onto `reference` with grid-bounded exact NN
// correspondences. Throws NoOverlap or TooFewCorrespondences.
RegistrationReport dsm_icp(const DsmGrid& moving, const DsmGrid& reference,
                           const IcpParams& params,
                           const RigidTransform& init = RigidTransform::identity());

}  // namespace dsmreg
