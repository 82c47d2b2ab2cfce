#include "dsmreg/icp.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <Eigen/SVD>
#include <fmt/format.h>

#include "dsmreg/errors.h"
#include "dsmreg/parallel.h"

namespace dsmreg {

void IcpParams::validate() const {
  auto fail = [](const std::string& what) {
    throw DsmError(ErrorCode::kInvalidArgument, "icp parameter " + what);
  };
  if (n_queries < 3) fail("n_queries must be >= 3");
  if (max_iterations < 1) fail("max_iterations must be >= 1");
  if (!(rel_tol > 0.0)) fail("rel_tol must be > 0");
  if (!(abs_tol > 0.0)) fail("abs_tol must be > 0");
  if (!(trim_fraction >= 0.0 && trim_fraction < 1.0)) fail("trim_fraction must be in [0, 1)");
  if (!(correspondence_reject > 0.0)) fail("correspondence_reject must be > 0");
  if (nn.max_ring_radius < 0) fail("max_ring_radius must be >= 0");
}

namespace {

using Rng = std::mt19937_64;

std::int64_t uniform_index(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

bool pixel_less(const PixelIndex& a, const PixelIndex& b) {
  return a.v != b.v ? a.v < b.v : a.u < b.u;
}

}  // namespace

std::vector<PixelIndex> sample_queries(const DsmGrid& moving, std::size_t n, std::uint64_t seed) {
  constexpr int kCellTries = 32;
  Rng rng(seed);
  const std::int64_t width = moving.width();
  const std::int64_t height = moving.height();
  const auto cells = static_cast<std::int64_t>(std::ceil(std::sqrt(static_cast<double>(n))));

  std::vector<PixelIndex> picks;
  for (std::int64_t cv = 0; cv < cells; ++cv) {
    const std::int64_t v0 = height * cv / cells;
    const std::int64_t v1 = height * (cv + 1) / cells - 1;
    if (v1 < v0) continue;
    for (std::int64_t cu = 0; cu < cells; ++cu) {
      const std::int64_t u0 = width * cu / cells;
      const std::int64_t u1 = width * (cu + 1) / cells - 1;
      if (u1 < u0) continue;
      std::optional<PixelIndex> pick;
      for (int t = 0; t < kCellTries && !pick; ++t) {
        const PixelIndex p{uniform_index(rng, u0, u1), uniform_index(rng, v0, v1)};
        if (height_at(moving, p.u, p.v)) pick = p;
      }
      if (!pick) {
        const Window w = read_window(moving, {u0, u1, v0, v1});
        const std::int64_t valid = w.valid_count();
        if (valid == 0) continue;
        std::int64_t target = uniform_index(rng, 0, valid - 1);
        for (std::int64_t v = v0; v <= v1 && !pick; ++v)
          for (std::int64_t u = u0; u <= u1 && !pick; ++u)
            if (w.valid_at(u, v) && target-- == 0) pick = PixelIndex{u, v};
      }
      picks.push_back(*pick);
    }
  }

  if (picks.size() > n) {
    std::shuffle(picks.begin(), picks.end(), rng);
    picks.resize(n);
  } else if (picks.size() < n) {
    std::sort(picks.begin(), picks.end(), pixel_less);
    auto taken = [&](const PixelIndex& p) {
      return std::binary_search(picks.begin(), picks.end(), p, pixel_less);
    };
    std::vector<PixelIndex> extra;
    auto taken_extra = [&](const PixelIndex& p) {
      return std::find(extra.begin(), extra.end(), p) != extra.end();
    };
    const std::size_t needed = n - picks.size();
    const std::size_t attempts = 64 * needed;
    for (std::size_t a = 0; a < attempts && extra.size() < needed; ++a) {
      const PixelIndex p{uniform_index(rng, 0, width - 1), uniform_index(rng, 0, height - 1)};
      if (height_at(moving, p.u, p.v) && !taken(p) && !taken_extra(p)) extra.push_back(p);
    }
    if (extra.size() < needed) {
      // Valid pixels are scarce: enumerate what is left.
      std::vector<PixelIndex> rest;
      for (std::int64_t v = 0; v < height; ++v) {
        const Window w = read_window(moving, {0, width - 1, v, v});
        for (std::int64_t u = 0; u < width; ++u) {
          const PixelIndex p{u, v};
          if (w.valid_at(u, v) && !taken(p) && !taken_extra(p)) rest.push_back(p);
        }
      }
      const std::size_t missing = needed - extra.size();
      if (rest.size() > missing) {
        std::shuffle(rest.begin(), rest.end(), rng);
        rest.resize(missing);
      }
      extra.insert(extra.end(), rest.begin(), rest.end());
    }
    picks.insert(picks.end(), extra.begin(), extra.end());
  }
  if (picks.empty()) {
    throw DsmError(ErrorCode::kNoValidPixels, "moving raster has no valid pixel to sample");
  }
  std::sort(picks.begin(), picks.end(), pixel_less);
  return picks;
}

RigidTransform estimate_rigid(std::span<const Correspondence> correspondences,
                              std::span<const double> weights) {
  const std::size_t n = correspondences.size();
  if (!weights.empty() && weights.size() != n) {
    throw DsmError(ErrorCode::kInvalidArgument, "weights and correspondences differ in length");
  }
  if (n < 3) {
    throw DsmError(ErrorCode::kDegenerateGeometry,
                   fmt::format("need at least 3 correspondences, got {}", n));
  }
  auto weight = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };

  double wsum = 0.0;
  Eigen::Vector3d p_mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d q_mean = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    wsum += weight(i);
    p_mean += weight(i) * correspondences[i].p;
    q_mean += weight(i) * correspondences[i].q;
  }
  if (!(wsum > 0.0)) throw DsmError(ErrorCode::kDegenerateGeometry, "weights sum to zero");
  p_mean /= wsum;
  q_mean /= wsum;

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    cov += weight(i) * (correspondences[i].p - p_mean) * (correspondences[i].q - q_mean).transpose();
  }
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d s = svd.singularValues();
  if (!(s(0) > 0.0) || s(1) <= 1e-12 * s(0)) {
    throw DsmError(ErrorCode::kDegenerateGeometry,
                   "correspondences are collinear or coincident (cross-covariance rank < 2)");
  }
  const Eigen::Matrix3d& u = svd.matrixU();
  const Eigen::Matrix3d& v = svd.matrixV();
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Eigen::Matrix3d r = v * d * u.transpose();
  return {r, q_mean - r * p_mean};
}

namespace {

struct Match {
  Correspondence pair;
  double distance = 0.0;
  std::int64_t candidates = 0;
  bool found = false;
  bool off_reference = false;
};

double pose_delta(const RigidTransform& a, const RigidTransform& b, const Point3& centroid) {
  return rotation_angle(b.rotation() * a.rotation().transpose()) + (b(centroid) - a(centroid)).norm();
}

double rms(std::span<const Correspondence> pairs, const RigidTransform& pose) {
  double sum = 0.0;
  for (const auto& c : pairs) sum += (pose(c.p) - c.q).squaredNorm();
  return std::sqrt(sum / static_cast<double>(pairs.size()));
}

}  // namespace

RegistrationReport dsm_icp(const DsmGrid& moving, const DsmGrid& reference,
                           const IcpParams& params, const RigidTransform& init) {
  params.validate();
  const auto pixels = sample_queries(moving, static_cast<std::size_t>(params.n_queries), params.seed);
  std::vector<Point3> points;
  points.reserve(pixels.size());
  Point3 centroid = Point3::Zero();
  for (const auto& px : pixels) {
    const auto h = height_at(moving, px.u, px.v);
    points.push_back(uv_to_world(static_cast<double>(px.u), static_cast<double>(px.v),
                                 moving.geotransform(), *h));
    centroid += points.back();
  }
  centroid /= static_cast<double>(points.size());

  RegistrationReport report;
  RigidTransform pose = init;
  double previous_rms = std::numeric_limits<double>::infinity();
  std::vector<Match> matches(points.size());

  for (int iter = 1; iter <= params.max_iterations; ++iter) {
    parallel_for(points.size(), params.threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        Match& m = matches[i];
        m = Match{};
        const Point3 x = pose(points[i]);
        try {
          const NnResult nn = find_nearest(x, reference, params.nn);
          m.pair = {points[i], nn.ref_point};
          m.distance = nn.distance;
          m.candidates = nn.candidates_scanned;
          m.found = true;
        } catch (const DsmError& e) {
          if (e.code() == ErrorCode::kNoOverlap) {
            m.off_reference = true;
          } else if (e.code() != ErrorCode::kAllNodata) {
            throw;
          }
        }
      }
    });

    std::vector<const Match*> kept;
    std::int64_t candidates = 0;
    std::size_t searched = 0;
    bool any_on_reference = false;
    for (const Match& m : matches) {
      any_on_reference |= !m.off_reference;
      if (!m.found) continue;
      candidates += m.candidates;
      ++searched;
      if (m.distance <= params.correspondence_reject) kept.push_back(&m);
    }
    if (!any_on_reference) {
      throw DsmError(ErrorCode::kNoOverlap,
                     "no sampled moving point projects onto the reference raster");
    }
    std::stable_sort(kept.begin(), kept.end(),
                     [](const Match* a, const Match* b) { return a->distance < b->distance; });
    const auto drop = static_cast<std::size_t>(
        std::floor(params.trim_fraction * static_cast<double>(kept.size())));
    kept.resize(kept.size() - drop);
    if (kept.size() < 3) {
      throw DsmError(ErrorCode::kTooFewCorrespondences,
                     fmt::format("{} correspondences survive rejection at iteration {}",
                                 kept.size(), iter));
    }

    std::vector<Correspondence> pairs;
    pairs.reserve(kept.size());
    double sq = 0.0;
    for (const Match* m : kept) {
      pairs.push_back(m->pair);
      sq += m->distance * m->distance;
    }
    IterationStats stats;
    stats.rms_before = std::sqrt(sq / static_cast<double>(kept.size()));
    stats.n_correspondences = kept.size();
    stats.mean_candidates_scanned =
        searched ? static_cast<double>(candidates) / static_cast<double>(searched) : 0.0;

    RigidTransform next;
    try {
      next = estimate_rigid(pairs);
    } catch (const DsmError& e) {
      if (e.code() != ErrorCode::kDegenerateGeometry) throw;
      throw DsmError(ErrorCode::kTooFewCorrespondences,
                     fmt::format("correspondences are degenerate: {}", e.what()));
    }
    stats.rms_after = rms(pairs, next);

    const double delta = pose_delta(pose, next, centroid);
    pose = next;
    report.trace.push_back(stats);
    report.iterations = iter;
    report.err = stats.rms_after;
    report.n_correspondences = stats.n_correspondences;
    report.mean_candidates_scanned = stats.mean_candidates_scanned;

    const bool small_change =
        std::abs(previous_rms - stats.rms_after) < params.rel_tol * previous_rms;
    previous_rms = stats.rms_after;
    if (small_change || delta < params.abs_tol) {
      report.converged = true;
      break;
    }
  }
  report.transform = pose;
  return report;
}

}  // namespace dsmreg
