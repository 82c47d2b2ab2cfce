#include "dsmreg/metrics.h"

#include <cmath>
#include <optional>
#include <fmt/format.h>

#include "dsmreg/errors.h"
#include "dsmreg/fusion.h"

namespace dsmreg {

void MetricConfig::validate() const {
  if (!(tau > 0.0)) throw DsmError(ErrorCode::kInvalidArgument, "tau must be > 0");
}

RmseResult rmse_tau(const DsmGrid& a, const DsmGrid& b, const MetricConfig& cfg,
                    Colocation colocation) {
  cfg.validate();
  GridSampler sampler(b, 8);
  const GeoTransform& gt = a.geotransform();
  // Sequential row-major accumulation keeps the result bit-reproducible.
  double sum = 0.0;
  RmseResult r;
  for (std::int64_t v = 0; v < a.height(); ++v) {
    const Window w = read_window(a, {0, a.width() - 1, v, v});
    for (std::int64_t u = 0; u < a.width(); ++u) {
      if (!w.valid_at(u, v)) continue;
      const Point3 x = uv_to_world(static_cast<double>(u), static_cast<double>(v), gt);
      const PixelCoord uv = world_to_uv(x.x(), x.y(), b.geotransform());
      const auto hb = colocation == Colocation::kBilinear ? sampler.bilinear(uv.u, uv.v)
                                                          : sampler.nearest(uv.u, uv.v);
      if (!hb) continue;
      ++r.n_compared;
      const double d = w.at(u, v) - *hb;
      if (std::abs(d) < cfg.tau) {
        sum += d * d;
        ++r.n_inliers;
      }
    }
  }
  if (r.n_compared == 0) throw DsmError(ErrorCode::kNoOverlap, "rasters share no valid pixel");
  if (r.n_inliers == 0) {
    throw DsmError(ErrorCode::kNoInliers,
                   fmt::format("all {} co-located differences exceed tau = {}", r.n_compared,
                               cfg.tau));
  }
  r.rmse = std::sqrt(sum / static_cast<double>(r.n_inliers));
  r.inlier_ratio = static_cast<double>(r.n_inliers) / static_cast<double>(r.n_compared);
  return r;
}

PairwiseSummary mean_pairwise_rmse(std::span<const DsmGrid> dsms,
                                   std::span<const RigidTransform> poses,
                                   const MetricConfig& cfg) {
  if (dsms.size() != poses.size()) {
    throw DsmError(ErrorCode::kInvalidArgument, "one pose per raster is required");
  }
  std::vector<std::optional<DsmGrid>> posed;
  for (std::size_t k = 0; k < dsms.size(); ++k) {
    try {
      posed.emplace_back(apply_pose(dsms[k], poses[k], posed_lattice(dsms[k], poses[k])));
    } catch (const DsmError& e) {
      if (e.code() != ErrorCode::kEmptyResult) throw;
      posed.emplace_back(std::nullopt);
    }
  }
  PairwiseSummary summary;
  double sum = 0.0;
  for (std::size_t i = 0; i < dsms.size(); ++i) {
    for (std::size_t j = i + 1; j < dsms.size(); ++j) {
      if (!posed[i] || !posed[j]) continue;
      try {
        const RmseResult r = rmse_tau(*posed[i], *posed[j], cfg);
        summary.pairs.push_back({static_cast<int>(i), static_cast<int>(j), r});
        sum += r.rmse;
      } catch (const DsmError& e) {
        if (e.code() == ErrorCode::kNoInliers) {
          summary.excluded.emplace_back(static_cast<int>(i), static_cast<int>(j));
        } else if (e.code() != ErrorCode::kNoOverlap) {
          throw;
        }
      }
    }
  }
  if (summary.pairs.empty()) {
    throw DsmError(ErrorCode::kNoOverlappingPairs, "no pair of posed rasters overlaps");
  }
  summary.mean_rmse = sum / static_cast<double>(summary.pairs.size());
  return summary;
}

ErrorMap error_map(const DsmGrid& fused, const DsmGrid& reference, const MetricConfig& cfg) {
  GridSampler sampler(reference, 8);
  const GeoTransform& gt = fused.geotransform();
  std::vector<double> diff(static_cast<std::size_t>(fused.pixel_count()), kDefaultNodata);
  std::int64_t filled = 0;
  for (std::int64_t v = 0; v < fused.height(); ++v) {
    const Window w = read_window(fused, {0, fused.width() - 1, v, v});
    for (std::int64_t u = 0; u < fused.width(); ++u) {
      if (!w.valid_at(u, v)) continue;
      const Point3 x = uv_to_world(static_cast<double>(u), static_cast<double>(v), gt);
      const PixelCoord uv = world_to_uv(x.x(), x.y(), reference.geotransform());
      if (const auto h = sampler.bilinear(uv.u, uv.v)) {
        diff[static_cast<std::size_t>(v * fused.width() + u)] = w.at(u, v) - *h;
        ++filled;
      }
    }
  }
  if (filled == 0) throw DsmError(ErrorCode::kNoOverlap, "fused and reference do not overlap");
  return {make_memory_grid(fused.width(), fused.height(), gt, kDefaultNodata, std::move(diff)),
          rmse_tau(fused, reference, cfg)};
}

}  // namespace dsmreg
