#include "pilot/raster.hpp"

#include <algorithm>
#include <cmath>

#include "pilot/geometry.hpp"

namespace pilot {

Raster rasterize(const Scene& scene, const RasterConfig& cfg) {
  if (cfg.channels < 1 || cfg.width < 1 || cfg.height < 1 || cfg.resolution <= 0.0) {
    throw DimensionMismatch("rasterize: invalid raster config");
  }
  Raster r;
  r.channels = cfg.channels;
  r.width = cfg.width;
  r.height = cfg.height;
  r.resolution = cfg.resolution;
  r.origin_x = scene.ego.x - cfg.ego_anchor_col * cfg.resolution;
  r.origin_y = -0.5 * cfg.height * cfg.resolution;
  r.data.assign(static_cast<std::size_t>(cfg.channels) * cfg.height * cfg.width, 0.0);

  const double res = cfg.resolution;

  // Corridor mask, identical on every channel.
  for (int col = 0; col < cfg.width; ++col) {
    const double cx = r.origin_x + (col + 0.5) * res;
    const double lo = scene.borders.lower.value(cx);
    const double hi = scene.borders.upper.value(cx);
    for (int row = 0; row < cfg.height; ++row) {
      const double cy = r.origin_y + (row + 0.5) * res;
      if (cy >= lo && cy <= hi) {
        for (int c = 0; c < cfg.channels; ++c) r.at(c, row, col) = 0.5;
      }
    }
  }

  // Agent footprints at the pose interpolated to each channel's time slice.
  const int N = scene.horizon_steps;
  for (int c = 0; c < cfg.channels; ++c) {
    const double kf = cfg.channels > 1
                          ? static_cast<double>(c) * N / (cfg.channels - 1)
                          : 0.0;
    const int k0 = std::min(static_cast<int>(kf), N);
    const int k1 = std::min(k0 + 1, N);
    const double frac = kf - k0;
    for (const AgentPrediction& agent : scene.agents) {
      const Pose& p0 = agent.center_states[static_cast<std::size_t>(k0)];
      const Pose& p1 = agent.center_states[static_cast<std::size_t>(k1)];
      OrientedBox box;
      box.center = {p0.x + frac * (p1.x - p0.x), p0.y + frac * (p1.y - p0.y)};
      box.heading = lerp_angle(p0.heading, p1.heading, frac);
      box.half_length = agent.half_length;
      box.half_width = agent.half_width;

      const double reach = std::hypot(box.half_length, box.half_width);
      int col_lo = static_cast<int>(std::floor((box.center.x() - reach - r.origin_x) / res));
      int col_hi = static_cast<int>(std::ceil((box.center.x() + reach - r.origin_x) / res));
      int row_lo = static_cast<int>(std::floor((box.center.y() - reach - r.origin_y) / res));
      int row_hi = static_cast<int>(std::ceil((box.center.y() + reach - r.origin_y) / res));
      col_lo = std::max(col_lo, 0);
      row_lo = std::max(row_lo, 0);
      col_hi = std::min(col_hi, cfg.width - 1);
      row_hi = std::min(row_hi, cfg.height - 1);
      for (int row = row_lo; row <= row_hi; ++row) {
        const double cy = r.origin_y + (row + 0.5) * res;
        for (int col = col_lo; col <= col_hi; ++col) {
          const double cx = r.origin_x + (col + 0.5) * res;
          if (point_in_box({cx, cy}, box)) r.at(c, row, col) = 1.0;
        }
      }
    }
  }
  return r;
}

Eigen::Vector3d raster_scalars(const Scene& scene) {
  return {scene.ego.speed, scene.v_max, scene.target_x};
}

}  // namespace pilot
