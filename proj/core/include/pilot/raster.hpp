#pragma once

#include <Eigen/Core>
#include <vector>

#include "pilot/problem.hpp"

namespace pilot {

struct RasterConfig {
  int channels = 5;
  int width = 96;   // columns, along the longitudinal axis
  int height = 96;  // rows, along the lateral axis
  double resolution = 0.5;  // meters per cell
  int ego_anchor_col = 8;   // ego longitudinal position maps to this column
};

// C-channel occupancy stack in the reference frame. Cell (col, row) covers
// x in [origin_x + col*res, +res), y in [origin_y + row*res, +res). Channel c
// paints the drivable corridor at 0.5 (identically on every channel) and each
// agent's rectangle at 1.0 at its pose interpolated to time c*h/(C-1), h
// being the plan horizon. Values are exactly {0, 0.5, 1}.
struct Raster {
  int channels = 0;
  int width = 0;
  int height = 0;
  double resolution = 0.0;
  double origin_x = 0.0;
  double origin_y = 0.0;
  std::vector<double> data;  // [channel][row][col]

  double& at(int c, int row, int col) {
    return data[(static_cast<std::size_t>(c) * height + row) * width + col];
  }
  double at(int c, int row, int col) const {
    return data[(static_cast<std::size_t>(c) * height + row) * width + col];
  }
};

Raster rasterize(const Scene& scene, const RasterConfig& cfg);

// Scalar side inputs of the regressor: [ego speed, v_max, target_x].
Eigen::Vector3d raster_scalars(const Scene& scene);

}  // namespace pilot
