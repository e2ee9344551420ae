#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "pilot/geometry.hpp"
#include "pilot/raster.hpp"

namespace pilot {

// Architecture descriptor of the waypoint regressor: two 3x3 stride-2
// convolution stages with rectified units, flattened features concatenated
// with the scaled scalar inputs, two dense stages, and a linear head of 2N.
struct RegressorConfig {
  RasterConfig raster;
  int conv1_filters = 8;
  int conv2_filters = 16;
  int dense1 = 128;
  int dense2 = 64;
  int waypoints = 40;  // N; head outputs (x, y) per waypoint
  // Scalars [ego speed, v_max, target_x] are multiplied by these before the
  // dense stages so their magnitudes match the conv features.
  Eigen::Vector3d scalar_scale{0.1, 0.1, 0.01};
};

struct RegressorModel {
  RegressorConfig cfg;
  Eigen::VectorXd params;  // flat parameter vector
};

int param_count(const RegressorConfig& cfg);

// He-initialized conv and dense stages; the head starts at zero so an
// untrained model predicts all-zero waypoints.
RegressorModel init_model(const RegressorConfig& cfg, std::uint64_t seed);

// Deterministic forward pass; output is [x_1, y_1, ..., x_N, y_N]. Throws
// DimensionMismatch when the raster does not match the descriptor.
Eigen::VectorXd predict_vector(const RegressorModel& model, const Raster& raster,
                               const Eigen::Vector3d& scalars);
std::vector<Vec2> predict(const RegressorModel& model, const Raster& raster,
                          const Eigen::Vector3d& scalars);

// Reverse-mode gradient of d_output . output(params) w.r.t. params; also
// returns the forward output when requested.
Eigen::VectorXd backprop(const RegressorModel& model, const Raster& raster,
                         const Eigen::Vector3d& scalars, const Eigen::VectorXd& d_output,
                         Eigen::VectorXd* output = nullptr);

// Checkpoint format "pilot-model-v1": a plain-text header with the
// architecture descriptor followed by one parameter per line (%.17g).
void save_model(const std::string& path, const RegressorModel& model);
RegressorModel load_model(const std::string& path);

}  // namespace pilot
