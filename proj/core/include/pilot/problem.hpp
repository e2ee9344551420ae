#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "pilot/geometry.hpp"

namespace pilot {

struct DimensionMismatch : std::runtime_error {
  explicit DimensionMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct EgoState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // rad, wrapped to (-pi, pi]
  double speed = 0.0;    // m/s
};

struct Control {
  double accel = 0.0;  // m/s^2
  double steer = 0.0;  // steering input, bounded by NlpConfig::delta_max
};

// Planned motion over a horizon of N steps: N+1 states, N controls.
struct Trajectory {
  double dt = 0.0;
  std::vector<EgoState> states;
  std::vector<Control> controls;

  int horizon() const { return static_cast<int>(controls.size()); }
};

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

// Predicted motion of one other road user, sampled at the plan timestamps
// (N+1 poses). Footprint is a rectangle given by half extents.
struct AgentPrediction {
  int id = 0;
  std::vector<Pose> center_states;
  double half_length = 0.0;
  double half_width = 0.0;
};

// Drivable corridor: lower and upper lateral bounds as functions of the
// longitudinal coordinate, valid on [x_min, x_max].
struct Borders {
  CubicSpline lower;
  CubicSpline upper;
  double x_min = 0.0;
  double x_max = 0.0;
};

// One planning problem. All planning modules expect it in the reference-path
// frame (route along +x); the simulator produces world-frame scenes and the
// frenet module converts between the two.
struct Scene {
  EgoState ego;
  std::vector<Vec2> reference_path;  // world-frame polyline
  Borders borders;                   // reference-frame corridor
  std::vector<AgentPrediction> agents;
  double v_min = 0.0;
  double v_max = 10.0;
  int horizon_steps = 40;
  double dt = 0.2;
  double target_x = 0.0;  // longitudinal end target, reference frame
};

struct NlpConfig {
  // Vehicle and bounds.
  double wheelbase = 4.8;
  double delta_max = 0.45;
  double a_min = -3.0;
  double a_max = 3.0;
  double jerk_max = 0.5;
  double steer_jerk_max = 0.18;
  // Ego footprint used for border and collision constraints.
  double ego_length = 4.8;
  double ego_width = 1.9;
  // Cost weights.
  double w_x = 0.1;
  double w_v = 2.5;
  double w_y = 0.05;
  double w_a = 1.0;
  double w_delta = 2.0;
  // Solver settings.
  double constraint_tol = 1e-4;
  int max_iters = 30;          // outer augmented-Lagrangian iterations
  int max_inner_iters = 2000;  // total inner iterations across outers
  double ellipse_margin = 0.2;
};

// Returns one message per violated Scene invariant; empty means well-formed.
std::vector<std::string> validate_scene(const Scene& scene);

// Ingestion rule: ego speed is clamped into [v_min, v_max].
void clamp_ego_speed(Scene& scene);

}  // namespace pilot
