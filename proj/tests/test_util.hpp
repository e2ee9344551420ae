#pragma once

#include <cmath>
#include <vector>

#include "pilot/geometry.hpp"
#include "pilot/problem.hpp"
#include "pilot/rng.hpp"

namespace pilot::testutil {

// Canonical reference-frame planning problem: straight corridor of the given
// half width over [0, length], ego a little past the window start.
inline Scene straight_scene(int horizon, double dt, double ego_speed,
                            double length = 200.0, double half_width = 4.5) {
  Scene scene;
  scene.ego = {5.0, 0.0, 0.0, ego_speed};
  const int n = static_cast<int>(length);
  scene.reference_path.reserve(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) {
    scene.reference_path.emplace_back(static_cast<double>(i) * length / n, 0.0);
  }
  scene.borders.lower = CubicSpline({0.0, length}, {-half_width, -half_width});
  scene.borders.upper = CubicSpline({0.0, length}, {half_width, half_width});
  scene.borders.x_min = 0.0;
  scene.borders.x_max = length;
  scene.horizon_steps = horizon;
  scene.dt = dt;
  scene.v_min = 0.0;
  scene.v_max = 10.0;
  scene.target_x = std::min(length - 5.0, 5.0 + scene.v_max * horizon * dt);
  return scene;
}

// Agent parked (or cruising along x) ahead of the ego in a straight scene.
inline AgentPrediction straight_agent(int id, int horizon, double dt, double x,
                                      double y, double speed = 0.0,
                                      double heading = 0.0) {
  AgentPrediction agent;
  agent.id = id;
  agent.half_length = 2.4;
  agent.half_width = 0.95;
  agent.center_states.reserve(static_cast<std::size_t>(horizon) + 1);
  for (int k = 0; k <= horizon; ++k) {
    agent.center_states.push_back(
        {x + speed * k * dt * std::cos(heading), y + speed * k * dt * std::sin(heading),
         heading});
  }
  return agent;
}

}  // namespace pilot::testutil
