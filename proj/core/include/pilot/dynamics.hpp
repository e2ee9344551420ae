#pragma once

#include <stdexcept>
#include <vector>

#include "pilot/geometry.hpp"
#include "pilot/problem.hpp"

namespace pilot {

struct DegenerateInput : std::runtime_error {
  explicit DegenerateInput(const std::string& what) : std::runtime_error(what) {}
};

// Discrete kinematic bicycle model, explicit Euler:
//   x += v cos(theta) dt;  y += v sin(theta) dt
//   theta += v tan(steer) dt / L;  v += accel dt
EgoState step(const EgoState& s, const Control& u, double dt, double L);

Trajectory rollout(const EgoState& s0, const std::vector<Control>& controls, double dt,
                   double L);

// Reconstruct a full trajectory from a position sequence. Headings follow the
// displacement directions (carried through zero-length displacements), speeds
// come from displacement magnitudes with v0 overriding the first, controls
// from forward differences; steering is atan(L dtheta / (v dt)) and zero below
// v = 1e-6. The last state repeats the previous heading and speed, so the
// last control is (0, 0).
Trajectory inverse_dynamics(const std::vector<Vec2>& positions, double v0, double dt,
                            double L);

// Max component-wise defect |states[k+1] - step(states[k], controls[k])| over
// all steps; the heading component is compared modulo 2 pi.
double defect(const Trajectory& traj, double L);

}  // namespace pilot
