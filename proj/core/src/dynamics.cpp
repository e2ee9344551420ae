#include "pilot/dynamics.hpp"

#include <cmath>

namespace pilot {

EgoState step(const EgoState& s, const Control& u, double dt, double L) {
  EgoState next;
  next.x = s.x + s.speed * std::cos(s.heading) * dt;
  next.y = s.y + s.speed * std::sin(s.heading) * dt;
  next.heading = wrap_angle(s.heading + s.speed * std::tan(u.steer) / L * dt);
  next.speed = s.speed + u.accel * dt;
  return next;
}

Trajectory rollout(const EgoState& s0, const std::vector<Control>& controls, double dt,
                   double L) {
  Trajectory traj;
  traj.dt = dt;
  traj.controls = controls;
  traj.states.reserve(controls.size() + 1);
  traj.states.push_back(s0);
  traj.states.front().heading = wrap_angle(traj.states.front().heading);
  for (const auto& u : controls) {
    traj.states.push_back(step(traj.states.back(), u, dt, L));
  }
  return traj;
}

Trajectory inverse_dynamics(const std::vector<Vec2>& positions, double v0, double dt,
                            double L) {
  const std::size_t n = positions.size();
  if (n < 3) throw DegenerateInput("inverse_dynamics: need at least 3 positions");
  if (!(dt > 0.0)) throw DegenerateInput("inverse_dynamics: dt must be > 0");

  const std::size_t steps = n - 1;  // displacement count
  std::vector<double> heading(n), speed(n);

  // Headings follow displacement directions; zero-length displacements carry
  // the previous heading (or the first following nonzero direction).
  bool any_motion = false;
  double carried = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    const Vec2 d = positions[k + 1] - positions[k];
    if (d.norm() >= 1e-12) {
      carried = std::atan2(d.y(), d.x());
      any_motion = true;
      break;
    }
  }
  if (!any_motion && std::abs(v0) > 1e-6) {
    throw DegenerateInput(
        "inverse_dynamics: all displacements vanish but initial speed is nonzero");
  }
  for (std::size_t k = 0; k < steps; ++k) {
    const Vec2 d = positions[k + 1] - positions[k];
    const double len = d.norm();
    if (len >= 1e-12) carried = std::atan2(d.y(), d.x());
    heading[k] = carried;
    speed[k] = len / dt;
  }
  heading[steps] = heading[steps - 1];
  speed[steps] = speed[steps - 1];
  speed[0] = v0;

  Trajectory traj;
  traj.dt = dt;
  traj.states.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    traj.states.push_back({positions[k].x(), positions[k].y(), wrap_angle(heading[k]),
                           speed[k]});
  }
  traj.controls.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    Control u;
    u.accel = (speed[k + 1] - speed[k]) / dt;
    u.steer = speed[k] < 1e-6
                  ? 0.0
                  : std::atan(L * wrap_angle(heading[k + 1] - heading[k]) / (speed[k] * dt));
    traj.controls.push_back(u);
  }
  return traj;
}

double defect(const Trajectory& traj, double L) {
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < traj.states.size(); ++k) {
    const EgoState pred = step(traj.states[k], traj.controls[k], traj.dt, L);
    const EgoState& got = traj.states[k + 1];
    worst = std::max(worst, std::abs(got.x - pred.x));
    worst = std::max(worst, std::abs(got.y - pred.y));
    worst = std::max(worst, std::abs(wrap_angle(got.heading - pred.heading)));
    worst = std::max(worst, std::abs(got.speed - pred.speed));
  }
  return worst;
}

}  // namespace pilot
