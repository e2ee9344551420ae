#include "pilot/problem.hpp"

#include <algorithm>
#include <cmath>

namespace pilot {

namespace {

bool all_finite(const EgoState& s) {
  return std::isfinite(s.x) && std::isfinite(s.y) && std::isfinite(s.heading) &&
         std::isfinite(s.speed);
}

}  // namespace

std::vector<std::string> validate_scene(const Scene& scene) {
  std::vector<std::string> violations;
  if (scene.horizon_steps < 1) {
    violations.push_back("horizon_steps: must be >= 1");
  }
  if (!(scene.dt > 0.0)) {
    violations.push_back("dt: must be > 0");
  }
  if (scene.v_min < 0.0) {
    violations.push_back("v_min: must be >= 0");
  }
  if (scene.v_min > scene.v_max) {
    violations.push_back("v_min/v_max: v_min must be <= v_max");
  }
  if (!all_finite(scene.ego)) {
    violations.push_back("ego: all state components must be finite");
  }
  if (scene.ego.speed < scene.v_min || scene.ego.speed > scene.v_max) {
    violations.push_back("ego.speed: must lie in [v_min, v_max]");
  }
  if (scene.reference_path.size() < 2) {
    violations.push_back("reference_path: needs at least 2 points");
  }
  for (std::size_t i = 1; i < scene.reference_path.size(); ++i) {
    if ((scene.reference_path[i] - scene.reference_path[i - 1]).norm() <= 0.0) {
      violations.push_back("reference_path: consecutive points must be distinct");
      break;
    }
  }
  if (scene.borders.lower.empty() || scene.borders.upper.empty()) {
    violations.push_back("borders: lower and upper must be non-empty");
  } else {
    if (!(scene.borders.x_min < scene.borders.x_max)) {
      violations.push_back("borders: domain must be a non-empty interval");
    }
    const int samples = 64;
    for (int i = 0; i <= samples; ++i) {
      const double x = scene.borders.x_min +
                       (scene.borders.x_max - scene.borders.x_min) * i / samples;
      if (!(scene.borders.lower.value(x) < scene.borders.upper.value(x))) {
        violations.push_back("borders: lower must stay below upper on the domain");
        break;
      }
    }
  }
  const std::size_t want = static_cast<std::size_t>(scene.horizon_steps) + 1;
  for (const auto& agent : scene.agents) {
    if (agent.center_states.size() != want) {
      violations.push_back("agents[" + std::to_string(agent.id) +
                           "].center_states: prediction length must be horizon_steps + 1");
    }
    if (!(agent.half_length > 0.0) || !(agent.half_width > 0.0)) {
      violations.push_back("agents[" + std::to_string(agent.id) +
                           "]: half extents must be > 0");
    }
  }
  return violations;
}

void clamp_ego_speed(Scene& scene) {
  scene.ego.speed = std::clamp(scene.ego.speed, scene.v_min, scene.v_max);
}

}  // namespace pilot
