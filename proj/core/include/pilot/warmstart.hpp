#pragma once

#include <vector>

#include "pilot/geometry.hpp"
#include "pilot/nlp.hpp"
#include "pilot/problem.hpp"

namespace pilot {

enum class InitKind { None, ConstVel, ConstAccel, ConstDecel };

const char* to_string(InitKind kind);

// Full-horizon seed trajectories. None zeroes every state; the other three
// keep the current heading and ramp the speed (hold it, accelerate at a_max
// until v_max, or brake at a_min until standstill). All but None are exact
// rollouts, so their dynamics defect is zero.
Trajectory heuristic_init(InitKind kind, const Scene& scene, const NlpConfig& cfg);

// Turns a raw position sequence (typically a network prediction prefixed
// with the ego position) into a dynamically feasible trajectory: controls
// are reconstructed through inverse dynamics, speeds are clamped into
// [0, v_max], accelerations into [a_min, a_max] with jerk-limited increments
// and a look-ahead cap that keeps every future speed reachable inside its
// bounds, steering into [-delta_max, delta_max] with rate-limited
// increments, and the result is re-rolled out from the scene's ego state.
// The output satisfies all five bound families exactly and the map is
// idempotent.
Trajectory sanitize_network_output(const std::vector<Vec2>& positions, const Scene& scene,
                                   const NlpConfig& cfg);

// The ensemble members the expert solves from: the four heuristics plus a
// lane-centered constant-speed seed.
std::vector<Trajectory> expert_inits(const Scene& scene, const NlpConfig& cfg);

// Best-of-ensemble expert: solve from every member of expert_inits and keep
// the best report. The report's wall_time covers only the winning member's
// solve; callers measuring around the call can attribute the remainder to
// initialization.
SolveReport expert_plan(const Scene& scene, const NlpConfig& cfg);

}  // namespace pilot
