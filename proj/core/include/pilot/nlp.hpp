#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "pilot/costcon.hpp"
#include "pilot/problem.hpp"

namespace pilot {

enum class SolveStatus { Converged, MaxIters, Diverged };

const char* to_string(SolveStatus status);

struct SolveReport {
  SolveStatus status = SolveStatus::Diverged;
  int iterations = 0;  // total inner Gauss-Newton iterations
  double final_cost = 0.0;
  double max_violation = 0.0;
  double wall_time = 0.0;  // seconds spent inside solve
  Trajectory trajectory;
};

// Augmented-Lagrangian solve of the trajectory program from a full-horizon
// initialization. The initial state is taken from the scene; the init
// supplies states 1..N and all controls. Deterministic for fixed inputs.
// final_cost and max_violation are evaluated on the returned trajectory
// itself, so an external audit of the report reproduces them bit-exactly.
SolveReport solve(const Scene& scene, const Trajectory& init, const NlpConfig& cfg);

// Solves once per init. Converged reports are preferred (least final_cost);
// otherwise MaxIters reports (least max_violation); a Diverged report is
// returned only when every init diverged. Ties keep the earliest init.
SolveReport solve_with_restarts(const Scene& scene, const std::vector<Trajectory>& inits,
                                const NlpConfig& cfg);

}  // namespace pilot
