#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pilot/frenet.hpp"
#include "pilot/problem.hpp"

namespace pilot {

// An agent follows its route polyline at constant speed (speed 0 = parked),
// stopping at the route end. Pose heading follows the segment direction.
struct AgentSpawn {
  int id = 0;
  std::vector<Vec2> route;  // world frame, >= 1 point
  double speed = 0.0;
  double half_length = 2.4;
  double half_width = 0.95;
};

enum class Difficulty { Small, Large };

struct Scenario {
  std::uint64_t seed = 0;
  Difficulty difficulty = Difficulty::Small;
  std::vector<Vec2> route;  // ego reference path, world frame
  double lane_half_width = 4.5;
  EgoState ego_spawn;  // world frame
  std::vector<AgentSpawn> agents;
  double episode_horizon = 30.0;  // s, timeout
  double completion_arclength = 0.0;  // episode completes past this progress
  int horizon_steps = 40;
  double dt = 0.2;
  double v_max = 10.0;
  double v_min = 0.0;
};

enum class EpisodeStatus { Running, Completed, Collided, TimedOut };

const char* to_string(EpisodeStatus status);
const char* to_string(Difficulty difficulty);

struct SimState {
  double clock = 0.0;
  EgoState ego;  // world frame
  std::vector<Pose> agent_poses;
  EpisodeStatus status = EpisodeStatus::Running;
};

// Deterministic per seed. Small: straight road, 0-3 parked agents. Large:
// straight or arc road, 0-8 agents, parked or moving along the lane.
Scenario generate_scenario(std::uint64_t seed, Difficulty difficulty);

Pose agent_pose_at(const AgentSpawn& agent, double t);

SimState init_sim(const Scenario& scenario);

// Executes the first replan_every controls of a world-frame plan through the
// bicycle model, advancing agents and checking rectangle-rectangle collision,
// completion and timeout after every substep.
SimState step_closed_loop(const Scenario& scenario, const SimState& state,
                          const Trajectory& plan_world, int replan_every);

// The stretch of route the ego plans against: from slightly behind the ego to
// beyond its horizon reach, resampled to ~1 m spacing. Arc length restarts at
// zero, so reference-frame coordinates stay small.
ReferencePath planning_window(const SimState& state, const Scenario& scenario, int N,
                              double dt);

// World-frame planning problem at the current state: window path, corridor
// borders, ground-truth agent predictions sampled at the plan timestamps.
Scene extract_world_scene(const SimState& state, const Scenario& scenario, int N,
                          double dt);

// extract_world_scene transformed into the reference frame. Requires a
// Running state.
Scene extract_scene(const SimState& state, const Scenario& scenario, int N, double dt);

// A planner maps a reference-frame scene to a reference-frame plan.
using Planner = std::function<Trajectory(const Scene&)>;

struct EpisodeResult {
  EpisodeStatus status = EpisodeStatus::Running;
  double duration = 0.0;  // s of simulated time
  int planning_stages = 0;
  std::vector<SimState> trace;  // state after every substep, plus the initial
};

// Closed-loop episode driver: extract scene, plan, transform back, execute
// replan_every substeps, repeat until the episode ends. on_stage (optional)
// observes every planning problem before it is solved.
EpisodeResult run_episode(
    const Scenario& scenario, const Planner& planner, int replan_every,
    const std::function<void(const SimState&, const Scene&)>& on_stage = nullptr);

// Schema "pilot-scenario-v1".
std::string scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const std::string& text);
void save_scenario(const std::string& path, const Scenario& scenario);
Scenario load_scenario(const std::string& path);

// Plain-text episode trace: one row per substep with columns
//   clock ego_x ego_y ego_heading ego_speed status agent0_x agent0_y agent0_heading ...
void write_trace(const std::string& path, const Scenario& scenario,
                 const EpisodeResult& result);

}  // namespace pilot
