#include "pilot/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "pilot/dynamics.hpp"
#include "pilot/rng.hpp"
#include "pilot/serialization.hpp"

namespace pilot {

namespace {

// Simulated vehicle geometry; the planner's model matches these defaults.
constexpr double kEgoWheelbase = 4.8;
constexpr double kEgoHalfLength = 2.4;
constexpr double kEgoHalfWidth = 0.95;

constexpr double kWindowBehind = 5.0;
constexpr double kWindowAheadPad = 40.0;
constexpr double kAgentAheadPad = 5.0;
constexpr double kAgentBehindPad = 2.0;
constexpr double kPassedSlack = 1.0;
constexpr double kTargetEndGap = 5.0;

ReferencePath route_path(const Scenario& scenario) {
  return ReferencePath::from_points(scenario.route);
}

OrientedBox ego_box(const EgoState& ego) {
  OrientedBox box;
  box.center = {ego.x, ego.y};
  box.heading = ego.heading;
  box.half_length = kEgoHalfLength;
  box.half_width = kEgoHalfWidth;
  return box;
}

OrientedBox agent_box(const AgentSpawn& agent, const Pose& pose) {
  OrientedBox box;
  box.center = {pose.x, pose.y};
  box.heading = pose.heading;
  box.half_length = agent.half_length;
  box.half_width = agent.half_width;
  return box;
}

// One simulation substep: bicycle step, agents move, status checks in the
// order collision, completion, timeout.
SimState advance_substep(const Scenario& scenario, const ReferencePath& route,
                         const SimState& state, const Control& control) {
  SimState next = state;
  if (state.status != EpisodeStatus::Running) return next;
  next.ego = step(state.ego, control, scenario.dt, kEgoWheelbase);
  next.clock = state.clock + scenario.dt;
  next.agent_poses.resize(scenario.agents.size());
  for (std::size_t i = 0; i < scenario.agents.size(); ++i) {
    next.agent_poses[i] = agent_pose_at(scenario.agents[i], next.clock);
  }
  const OrientedBox ego = ego_box(next.ego);
  for (std::size_t i = 0; i < scenario.agents.size(); ++i) {
    if (boxes_overlap(ego, agent_box(scenario.agents[i], next.agent_poses[i]))) {
      next.status = EpisodeStatus::Collided;
      return next;
    }
  }
  const Projection proj = project_point(route, {next.ego.x, next.ego.y});
  if (proj.arclength >= scenario.completion_arclength) {
    next.status = EpisodeStatus::Completed;
    return next;
  }
  if (next.clock >= scenario.episode_horizon - 1e-9) {
    next.status = EpisodeStatus::TimedOut;
  }
  return next;
}

struct WindowPlan {
  double s_ego = 0.0;
  double win_start = 0.0;
  double win_end = 0.0;
  std::vector<std::size_t> kept_agents;
};

// Window selection: a fixed stretch around the ego, extended to cover every
// agent prediction that still matters. Agents fully behind the window start
// are dropped; agents reaching past the nominal end stretch it so that all
// their predicted poses project strictly inside the window.
WindowPlan window_plan(const SimState& state, const Scenario& scenario,
                       const ReferencePath& route, int N, double dt) {
  WindowPlan plan;
  plan.s_ego = project_point(route, {state.ego.x, state.ego.y}).arclength;
  plan.win_start = std::max(0.0, plan.s_ego - kWindowBehind);
  plan.win_end = plan.s_ego + scenario.v_max * N * dt + kWindowAheadPad;
  for (std::size_t i = 0; i < scenario.agents.size(); ++i) {
    double min_s = std::numeric_limits<double>::infinity();
    double max_s = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= N; ++k) {
      const Pose pose = agent_pose_at(scenario.agents[i], state.clock + k * dt);
      const double s = project_point(route, {pose.x, pose.y}).arclength;
      min_s = std::min(min_s, s);
      max_s = std::max(max_s, s);
    }
    if (max_s < plan.win_start + kPassedSlack) continue;  // already passed
    plan.kept_agents.push_back(i);
    plan.win_end = std::max(plan.win_end, max_s + kAgentAheadPad);
    plan.win_start = std::min(plan.win_start, std::max(0.0, min_s - kAgentBehindPad));
  }
  plan.win_end = std::min(plan.win_end, route.length());
  return plan;
}

ReferencePath resample_window(const ReferencePath& route, double win_start,
                              double win_end) {
  const double len = win_end - win_start;
  const int segments = std::max(1, static_cast<int>(std::lround(len)));
  std::vector<Vec2> points;
  points.reserve(static_cast<std::size_t>(segments) + 1);
  for (int i = 0; i <= segments; ++i) {
    points.push_back(route.position_at(win_start + len * i / segments));
  }
  return ReferencePath::from_points(std::move(points));
}

}  // namespace

const char* to_string(EpisodeStatus status) {
  switch (status) {
    case EpisodeStatus::Running: return "running";
    case EpisodeStatus::Completed: return "completed";
    case EpisodeStatus::Collided: return "collided";
    default: return "timed_out";
  }
}

const char* to_string(Difficulty difficulty) {
  return difficulty == Difficulty::Small ? "small" : "large";
}

Pose agent_pose_at(const AgentSpawn& agent, double t) {
  Pose pose;
  if (agent.route.empty()) return pose;
  if (agent.route.size() == 1) {
    pose.x = agent.route[0].x();
    pose.y = agent.route[0].y();
    return pose;
  }
  std::vector<double> cum(agent.route.size(), 0.0);
  for (std::size_t i = 1; i < agent.route.size(); ++i) {
    cum[i] = cum[i - 1] + (agent.route[i] - agent.route[i - 1]).norm();
  }
  const double s = std::clamp(std::max(0.0, agent.speed) * std::max(0.0, t), 0.0,
                              cum.back());
  std::size_t seg = static_cast<std::size_t>(
      std::upper_bound(cum.begin(), cum.end(), s) - cum.begin());
  seg = std::min(std::max<std::size_t>(seg, 1), cum.size() - 1) - 1;
  const Vec2 a = agent.route[seg];
  const Vec2 b = agent.route[seg + 1];
  const double seg_len = cum[seg + 1] - cum[seg];
  const double t01 = seg_len > 0.0 ? (s - cum[seg]) / seg_len : 0.0;
  const Vec2 p = a + t01 * (b - a);
  pose.x = p.x();
  pose.y = p.y();
  pose.heading = std::atan2(b.y() - a.y(), b.x() - a.x());
  return pose;
}

Scenario generate_scenario(std::uint64_t seed, Difficulty difficulty) {
  Scenario sc;
  sc.seed = seed;
  sc.difficulty = difficulty;
  Rng root(seed);
  Rng route_rng = root.fork(1);
  Rng ego_rng = root.fork(2);
  Rng agent_rng = root.fork(3);

  sc.completion_arclength = difficulty == Difficulty::Small
                                ? route_rng.uniform(80.0, 120.0)
                                : route_rng.uniform(120.0, 200.0);
  // Long enough that no agent can reach the route end within an episode, so
  // every prediction projects strictly inside the planning window.
  const double total_len = sc.completion_arclength + 210.0;

  const double ox = route_rng.uniform(-200.0, 200.0);
  const double oy = route_rng.uniform(-200.0, 200.0);
  const double phi = route_rng.uniform(-kPi, kPi);
  double curvature = 0.0;
  if (difficulty == Difficulty::Large && route_rng.uniform() < 0.5) {
    const double radius = route_rng.uniform(150.0, 400.0);
    curvature = (route_rng.uniform() < 0.5 ? 1.0 : -1.0) / radius;
  }
  const int route_segments = static_cast<int>(std::ceil(total_len / 5.0));
  for (int i = 0; i <= route_segments; ++i) {
    const double s = total_len * i / route_segments;
    if (curvature == 0.0) {
      sc.route.emplace_back(ox + s * std::cos(phi), oy + s * std::sin(phi));
    } else {
      sc.route.emplace_back(ox + (std::sin(phi + curvature * s) - std::sin(phi)) / curvature,
                            oy + (std::cos(phi) - std::cos(phi + curvature * s)) / curvature);
    }
  }
  const ReferencePath route = route_path(sc);

  const auto normal_at = [&](double s) {
    const double tangent = route.tangent_at(s);
    return Vec2{-std::sin(tangent), std::cos(tangent)};
  };

  const double s0 = ego_rng.uniform(3.0, 7.0);
  const double y0 = ego_rng.uniform(-1.5, 1.5);
  const Vec2 ego_pos = route.position_at(s0) + y0 * normal_at(s0);
  sc.ego_spawn.x = ego_pos.x();
  sc.ego_spawn.y = ego_pos.y();
  sc.ego_spawn.heading = wrap_angle(route.tangent_at(s0) + ego_rng.uniform(-0.05, 0.05));
  sc.ego_spawn.speed = difficulty == Difficulty::Small ? ego_rng.uniform(3.0, 9.0)
                                                       : ego_rng.uniform(2.0, 10.0);

  const int agent_count = static_cast<int>(
      difficulty == Difficulty::Small ? agent_rng.below(4) : agent_rng.below(9));
  std::vector<double> occupied{s0};
  const auto well_separated = [&](double s) {
    for (double o : occupied) {
      if (std::abs(s - o) < 14.0) return false;
    }
    return true;
  };
  for (int i = 0; i < agent_count; ++i) {
    const bool parked =
        difficulty == Difficulty::Small ? true : agent_rng.uniform() < 0.5;
    for (int attempt = 0; attempt < 30; ++attempt) {
      AgentSpawn agent;
      agent.id = static_cast<int>(sc.agents.size());
      if (parked) {
        const double s = agent_rng.uniform(s0 + 12.0, sc.completion_arclength - 10.0);
        const double side = agent_rng.uniform() < 0.5 ? -1.0 : 1.0;
        const double off = side * agent_rng.uniform(1.8, 3.2);
        const double heading =
            wrap_angle(route.tangent_at(s) + agent_rng.uniform(-0.25, 0.25));
        if (!well_separated(s)) continue;
        const Vec2 pos = route.position_at(s) + off * normal_at(s);
        agent.route = {pos, pos + Vec2{std::cos(heading), std::sin(heading)}};
        agent.speed = 0.0;
        occupied.push_back(s);
      } else {
        const double s = agent_rng.uniform(s0 + 15.0, sc.completion_arclength - 20.0);
        const double off = agent_rng.uniform(-1.0, 1.0);
        const double speed = agent_rng.uniform(2.0, 7.0);
        if (!well_separated(s)) continue;
        const int steps = static_cast<int>(std::ceil((total_len - s) / 5.0));
        for (int j = 0; j <= steps; ++j) {
          const double sj = s + (total_len - s) * j / steps;
          agent.route.push_back(route.position_at(sj) + off * normal_at(sj));
        }
        agent.speed = speed;
        occupied.push_back(s);
      }
      sc.agents.push_back(std::move(agent));
      break;
    }
  }
  return sc;
}

SimState init_sim(const Scenario& scenario) {
  SimState state;
  state.clock = 0.0;
  state.ego = scenario.ego_spawn;
  state.agent_poses.reserve(scenario.agents.size());
  for (const AgentSpawn& agent : scenario.agents) {
    state.agent_poses.push_back(agent_pose_at(agent, 0.0));
  }
  state.status = EpisodeStatus::Running;
  return state;
}

SimState step_closed_loop(const Scenario& scenario, const SimState& state,
                          const Trajectory& plan_world, int replan_every) {
  if (replan_every < 1 || plan_world.horizon() < replan_every) {
    throw DimensionMismatch("step_closed_loop: plan shorter than the replan interval");
  }
  if (plan_world.dt != scenario.dt) {
    throw DimensionMismatch("step_closed_loop: plan dt does not match the scenario");
  }
  const ReferencePath route = route_path(scenario);
  SimState current = state;
  for (int i = 0; i < replan_every && current.status == EpisodeStatus::Running; ++i) {
    current = advance_substep(scenario, route, current,
                              plan_world.controls[static_cast<std::size_t>(i)]);
  }
  return current;
}

ReferencePath planning_window(const SimState& state, const Scenario& scenario, int N,
                              double dt) {
  const ReferencePath route = route_path(scenario);
  const WindowPlan plan = window_plan(state, scenario, route, N, dt);
  return resample_window(route, plan.win_start, plan.win_end);
}

Scene extract_world_scene(const SimState& state, const Scenario& scenario, int N,
                          double dt) {
  const ReferencePath route = route_path(scenario);
  const WindowPlan plan = window_plan(state, scenario, route, N, dt);
  const ReferencePath window = resample_window(route, plan.win_start, plan.win_end);

  Scene scene;
  scene.ego = state.ego;
  scene.reference_path = window.points();
  scene.horizon_steps = N;
  scene.dt = dt;
  scene.v_min = scenario.v_min;
  scene.v_max = scenario.v_max;

  const double win_len = window.length();
  const double s_ego_w =
      project_point(window, {state.ego.x, state.ego.y}).arclength;
  scene.target_x = std::min(win_len - kTargetEndGap, s_ego_w + scenario.v_max * N * dt);
  scene.target_x = std::max(scene.target_x, s_ego_w + 1.0);

  scene.borders.lower = CubicSpline({0.0, win_len},
                                    {-scenario.lane_half_width, -scenario.lane_half_width});
  scene.borders.upper = CubicSpline({0.0, win_len},
                                    {scenario.lane_half_width, scenario.lane_half_width});
  scene.borders.x_min = 0.0;
  scene.borders.x_max = win_len;

  for (std::size_t idx : plan.kept_agents) {
    const AgentSpawn& spawn = scenario.agents[idx];
    AgentPrediction pred;
    pred.id = spawn.id;
    pred.half_length = spawn.half_length;
    pred.half_width = spawn.half_width;
    pred.center_states.reserve(static_cast<std::size_t>(N) + 1);
    for (int k = 0; k <= N; ++k) {
      pred.center_states.push_back(agent_pose_at(spawn, state.clock + k * dt));
    }
    scene.agents.push_back(std::move(pred));
  }
  clamp_ego_speed(scene);
  return scene;
}

Scene extract_scene(const SimState& state, const Scenario& scenario, int N, double dt) {
  return to_reference_frame(extract_world_scene(state, scenario, N, dt));
}

EpisodeResult run_episode(const Scenario& scenario, const Planner& planner,
                          int replan_every,
                          const std::function<void(const SimState&, const Scene&)>& on_stage) {
  if (replan_every < 1) {
    throw DimensionMismatch("run_episode: replan_every must be at least 1");
  }
  const ReferencePath route = route_path(scenario);
  EpisodeResult result;
  SimState state = init_sim(scenario);
  result.trace.push_back(state);
  while (state.status == EpisodeStatus::Running) {
    const WindowPlan plan =
        window_plan(state, scenario, route, scenario.horizon_steps, scenario.dt);
    const ReferencePath window = resample_window(route, plan.win_start, plan.win_end);
    const Scene scene_world =
        extract_world_scene(state, scenario, scenario.horizon_steps, scenario.dt);
    const Scene scene_ref = to_reference_frame(scene_world);
    if (on_stage) on_stage(state, scene_ref);
    const Trajectory plan_ref = planner(scene_ref);
    if (plan_ref.horizon() < replan_every) {
      throw DimensionMismatch("run_episode: plan shorter than the replan interval");
    }
    const Trajectory plan_world = from_reference_frame(plan_ref, window);
    ++result.planning_stages;
    for (int i = 0; i < replan_every && state.status == EpisodeStatus::Running; ++i) {
      state = advance_substep(scenario, route, state,
                              plan_world.controls[static_cast<std::size_t>(i)]);
      result.trace.push_back(state);
    }
  }
  result.status = state.status;
  result.duration = state.clock;
  return result;
}

std::string scenario_to_json(const Scenario& scenario) {
  JsonWriter w;
  w.begin_object();
  w.key("schema");
  w.value("pilot-scenario-v1");
  w.key("seed");
  w.value(scenario.seed);
  w.key("difficulty");
  w.value(to_string(scenario.difficulty));
  w.key("route");
  w.begin_array();
  for (const Vec2& p : scenario.route) {
    w.begin_array();
    w.value(p.x());
    w.value(p.y());
    w.end_array();
  }
  w.end_array();
  w.key("lane_half_width");
  w.value(scenario.lane_half_width);
  w.key("ego_spawn");
  w.begin_object();
  w.key("x");
  w.value(scenario.ego_spawn.x);
  w.key("y");
  w.value(scenario.ego_spawn.y);
  w.key("heading");
  w.value(scenario.ego_spawn.heading);
  w.key("speed");
  w.value(scenario.ego_spawn.speed);
  w.end_object();
  w.key("agents");
  w.begin_array();
  for (const AgentSpawn& agent : scenario.agents) {
    w.begin_object();
    w.key("id");
    w.value(agent.id);
    w.key("speed");
    w.value(agent.speed);
    w.key("half_length");
    w.value(agent.half_length);
    w.key("half_width");
    w.value(agent.half_width);
    w.key("route");
    w.begin_array();
    for (const Vec2& p : agent.route) {
      w.begin_array();
      w.value(p.x());
      w.value(p.y());
      w.end_array();
    }
    w.end_array();
    w.end_object();
  }
  w.end_array();
  w.key("episode_horizon");
  w.value(scenario.episode_horizon);
  w.key("completion_arclength");
  w.value(scenario.completion_arclength);
  w.key("horizon_steps");
  w.value(scenario.horizon_steps);
  w.key("dt");
  w.value(scenario.dt);
  w.key("v_max");
  w.value(scenario.v_max);
  w.key("v_min");
  w.value(scenario.v_min);
  w.end_object();
  return w.take();
}

Scenario scenario_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("schema", "") != std::string("pilot-scenario-v1")) {
    throw std::runtime_error("scenario_from_json: expected schema pilot-scenario-v1");
  }
  Scenario sc;
  sc.seed = j.at("seed").get<std::uint64_t>();
  sc.difficulty = j.at("difficulty").get<std::string>() == "large" ? Difficulty::Large
                                                                   : Difficulty::Small;
  for (const auto& p : j.at("route")) {
    sc.route.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  }
  sc.lane_half_width = j.at("lane_half_width").get<double>();
  const auto& ego = j.at("ego_spawn");
  sc.ego_spawn.x = ego.at("x").get<double>();
  sc.ego_spawn.y = ego.at("y").get<double>();
  sc.ego_spawn.heading = ego.at("heading").get<double>();
  sc.ego_spawn.speed = ego.at("speed").get<double>();
  for (const auto& a : j.at("agents")) {
    AgentSpawn agent;
    agent.id = a.at("id").get<int>();
    agent.speed = a.at("speed").get<double>();
    agent.half_length = a.at("half_length").get<double>();
    agent.half_width = a.at("half_width").get<double>();
    for (const auto& p : a.at("route")) {
      agent.route.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    }
    sc.agents.push_back(std::move(agent));
  }
  sc.episode_horizon = j.at("episode_horizon").get<double>();
  sc.completion_arclength = j.at("completion_arclength").get<double>();
  sc.horizon_steps = j.at("horizon_steps").get<int>();
  sc.dt = j.at("dt").get<double>();
  sc.v_max = j.at("v_max").get<double>();
  sc.v_min = j.at("v_min").get<double>();
  return sc;
}

void save_scenario(const std::string& path, const Scenario& scenario) {
  write_text_file(path, scenario_to_json(scenario));
}

Scenario load_scenario(const std::string& path) {
  return scenario_from_json(read_text_file(path));
}

void write_trace(const std::string& path, const Scenario& scenario,
                 const EpisodeResult& result) {
  std::string out = "# clock ego_x ego_y ego_heading ego_speed status";
  for (std::size_t i = 0; i < scenario.agents.size(); ++i) {
    const std::string tag = "agent" + std::to_string(scenario.agents[i].id);
    out += " " + tag + "_x " + tag + "_y " + tag + "_heading";
  }
  out += '\n';
  for (const SimState& s : result.trace) {
    out += format_double(s.clock);
    out += ' ';
    out += format_double(s.ego.x);
    out += ' ';
    out += format_double(s.ego.y);
    out += ' ';
    out += format_double(s.ego.heading);
    out += ' ';
    out += format_double(s.ego.speed);
    out += ' ';
    out += to_string(s.status);
    for (const Pose& p : s.agent_poses) {
      out += ' ';
      out += format_double(p.x);
      out += ' ';
      out += format_double(p.y);
      out += ' ';
      out += format_double(p.heading);
    }
    out += '\n';
  }
  write_text_file(path, out);
}

}  // namespace pilot
