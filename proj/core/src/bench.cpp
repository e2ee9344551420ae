#include "pilot/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <CLI11.hpp>

#include "pilot/dynamics.hpp"
#include "pilot/raster.hpp"
#include "pilot/serialization.hpp"
#include "pilot/sim.hpp"
#include "pilot/warmstart.hpp"

namespace pilot {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

PlannerRun run_from_report(const SolveReport& report, double total_time) {
  PlannerRun run;
  run.status = report.status;
  run.total_time = total_time;
  run.nlp_time = report.wall_time;
  run.init_time = std::max(0.0, total_time - report.wall_time);
  run.cost = report.final_cost;
  run.max_violation = report.max_violation;
  run.iterations = report.iterations;
  return run;
}

PlannerRun pilot_run(const Scene& scene, const RegressorModel& model, const NlpConfig& cfg) {
  const double t0 = now_seconds();
  const SolveReport report = pilot_infer(model, scene, cfg);
  return run_from_report(report, now_seconds() - t0);
}

PlannerRun expert_run(const Scene& scene, const NlpConfig& cfg) {
  const double t0 = now_seconds();
  const SolveReport report = expert_plan(scene, cfg);
  return run_from_report(report, now_seconds() - t0);
}

Table1Result::Row aggregate_row(const std::string& planner,
                                const std::vector<PlannerRun>& runs,
                                const std::vector<bool>& keep) {
  std::vector<double> init, nlp, total, cost;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (!keep[i]) continue;
    init.push_back(runs[i].init_time);
    nlp.push_back(runs[i].nlp_time);
    total.push_back(runs[i].total_time);
    cost.push_back(runs[i].cost);
  }
  Table1Result::Row row;
  row.planner = planner;
  row.init_time = aggregate(init);
  row.nlp_time = aggregate(nlp);
  row.total_time = aggregate(total);
  row.cost = aggregate(cost);
  return row;
}

}  // namespace

AggregateStat aggregate(const std::vector<double>& values) {
  AggregateStat stat;
  if (values.empty()) return stat;
  double sum = 0.0;
  for (double v : values) sum += v;
  stat.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - stat.mean) * (v - stat.mean);
    stat.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return stat;
}

void parallel_for(int count, int workers, const std::function<void(int)>& fn) {
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

Table1Result run_table1(const std::vector<Scene>& problems, const RegressorModel& model,
                        const NlpConfig& cfg, int workers) {
  const int n = static_cast<int>(problems.size());
  Table1Result result;
  result.pilot_runs.resize(static_cast<std::size_t>(n));
  result.expert_runs.resize(static_cast<std::size_t>(n));
  parallel_for(n, workers, [&](int i) {
    const Scene& scene = problems[static_cast<std::size_t>(i)];
    result.pilot_runs[static_cast<std::size_t>(i)] = pilot_run(scene, model, cfg);
    result.expert_runs[static_cast<std::size_t>(i)] = expert_run(scene, cfg);
  });
  std::vector<bool> both(static_cast<std::size_t>(n), false);
  for (int i = 0; i < n; ++i) {
    both[static_cast<std::size_t>(i)] =
        result.pilot_runs[static_cast<std::size_t>(i)].status == SolveStatus::Converged &&
        result.expert_runs[static_cast<std::size_t>(i)].status == SolveStatus::Converged;
    if (both[static_cast<std::size_t>(i)]) ++result.co_converged;
  }
  result.rows.push_back(aggregate_row("pilot", result.pilot_runs, both));
  result.rows.push_back(aggregate_row("expert", result.expert_runs, both));
  return result;
}

Table2Result run_table2(const std::vector<Scene>& problems, const RegressorModel& model,
                        const NlpConfig& cfg, int workers) {
  const int n = static_cast<int>(problems.size());
  const std::array<const char*, 5> init_names{"none", "constvel", "constaccel",
                                              "constdecel", "network"};
  Table2Result result;
  result.expert_runs.resize(static_cast<std::size_t>(n));
  std::vector<std::vector<PlannerRun>> init_runs(
      init_names.size(), std::vector<PlannerRun>(static_cast<std::size_t>(n)));

  parallel_for(n, workers, [&](int i) {
    const Scene& scene = problems[static_cast<std::size_t>(i)];
    result.expert_runs[static_cast<std::size_t>(i)] = expert_run(scene, cfg);
    for (std::size_t v = 0; v < init_names.size(); ++v) {
      const double t0 = now_seconds();
      Trajectory init;
      if (v < 4) {
        init = heuristic_init(static_cast<InitKind>(v), scene, cfg);
      } else {
        std::vector<Vec2> positions;
        const std::vector<Vec2> waypoints = infer_waypoints(model, scene);
        positions.reserve(waypoints.size() + 1);
        positions.emplace_back(scene.ego.x, scene.ego.y);
        positions.insert(positions.end(), waypoints.begin(), waypoints.end());
        init = sanitize_network_output(positions, scene, cfg);
      }
      const SolveReport report = solve(scene, init, cfg);
      init_runs[v][static_cast<std::size_t>(i)] =
          run_from_report(report, now_seconds() - t0);
    }
  });

  for (int i = 0; i < n; ++i) {
    if (result.expert_runs[static_cast<std::size_t>(i)].status == SolveStatus::Converged) {
      ++result.expert_converged;
    }
  }
  result.delta_time.assign(init_names.size(),
                           std::vector<double>(static_cast<std::size_t>(n), kNaN));
  for (std::size_t v = 0; v < init_names.size(); ++v) {
    Table2Result::Row row;
    row.init = init_names[v];
    std::vector<double> dtime, dcost;
    int converged_given_expert = 0;
    for (int i = 0; i < n; ++i) {
      const PlannerRun& expert = result.expert_runs[static_cast<std::size_t>(i)];
      const PlannerRun& run = init_runs[v][static_cast<std::size_t>(i)];
      if (expert.status != SolveStatus::Converged) continue;
      if (run.status != SolveStatus::Converged) continue;
      ++converged_given_expert;
      const double delta = run.nlp_time - expert.nlp_time;
      result.delta_time[v][static_cast<std::size_t>(i)] = delta;
      dtime.push_back(delta);
      if (expert.cost >= 1e-3) {
        dcost.push_back(100.0 * (run.cost - expert.cost) / expert.cost);
      }
    }
    row.converged_pct = result.expert_converged > 0
                            ? 100.0 * converged_given_expert / result.expert_converged
                            : 0.0;
    row.delta_nlp_time = aggregate(dtime);
    row.delta_cost_pct = aggregate(dcost);
    row.compared = static_cast<int>(dtime.size());
    result.rows.push_back(std::move(row));
  }
  return result;
}

const char* to_string(AuditPlanner planner) {
  switch (planner) {
    case AuditPlanner::Pilot: return "pilot";
    case AuditPlanner::RawNetwork: return "raw_network";
    default: return "expert";
  }
}

Trajectory raw_network_trajectory(const RegressorModel& model, const Scene& scene,
                                  const NlpConfig& cfg) {
  const std::vector<Vec2> waypoints = infer_waypoints(model, scene);
  std::vector<Vec2> positions;
  positions.reserve(waypoints.size() + 1);
  positions.emplace_back(scene.ego.x, scene.ego.y);
  positions.insert(positions.end(), waypoints.begin(), waypoints.end());
  Trajectory traj = inverse_dynamics(positions, scene.ego.speed, scene.dt, cfg.wheelbase);
  traj.states[0] = scene.ego;
  return traj;
}

SatisfactionResult run_constraint_satisfaction(const std::vector<Scene>& problems,
                                               const std::vector<AuditPlanner>& planners,
                                               const RegressorModel& model,
                                               const NlpConfig& cfg, int workers) {
  const int n = static_cast<int>(problems.size());
  SatisfactionResult result;
  for (AuditPlanner planner : planners) {
    std::vector<ConstraintReport> reports(static_cast<std::size_t>(n));
    std::vector<bool> audited(static_cast<std::size_t>(n), false);
    parallel_for(n, workers, [&](int i) {
      const Scene& scene = problems[static_cast<std::size_t>(i)];
      Trajectory traj;
      bool ok = true;
      if (planner == AuditPlanner::Pilot) {
        const SolveReport report = pilot_infer(model, scene, cfg);
        ok = report.status == SolveStatus::Converged;
        traj = report.trajectory;
      } else if (planner == AuditPlanner::Expert) {
        const SolveReport report = expert_plan(scene, cfg);
        ok = report.status == SolveStatus::Converged;
        traj = report.trajectory;
      } else {
        traj = raw_network_trajectory(model, scene, cfg);
      }
      if (ok) {
        reports[static_cast<std::size_t>(i)] = constraint_report(traj, scene, cfg);
        audited[static_cast<std::size_t>(i)] = true;
      }
    });
    SatisfactionResult::Row row;
    row.planner = to_string(planner);
    for (int i = 0; i < n; ++i) {
      if (!audited[static_cast<std::size_t>(i)]) continue;
      ++row.problems;
      const std::array<double, 8> fam = reports[static_cast<std::size_t>(i)].as_array();
      for (std::size_t f = 0; f < fam.size(); ++f) {
        if (fam[f] <= cfg.constraint_tol) row.family_pct[f] += 1.0;
      }
    }
    if (row.problems > 0) {
      for (double& pct : row.family_pct) pct = 100.0 * pct / row.problems;
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

std::string table1_tsv(const Table1Result& result) {
  std::string out =
      "planner\tinit_time_mean\tinit_time_std\tnlp_time_mean\tnlp_time_std\t"
      "total_time_mean\ttotal_time_std\tcost_mean\tcost_std\n";
  for (const Table1Result::Row& row : result.rows) {
    out += row.planner;
    for (const AggregateStat& stat :
         {row.init_time, row.nlp_time, row.total_time, row.cost}) {
      out += '\t';
      out += format_double(stat.mean);
      out += '\t';
      out += format_double(stat.std);
    }
    out += '\n';
  }
  out += "# co_converged\t" + std::to_string(result.co_converged) + "\tof\t" +
         std::to_string(result.pilot_runs.size()) + "\n";
  return out;
}

std::string table2_tsv(const Table2Result& result) {
  std::string out =
      "init\tconverged_pct\tdelta_nlp_time_mean\tdelta_nlp_time_std\t"
      "delta_cost_pct_mean\tdelta_cost_pct_std\tcompared\n";
  for (const Table2Result::Row& row : result.rows) {
    out += row.init;
    out += '\t';
    out += format_double(row.converged_pct);
    out += '\t';
    out += format_double(row.delta_nlp_time.mean);
    out += '\t';
    out += format_double(row.delta_nlp_time.std);
    out += '\t';
    out += format_double(row.delta_cost_pct.mean);
    out += '\t';
    out += format_double(row.delta_cost_pct.std);
    out += '\t';
    out += std::to_string(row.compared);
    out += '\n';
  }
  out += "# expert_converged\t" + std::to_string(result.expert_converged) + "\tof\t" +
         std::to_string(result.expert_runs.size()) + "\n";
  return out;
}

std::string satisfaction_tsv(const SatisfactionResult& result) {
  std::string out = "planner\tproblems";
  for (const char* name : ConstraintReport::family_names()) {
    out += '\t';
    out += name;
  }
  out += '\n';
  for (const SatisfactionResult::Row& row : result.rows) {
    out += row.planner;
    out += '\t';
    out += std::to_string(row.problems);
    for (double pct : row.family_pct) {
      out += '\t';
      out += format_double(pct);
    }
    out += '\n';
  }
  return out;
}

namespace {

namespace fs = std::filesystem;

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string nlp_config_json(const NlpConfig& cfg) {
  JsonWriter w;
  w.begin_object();
  const auto field = [&](const char* name, double v) {
    w.key(name);
    w.value(v);
  };
  field("wheelbase", cfg.wheelbase);
  field("delta_max", cfg.delta_max);
  field("a_min", cfg.a_min);
  field("a_max", cfg.a_max);
  field("jerk_max", cfg.jerk_max);
  field("steer_jerk_max", cfg.steer_jerk_max);
  field("w_delta", cfg.w_delta);
  field("w_x", cfg.w_x);
  field("w_v", cfg.w_v);
  field("w_y", cfg.w_y);
  field("w_a", cfg.w_a);
  field("constraint_tol", cfg.constraint_tol);
  w.key("max_iters");
  w.value(cfg.max_iters);
  w.key("max_inner_iters");
  w.value(cfg.max_inner_iters);
  field("ellipse_margin", cfg.ellipse_margin);
  field("ego_length", cfg.ego_length);
  field("ego_width", cfg.ego_width);
  w.end_object();
  return w.take();
}

std::vector<std::string> list_problem_files(const std::string& dir) {
  std::vector<std::string> files;
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("problem directory not found: " + dir);
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (entry.path().extension() != ".json") continue;
    if (name.find("manifest") != std::string::npos) continue;
    files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<Scene> load_problems(const std::vector<std::string>& files) {
  std::vector<Scene> scenes;
  scenes.reserve(files.size());
  for (const std::string& f : files) scenes.push_back(load_scene(f));
  return scenes;
}

void write_run_array(JsonWriter& w, const std::vector<std::string>& files,
                     const std::vector<PlannerRun>& runs) {
  w.begin_array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const PlannerRun& run = runs[i];
    w.begin_object();
    w.key("problem");
    w.value(fs::path(files[i]).filename().string());
    w.key("status");
    w.value(to_string(run.status));
    w.key("cost");
    w.value(run.cost);
    w.key("max_violation");
    w.value(run.max_violation);
    w.key("iterations");
    w.value(run.iterations);
    w.key("init_time");
    w.value(run.init_time);
    w.key("nlp_time");
    w.value(run.nlp_time);
    w.key("total_time");
    w.value(run.total_time);
    w.end_object();
  }
  w.end_array();
}

struct GenerateOptions {
  std::uint64_t seed = 1;
  int count = 8;
  std::string difficulty = "small";
  int horizon = 0;
  int stages = 1;
  std::string out;
};

int run_generate(const GenerateOptions& opt) {
  const Difficulty difficulty =
      opt.difficulty == "large" ? Difficulty::Large : Difficulty::Small;
  fs::create_directories(opt.out);
  const NlpConfig cfg;
  std::vector<std::string> names;
  for (int i = 0; i < opt.count; ++i) {
    const std::uint64_t seed = opt.seed + static_cast<std::uint64_t>(i);
    Scenario scenario = generate_scenario(seed, difficulty);
    if (opt.horizon > 0) scenario.horizon_steps = opt.horizon;
    const int replan = std::min(5, scenario.horizon_steps);
    SimState state = init_sim(scenario);
    for (int stage = 0; stage < opt.stages; ++stage) {
      if (state.status != EpisodeStatus::Running) break;
      const Scene scene =
          extract_scene(state, scenario, scenario.horizon_steps, scenario.dt);
      char name[64];
      std::snprintf(name, sizeof(name), "problem_%06llu_%02d.json",
                    static_cast<unsigned long long>(seed), stage);
      save_scene((fs::path(opt.out) / name).string(), scene);
      names.emplace_back(name);
      if (stage + 1 == opt.stages) break;
      const SolveReport plan =
          solve(scene, heuristic_init(InitKind::ConstVel, scene, cfg), cfg);
      const ReferencePath window =
          planning_window(state, scenario, scenario.horizon_steps, scenario.dt);
      Trajectory plan_world;
      try {
        plan_world = from_reference_frame(plan.trajectory, window);
      } catch (const ProjectionOutOfDomain&) {
        // A failed solve can leave the window domain; advance along the
        // constant-velocity profile so the stage sequence stays defined.
        plan_world = from_reference_frame(
            heuristic_init(InitKind::ConstVel, scene, cfg), window);
      }
      state = step_closed_loop(scenario, state, plan_world, replan);
    }
  }
  JsonWriter w;
  w.begin_object();
  w.key("schema");
  w.value("pilot-manifest-v1");
  w.key("command");
  w.value("generate");
  w.key("seed");
  w.value(opt.seed);
  w.key("count");
  w.value(opt.count);
  w.key("difficulty");
  w.value(opt.difficulty);
  w.key("horizon");
  w.value(opt.horizon);
  w.key("stages");
  w.value(opt.stages);
  w.key("files");
  w.begin_array();
  for (const std::string& name : names) w.value(name);
  w.end_array();
  w.end_object();
  write_text_file((fs::path(opt.out) / "problems_manifest.json").string(), w.take());
  std::cout << "generated " << names.size() << " problems in " << opt.out << "\n";
  return 0;
}

struct SolveOptions {
  std::string scene_path;
  std::string out;
  std::string init = "expert";
  std::string model_path;
};

int run_solve(const SolveOptions& opt) {
  const Scene scene = load_scene(opt.scene_path);
  const NlpConfig cfg;
  SolveReport report;
  if (opt.init == "expert") {
    report = expert_plan(scene, cfg);
  } else if (opt.init == "model") {
    if (opt.model_path.empty()) {
      std::cerr << "solve: --model is required with --init model\n";
      return 1;
    }
    report = pilot_infer(load_model(opt.model_path), scene, cfg);
  } else {
    InitKind kind;
    if (opt.init == "none") {
      kind = InitKind::None;
    } else if (opt.init == "constvel") {
      kind = InitKind::ConstVel;
    } else if (opt.init == "constaccel") {
      kind = InitKind::ConstAccel;
    } else if (opt.init == "constdecel") {
      kind = InitKind::ConstDecel;
    } else {
      std::cerr << "solve: unknown init '" << opt.init << "'\n";
      return 1;
    }
    report = solve(scene, heuristic_init(kind, scene, cfg), cfg);
  }
  JsonWriter w;
  w.begin_object();
  w.key("schema");
  w.value("pilot-report-v1");
  w.key("init");
  w.value(opt.init);
  w.key("status");
  w.value(to_string(report.status));
  w.key("iterations");
  w.value(report.iterations);
  w.key("final_cost");
  w.value(report.final_cost);
  w.key("max_violation");
  w.value(report.max_violation);
  w.key("wall_time");
  w.value(report.wall_time);
  w.key("config_hash");
  w.value(hash_hex(fnv1a64(nlp_config_json(cfg))));
  w.end_object();
  std::string out = w.take();
  // Embed the trajectory without re-encoding it.
  out.insert(out.size() - 1, ",\"trajectory\":" + trajectory_to_json(report.trajectory));
  write_text_file(opt.out, out);
  std::cout << to_string(report.status) << " cost " << report.final_cost
            << " violation " << report.max_violation << "\n";
  return 0;
}

struct TrainOptions {
  std::string problems;
  std::string model_out;
  std::string model_in;
  int channels = 5;
  int width = 96;
  int height = 96;
  double resolution = 0.5;
  int anchor_col = 8;
  int epochs = 30;
  int batch_size = 32;
  double lr = 1e-3;
  double mu = 1e-4;
  std::uint64_t seed = 1;
  bool dagger = false;
  int dagger_samples = 50;
  int retrain_every = 25;
  int replan_every = 5;
  std::string difficulty = "small";
};

int run_train(const TrainOptions& opt) {
  const std::vector<std::string> files = list_problem_files(opt.problems);
  if (files.empty()) {
    std::cerr << "train: empty problem set in " << opt.problems << "\n";
    return 1;
  }
  const std::vector<Scene> scenes = load_problems(files);
  const NlpConfig cfg;

  RegressorModel model;
  if (!opt.model_in.empty()) {
    model = load_model(opt.model_in);
  } else {
    RegressorConfig rc;
    rc.raster.channels = opt.channels;
    rc.raster.width = opt.width;
    rc.raster.height = opt.height;
    rc.raster.resolution = opt.resolution;
    rc.raster.ego_anchor_col = opt.anchor_col;
    rc.waypoints = scenes.front().horizon_steps;
    model = init_model(rc, opt.seed);
  }

  int labeled = 0, skipped = 0;
  std::vector<Sample> dataset;
  for (const Scene& scene : scenes) {
    const SolveReport report = expert_plan(scene, cfg);
    if (report.status != SolveStatus::Converged) {
      ++skipped;
      continue;
    }
    Sample sample;
    sample.scene = scene;
    for (int k = 1; k <= scene.horizon_steps; ++k) {
      const EgoState& s = report.trajectory.states[static_cast<std::size_t>(k)];
      sample.expert_waypoints.emplace_back(s.x, s.y);
    }
    dataset.push_back(std::move(sample));
    ++labeled;
  }
  if (dataset.empty()) {
    std::cerr << "train: no expert-converged problems to learn from\n";
    return 1;
  }

  TrainConfig tc;
  tc.epochs = opt.epochs;
  tc.batch_size = opt.batch_size;
  tc.lr = opt.lr;
  tc.mu = opt.mu;
  std::vector<double> curve = pretrain(model, dataset, tc, opt.seed + 1);

  DaggerResult dagger_result;
  if (opt.dagger) {
    DaggerConfig dc;
    dc.new_samples = opt.dagger_samples;
    dc.retrain_every = opt.retrain_every;
    dc.replan_every = opt.replan_every;
    dc.horizon_override = model.cfg.waypoints;
    dc.difficulty = opt.difficulty == "large" ? Difficulty::Large : Difficulty::Small;
    dc.train = tc;
    dc.nlp = cfg;
    dagger_result = dagger_train(model, dataset, dc, opt.seed + 2);
    if (!dagger_result.final_loss_curve.empty()) curve = dagger_result.final_loss_curve;
  }

  save_model(opt.model_out, model);

  JsonWriter w;
  w.begin_object();
  w.key("schema");
  w.value("pilot-manifest-v1");
  w.key("command");
  w.value("train");
  w.key("seed");
  w.value(opt.seed);
  w.key("labeled");
  w.value(labeled);
  w.key("skipped");
  w.value(skipped);
  w.key("dagger");
  w.value_bool(opt.dagger);
  if (opt.dagger) {
    w.key("dagger_collected");
    w.value(dagger_result.collected);
    w.key("dagger_skipped");
    w.value(dagger_result.skipped);
    w.key("dagger_retrains");
    w.value(dagger_result.retrains);
  }
  w.key("loss_curve");
  w.begin_array();
  for (double v : curve) w.value(v);
  w.end_array();
  w.key("config_hash");
  w.value(hash_hex(fnv1a64(nlp_config_json(cfg))));
  w.key("model");
  w.value(fs::path(opt.model_out).filename().string());
  w.end_object();
  write_text_file(opt.model_out + ".manifest.json", w.take());
  std::cout << "trained on " << dataset.size() << " samples, final loss "
            << (curve.empty() ? 0.0 : curve.back()) << "\n";
  return 0;
}

struct BenchOptions {
  std::string problems;
  std::string model_path;
  std::string out;
  int workers = 1;
};

int run_bench(const BenchOptions& opt) {
  const std::vector<std::string> files = list_problem_files(opt.problems);
  if (files.empty()) {
    std::cerr << "bench: empty problem set in " << opt.problems << "\n";
    return 1;
  }
  const std::vector<Scene> scenes = load_problems(files);
  const RegressorModel model = load_model(opt.model_path);
  const NlpConfig cfg;
  fs::create_directories(opt.out);

  const Table1Result table1 = run_table1(scenes, model, cfg, opt.workers);
  const SatisfactionResult satisfaction = run_constraint_satisfaction(
      scenes, {AuditPlanner::Pilot, AuditPlanner::RawNetwork, AuditPlanner::Expert},
      model, cfg, opt.workers);

  write_text_file((fs::path(opt.out) / "table1.tsv").string(), table1_tsv(table1));
  write_text_file((fs::path(opt.out) / "satisfaction.tsv").string(),
                  satisfaction_tsv(satisfaction));

  JsonWriter w;
  w.begin_object();
  w.key("schema");
  w.value("pilot-manifest-v1");
  w.key("command");
  w.value("bench");
  w.key("config_hash");
  w.value(hash_hex(fnv1a64(nlp_config_json(cfg))));
  w.key("model_hash");
  w.value(hash_hex(fnv1a64(read_text_file(opt.model_path))));
  w.key("problems");
  w.begin_array();
  for (const std::string& f : files) w.value(fs::path(f).filename().string());
  w.end_array();
  w.key("co_converged");
  w.value(table1.co_converged);
  w.key("pilot");
  write_run_array(w, files, table1.pilot_runs);
  w.key("expert");
  write_run_array(w, files, table1.expert_runs);
  w.end_object();
  write_text_file((fs::path(opt.out) / "bench_manifest.json").string(), w.take());
  std::cout << table1_tsv(table1) << satisfaction_tsv(satisfaction);
  return 0;
}

struct AblateOptions {
  std::string problems;
  std::string model_path;
  std::string out;
  int workers = 1;
};

int run_ablate(const AblateOptions& opt) {
  const std::vector<std::string> files = list_problem_files(opt.problems);
  if (files.empty()) {
    std::cerr << "ablate: empty problem set in " << opt.problems << "\n";
    return 1;
  }
  const std::vector<Scene> scenes = load_problems(files);
  const RegressorModel model = load_model(opt.model_path);
  const NlpConfig cfg;
  fs::create_directories(opt.out);

  const Table2Result table2 = run_table2(scenes, model, cfg, opt.workers);
  write_text_file((fs::path(opt.out) / "table2.tsv").string(), table2_tsv(table2));

  JsonWriter w;
  w.begin_object();
  w.key("schema");
  w.value("pilot-manifest-v1");
  w.key("command");
  w.value("ablate");
  w.key("config_hash");
  w.value(hash_hex(fnv1a64(nlp_config_json(cfg))));
  w.key("model_hash");
  w.value(hash_hex(fnv1a64(read_text_file(opt.model_path))));
  w.key("problems");
  w.begin_array();
  for (const std::string& f : files) w.value(fs::path(f).filename().string());
  w.end_array();
  w.key("expert_converged");
  w.value(table2.expert_converged);
  w.key("rows");
  w.begin_array();
  for (const Table2Result::Row& row : table2.rows) {
    w.begin_object();
    w.key("init");
    w.value(row.init);
    w.key("converged_pct");
    w.value(row.converged_pct);
    w.key("compared");
    w.value(row.compared);
    w.key("delta_cost_pct_mean");
    w.value(row.delta_cost_pct.mean);
    w.key("delta_nlp_time_mean");
    w.value(row.delta_nlp_time.mean);
    w.end_object();
  }
  w.end_array();
  w.key("expert");
  write_run_array(w, files, table2.expert_runs);
  w.end_object();
  write_text_file((fs::path(opt.out) / "ablate_manifest.json").string(), w.take());
  std::cout << table2_tsv(table2);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Warm-started trajectory optimization toolkit"};
  app.require_subcommand(1);

  GenerateOptions gen;
  CLI::App* generate = app.add_subcommand(
      "generate", "Sample planning problems from simulated scenarios");
  generate->add_option("--seed", gen.seed, "Base scenario seed");
  generate->add_option("--count", gen.count, "Number of scenarios");
  generate->add_option("--difficulty", gen.difficulty, "small or large")
      ->check(CLI::IsMember({"small", "large"}));
  generate->add_option("--horizon", gen.horizon, "Plan horizon override (steps)");
  generate->add_option("--stages", gen.stages, "Planning stages per scenario");
  generate->add_option("--out", gen.out, "Output directory")->required();

  SolveOptions sol;
  CLI::App* solve_cmd = app.add_subcommand("solve", "Solve one problem");
  solve_cmd->add_option("--scene", sol.scene_path, "Problem scene JSON")->required();
  solve_cmd->add_option("--out", sol.out, "Report output path")->required();
  solve_cmd->add_option("--init", sol.init,
                        "none|constvel|constaccel|constdecel|expert|model");
  solve_cmd->add_option("--model", sol.model_path, "Model checkpoint for --init model");

  TrainOptions tr;
  CLI::App* train = app.add_subcommand("train", "Label problems and train the regressor");
  train->add_option("--problems", tr.problems, "Problem directory")->required();
  train->add_option("--model-out", tr.model_out, "Checkpoint output path")->required();
  train->add_option("--model-in", tr.model_in, "Warm-start checkpoint");
  train->add_option("--channels", tr.channels, "Raster channels");
  train->add_option("--width", tr.width, "Raster width");
  train->add_option("--height", tr.height, "Raster height");
  train->add_option("--resolution", tr.resolution, "Raster resolution (m/cell)");
  train->add_option("--anchor-col", tr.anchor_col, "Ego anchor column");
  train->add_option("--epochs", tr.epochs, "Training epochs");
  train->add_option("--batch", tr.batch_size, "Batch size");
  train->add_option("--lr", tr.lr, "Learning rate");
  train->add_option("--mu", tr.mu, "L2 regularization");
  train->add_option("--seed", tr.seed, "Training seed");
  train->add_flag("--dagger", tr.dagger, "Run expert-in-the-loop aggregation");
  train->add_option("--samples", tr.dagger_samples, "Aggregation samples to collect");
  train->add_option("--retrain-every", tr.retrain_every, "Retrain period (visited states)");
  train->add_option("--replan-every", tr.replan_every, "Replan period (substeps)");
  train->add_option("--difficulty", tr.difficulty, "small or large")
      ->check(CLI::IsMember({"small", "large"}));

  BenchOptions ben;
  CLI::App* bench = app.add_subcommand("bench", "Planner vs expert benchmark");
  bench->add_option("--problems", ben.problems, "Problem directory")->required();
  bench->add_option("--model", ben.model_path, "Model checkpoint")->required();
  bench->add_option("--out", ben.out, "Output directory")->required();
  bench->add_option("--workers", ben.workers, "Worker threads");

  AblateOptions abl;
  CLI::App* ablate = app.add_subcommand("ablate", "Initialization ablation");
  ablate->add_option("--problems", abl.problems, "Problem directory")->required();
  ablate->add_option("--model", abl.model_path, "Model checkpoint")->required();
  ablate->add_option("--out", abl.out, "Output directory")->required();
  ablate->add_option("--workers", abl.workers, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*generate) return run_generate(gen);
    if (*solve_cmd) return run_solve(sol);
    if (*train) return run_train(tr);
    if (*bench) return run_bench(ben);
    if (*ablate) return run_ablate(abl);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace pilot
