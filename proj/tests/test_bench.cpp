#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "pilot/bench.hpp"

#include <atomic>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "pilot/costcon.hpp"
#include "pilot/raster.hpp"
#include "pilot/serialization.hpp"
#include "pilot/warmstart.hpp"
#include "test_util.hpp"

using namespace pilot;
using testutil::straight_scene;

namespace fs = std::filesystem;

namespace {

RegressorModel tiny_model(int waypoints, std::uint64_t seed = 3) {
  RegressorConfig cfg;
  cfg.raster.channels = 2;
  cfg.raster.width = 8;
  cfg.raster.height = 6;
  cfg.raster.resolution = 1.0;
  cfg.raster.ego_anchor_col = 2;
  cfg.conv1_filters = 2;
  cfg.conv2_filters = 3;
  cfg.dense1 = 8;
  cfg.dense2 = 6;
  cfg.waypoints = waypoints;
  return init_model(cfg, seed);
}

std::vector<Scene> clean_problems() {
  std::vector<Scene> scenes;
  for (double v : {6.0, 7.0, 8.0}) scenes.push_back(straight_scene(5, 0.5, v));
  return scenes;
}

int cli(const std::vector<std::string>& args) {
  std::vector<std::string> store{"pilot"};
  store.insert(store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  argv.reserve(store.size());
  for (const std::string& s : store) argv.push_back(s.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// Drops wall-clock fields so reruns can be compared byte for byte.
std::string strip_time_fields(std::string s) {
  for (const char* key :
       {"\"init_time\":", "\"nlp_time\":", "\"total_time\":", "\"wall_time\":"}) {
    for (std::size_t pos = s.find(key); pos != std::string::npos; pos = s.find(key, pos)) {
      std::size_t end = s.find_first_of(",}", pos + std::strlen(key));
      if (end != std::string::npos && s[end] == ',') ++end;
      s.erase(pos, end - pos);
    }
  }
  return s;
}

// Drops every column whose header mentions time; comment lines pass through.
std::string strip_time_columns(const std::string& tsv) {
  std::istringstream in(tsv);
  std::string line;
  std::vector<bool> keep;
  std::string out;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') {
      out += line;
      out += '\n';
      continue;
    }
    std::istringstream cells(line);
    std::string cell;
    std::vector<std::string> row;
    while (std::getline(cells, cell, '\t')) row.push_back(cell);
    if (keep.empty()) {
      for (const std::string& name : row) keep.push_back(name.find("time") == std::string::npos);
    }
    bool first = true;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i < keep.size() && !keep[i]) continue;
      if (!first) out += '\t';
      out += row[i];
      first = false;
    }
    out += '\n';
  }
  return out;
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("aggregate reports mean and sample deviation") {
  const AggregateStat empty = aggregate({});
  CHECK(empty.mean == 0.0);
  CHECK(empty.std == 0.0);

  const AggregateStat single = aggregate({3.5});
  CHECK(single.mean == 3.5);
  CHECK(single.std == 0.0);

  const AggregateStat four = aggregate({1.0, 2.0, 3.0, 4.0});
  CHECK(four.mean == 2.5);
  CHECK(std::abs(four.std - std::sqrt(5.0 / 3.0)) < 1e-15);
}

TEST_CASE("parallel for covers every index and propagates failures") {
  std::vector<int> hits(1000, 0);
  parallel_for(1000, 8, [&](int i) { hits[static_cast<std::size_t>(i)] = i * i; });
  for (int i = 0; i < 1000; ++i) CHECK(hits[static_cast<std::size_t>(i)] == i * i);

  std::atomic<int> calls{0};
  parallel_for(3, 64, [&](int) { ++calls; });  // more workers than work
  CHECK(calls.load() == 3);

  parallel_for(0, 4, [&](int) { ++calls; });
  CHECK(calls.load() == 3);

  CHECK_THROWS_AS(parallel_for(100, 4,
                               [](int i) {
                                 if (i >= 50) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}

TEST_CASE("the raw network trajectory keeps the true initial state and breaks physics") {
  const RegressorModel model = tiny_model(5);  // fresh head: all-zero waypoints
  const Scene scene = straight_scene(5, 0.5, 6.0);
  const NlpConfig cfg;

  const Trajectory traj = raw_network_trajectory(model, scene, cfg);
  REQUIRE(traj.states.size() == 6);
  CHECK(traj.states[0].x == scene.ego.x);
  CHECK(traj.states[0].y == scene.ego.y);
  CHECK(traj.states[0].heading == scene.ego.heading);
  CHECK(traj.states[0].speed == scene.ego.speed);

  // Lifting the zero prediction asks for an instant reversal; the kinematic
  // and control families cannot all hold.
  const ConstraintReport report = constraint_report(traj, scene, cfg);
  CHECK(report.kinematic > cfg.constraint_tol);
  CHECK(report.max_violation() > 1.0);
}

TEST_CASE("planner-versus-expert comparison aggregates co-converged problems") {
  const std::vector<Scene> problems = clean_problems();
  const RegressorModel model = tiny_model(5);
  const NlpConfig cfg;

  const Table1Result result = run_table1(problems, model, cfg, 2);
  REQUIRE(result.pilot_runs.size() == 3);
  REQUIRE(result.expert_runs.size() == 3);
  for (const PlannerRun& run : result.pilot_runs) {
    CHECK(run.status == SolveStatus::Converged);
    CHECK(run.max_violation <= cfg.constraint_tol);
    CHECK(run.iterations > 0);
    CHECK(run.init_time >= 0.0);
    CHECK(run.nlp_time >= 0.0);
    CHECK(run.total_time >= run.nlp_time);
  }
  for (const PlannerRun& run : result.expert_runs) {
    CHECK(run.status == SolveStatus::Converged);
  }
  CHECK(result.co_converged == 3);

  REQUIRE(result.rows.size() == 2);
  CHECK(result.rows[0].planner == "pilot");
  CHECK(result.rows[1].planner == "expert");
  double expert_cost = 0.0;
  for (const PlannerRun& run : result.expert_runs) expert_cost += run.cost;
  CHECK(std::abs(result.rows[1].cost.mean - expert_cost / 3.0) < 1e-12);
  CHECK(result.rows[0].cost.mean > 0.0);

  const std::string tsv = table1_tsv(result);
  CHECK(tsv.rfind("planner\tinit_time_mean", 0) == 0);
  CHECK(count_lines(tsv) == 4);  // header, two rows, co-converged note
  CHECK(tsv.find("# co_converged\t3\tof\t3") != std::string::npos);
}

TEST_CASE("the initialization ablation scores every seed family") {
  const std::vector<Scene> problems = clean_problems();
  const RegressorModel model = tiny_model(5);
  const NlpConfig cfg;

  const Table2Result result = run_table2(problems, model, cfg, 2);
  CHECK(result.expert_converged == 3);
  REQUIRE(result.rows.size() == 5);
  const std::vector<std::string> names{"none", "constvel", "constaccel", "constdecel",
                                       "network"};
  REQUIRE(result.delta_time.size() == 5);
  for (std::size_t v = 0; v < 5; ++v) {
    const Table2Result::Row& row = result.rows[v];
    CHECK(row.init == names[v]);
    CHECK(row.converged_pct >= 0.0);
    CHECK(row.converged_pct <= 100.0);
    REQUIRE(result.delta_time[v].size() == 3);
    int finite = 0;
    for (double d : result.delta_time[v]) finite += std::isfinite(d) ? 1 : 0;
    CHECK(finite == row.compared);
    CHECK(row.compared == static_cast<int>(std::lround(row.converged_pct * 3.0 / 100.0)));
  }
  // A straight empty road is easy from any seed.
  CHECK(result.rows[1].converged_pct == 100.0);
  CHECK(result.rows[4].converged_pct == 100.0);
  // Identical planner and tiny costs: relative cost gaps stay small.
  CHECK(std::abs(result.rows[4].delta_cost_pct.mean) < 5.0);

  const std::string tsv = table2_tsv(result);
  CHECK(tsv.rfind("init\tconverged_pct", 0) == 0);
  CHECK(count_lines(tsv) == 7);
  CHECK(tsv.find("# expert_converged\t3\tof\t3") != std::string::npos);
}

TEST_CASE("constraint satisfaction splits solved rows from the raw network") {
  const std::vector<Scene> problems = clean_problems();
  const RegressorModel model = tiny_model(5);
  const NlpConfig cfg;

  const SatisfactionResult result = run_constraint_satisfaction(
      problems, {AuditPlanner::Pilot, AuditPlanner::RawNetwork, AuditPlanner::Expert},
      model, cfg, 2);
  REQUIRE(result.rows.size() == 3);
  CHECK(result.rows[0].planner == "pilot");
  CHECK(result.rows[1].planner == "raw_network");
  CHECK(result.rows[2].planner == "expert");

  for (const SatisfactionResult::Row& row : result.rows) {
    CHECK(row.problems == 3);
    for (double pct : row.family_pct) {
      CHECK(pct >= 0.0);
      CHECK(pct <= 100.0);
    }
  }
  for (double pct : result.rows[0].family_pct) CHECK(pct == 100.0);
  for (double pct : result.rows[2].family_pct) CHECK(pct == 100.0);
  CHECK(result.rows[1].family_pct[0] < 100.0);  // kinematic family broken

  const std::string tsv = satisfaction_tsv(result);
  CHECK(tsv.rfind("planner\tproblems\tkinematic", 0) == 0);
  CHECK(count_lines(tsv) == 4);
}

TEST_CASE("the command line pipeline generates, trains and benchmarks") {
  const fs::path root = "tmp_cli";
  fs::remove_all(root);
  const std::string problems = (root / "problems").string();
  const std::string problems2 = (root / "problems2").string();

  // bad invocations fail fast
  CHECK(cli({}) != 0);
  CHECK(cli({"solve"}) != 0);
  CHECK(cli({"generate", "--difficulty", "medium", "--out", problems}) != 0);
  CHECK(cli({"bench", "--problems", "missing_dir", "--model", "nope.txt", "--out",
             (root / "nowhere").string()}) != 0);
  fs::create_directories(root / "empty");
  CHECK(cli({"bench", "--problems", (root / "empty").string(), "--model", "nope.txt",
             "--out", (root / "nowhere").string()}) != 0);

  // generate: two scenarios, two stages each, reruns byte-identical
  const std::vector<std::string> gen_args{"generate", "--seed",      "3",
                                          "--count",  "2",           "--difficulty",
                                          "small",    "--horizon",   "6",
                                          "--stages", "2",           "--out"};
  std::vector<std::string> gen1 = gen_args;
  gen1.push_back(problems);
  REQUIRE(cli(gen1) == 0);
  std::vector<std::string> gen2 = gen_args;
  gen2.push_back(problems2);
  REQUIRE(cli(gen2) == 0);

  std::vector<fs::path> scene_files;
  for (const auto& entry : fs::directory_iterator(problems)) {
    if (entry.path().filename().string().find("manifest") == std::string::npos) {
      scene_files.push_back(entry.path());
    }
  }
  std::sort(scene_files.begin(), scene_files.end());
  REQUIRE(scene_files.size() == 4);
  for (const fs::path& file : scene_files) {
    const Scene scene = load_scene(file.string());
    CHECK(scene.horizon_steps == 6);
    CHECK(validate_scene(scene).empty());
    CHECK(slurp(file) == slurp(fs::path(problems2) / file.filename()));
  }
  CHECK(slurp(fs::path(problems) / "problems_manifest.json") ==
        slurp(fs::path(problems2) / "problems_manifest.json"));

  // solve: one problem, reruns identical apart from the wall-time field
  const std::string report1 = (root / "report1.json").string();
  const std::string report2 = (root / "report2.json").string();
  REQUIRE(cli({"solve", "--scene", scene_files[0].string(), "--out", report1, "--init",
               "constvel"}) == 0);
  REQUIRE(cli({"solve", "--scene", scene_files[0].string(), "--out", report2, "--init",
               "constvel"}) == 0);
  const std::string report_text = slurp(report1);
  CHECK(report_text.find("\"schema\":\"pilot-report-v1\"") != std::string::npos);
  CHECK(report_text.find("\"trajectory\":") != std::string::npos);
  CHECK(report_text.find("\"wall_time\":") != std::string::npos);
  CHECK(strip_time_fields(report_text) == strip_time_fields(slurp(report2)));
  CHECK(cli({"solve", "--scene", scene_files[0].string(), "--out", report2, "--init",
             "bogus"}) == 1);
  CHECK(cli({"solve", "--scene", scene_files[0].string(), "--out", report2, "--init",
             "model"}) == 1);

  // train: small raster, few epochs, expert-in-the-loop pass included
  const std::string model_path = (root / "model.txt").string();
  REQUIRE(cli({"train",        "--problems", problems,   "--model-out", model_path,
               "--channels",   "3",          "--width",  "32",          "--height",
               "32",           "--anchor-col", "4",      "--resolution", "1.5",
               "--epochs",     "2",          "--batch",  "4",           "--seed",
               "5",            "--dagger",   "--samples", "2",          "--retrain-every",
               "2",            "--replan-every", "2"}) == 0);
  const RegressorModel model = load_model(model_path);
  CHECK(model.cfg.waypoints == 6);
  CHECK(model.cfg.raster.channels == 3);
  const std::string train_manifest = slurp(model_path + ".manifest.json");
  CHECK(train_manifest.find("\"schema\":\"pilot-manifest-v1\"") != std::string::npos);
  CHECK(train_manifest.find("\"dagger_collected\":") != std::string::npos);

  // bench and ablate: tables drop out, reruns identical modulo wall time
  const std::string bench1 = (root / "bench1").string();
  const std::string bench2 = (root / "bench2").string();
  REQUIRE(cli({"bench", "--problems", problems, "--model", model_path, "--out", bench1,
               "--workers", "2"}) == 0);
  REQUIRE(cli({"bench", "--problems", problems, "--model", model_path, "--out", bench2,
               "--workers", "2"}) == 0);
  const std::string table1 = slurp(fs::path(bench1) / "table1.tsv");
  CHECK(count_lines(table1) == 4);
  CHECK(strip_time_columns(table1) ==
        strip_time_columns(slurp(fs::path(bench2) / "table1.tsv")));
  CHECK(slurp(fs::path(bench1) / "satisfaction.tsv") ==
        slurp(fs::path(bench2) / "satisfaction.tsv"));
  CHECK(strip_time_fields(slurp(fs::path(bench1) / "bench_manifest.json")) ==
        strip_time_fields(slurp(fs::path(bench2) / "bench_manifest.json")));

  const std::string ablate1 = (root / "ablate1").string();
  REQUIRE(cli({"ablate", "--problems", problems, "--model", model_path, "--out", ablate1,
               "--workers", "2"}) == 0);
  const std::string table2 = slurp(fs::path(ablate1) / "table2.tsv");
  CHECK(count_lines(table2) == 7);
  CHECK(table2.rfind("init\tconverged_pct", 0) == 0);

  fs::remove_all(root);
}
