#pragma once

#include <array>
#include <string>
#include <vector>

#include "pilot/imitation.hpp"
#include "pilot/nlp.hpp"
#include "pilot/problem.hpp"
#include "pilot/regressor.hpp"

namespace pilot {

// One planner invocation on one problem. total_time is wall time around the
// whole planner (seed construction + solve); nlp_time is the solve alone.
struct PlannerRun {
  SolveStatus status = SolveStatus::Diverged;
  double init_time = 0.0;
  double nlp_time = 0.0;
  double total_time = 0.0;
  double cost = 0.0;
  double max_violation = 0.0;
  int iterations = 0;
};

struct AggregateStat {
  double mean = 0.0;
  double std = 0.0;  // sample std, 0 when fewer than two values
};

AggregateStat aggregate(const std::vector<double>& values);

// Learned-warm-start planner vs expert, aggregated over the problems where
// both converge.
struct Table1Result {
  struct Row {
    std::string planner;
    AggregateStat init_time, nlp_time, total_time, cost;
  };
  std::vector<Row> rows;  // [0] = network-warm-started pipeline, [1] = expert
  std::vector<PlannerRun> pilot_runs;   // per problem
  std::vector<PlannerRun> expert_runs;  // per problem
  int co_converged = 0;
};

Table1Result run_table1(const std::vector<Scene>& problems, const RegressorModel& model,
                        const NlpConfig& cfg, int workers);

// Initialization ablation relative to the expert, restricted to problems the
// expert solved.
struct Table2Result {
  struct Row {
    std::string init;
    double converged_pct = 0.0;     // of expert-solved problems
    AggregateStat delta_nlp_time;   // init solve time - expert solve time, s
    AggregateStat delta_cost_pct;   // 100 (cost - expert cost) / expert cost
    int compared = 0;               // problems in the delta aggregates
  };
  std::vector<Row> rows;  // None, ConstVel, ConstAccel, ConstDecel, network
  std::vector<PlannerRun> expert_runs;
  // delta_nlp_time per init per problem (NaN where not co-converged), for
  // bootstrap analysis.
  std::vector<std::vector<double>> delta_time;  // [init][problem]
  int expert_converged = 0;
};

Table2Result run_table2(const std::vector<Scene>& problems, const RegressorModel& model,
                        const NlpConfig& cfg, int workers);

// Which trajectory source a constraint-satisfaction row audits.
enum class AuditPlanner { Pilot, RawNetwork, Expert };

const char* to_string(AuditPlanner planner);

struct SatisfactionResult {
  struct Row {
    std::string planner;
    int problems = 0;  // audited problems (Converged only for solver rows)
    std::array<double, 8> family_pct{};  // % of problems satisfying each family
  };
  std::vector<Row> rows;
};

SatisfactionResult run_constraint_satisfaction(const std::vector<Scene>& problems,
                                               const std::vector<AuditPlanner>& planners,
                                               const RegressorModel& model,
                                               const NlpConfig& cfg, int workers);

// Trajectory the raw-network row audits: predicted positions lifted through
// inverse dynamics onto the true initial state, no sanitation, no solve.
Trajectory raw_network_trajectory(const RegressorModel& model, const Scene& scene,
                                  const NlpConfig& cfg);

// Delimiter-separated renderings with a header row.
std::string table1_tsv(const Table1Result& result);
std::string table2_tsv(const Table2Result& result);
std::string satisfaction_tsv(const SatisfactionResult& result);

// Runs fn(i) for i in [0, count) across `workers` threads; results are
// committed by index so the outcome is order-independent.
void parallel_for(int count, int workers, const std::function<void(int)>& fn);

// Command-line entry point (subcommands generate, solve, train, bench,
// ablate). Returns the process exit status.
int run_cli(int argc, const char* const* argv);

}  // namespace pilot
