#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pilot/nlp.hpp"
#include "pilot/problem.hpp"
#include "pilot/regressor.hpp"
#include "pilot/sim.hpp"

namespace pilot {

struct NonFiniteLoss : std::runtime_error {
  explicit NonFiniteLoss(const std::string& what) : std::runtime_error(what) {}
};

// One labeled planning problem: the scene and the expert's N waypoints in the
// reference frame.
struct Sample {
  Scene scene;
  std::vector<Vec2> expert_waypoints;
};

struct TrainConfig {
  int epochs = 30;
  double lr = 1e-3;
  double momentum = 0.9;
  int batch_size = 32;
  double mu = 1e-4;  // L2 parameter regularization
};

// Mean squared waypoint error across the batch, 1/(n N) sum |rho - rho*|^2,
// plus mu |theta|^2; returns the loss and its parameter gradient.
std::pair<double, Eigen::VectorXd> l2_loss(const RegressorModel& model,
                                           const std::vector<Sample>& batch, double mu);

// Mini-batch SGD with momentum on l2_loss; returns the per-epoch training
// loss curve (mean of batch losses). Deterministic for a fixed seed. Throws
// NonFiniteLoss if the loss stops being finite.
std::vector<double> pretrain(RegressorModel& model, const std::vector<Sample>& dataset,
                             const TrainConfig& cfg, std::uint64_t seed);

// Raw network waypoints for a scene (rasterize + predict).
std::vector<Vec2> infer_waypoints(const RegressorModel& model, const Scene& scene);

// Full inference pipeline: rasterize, predict, sanitize into a feasible
// initialization, then solve. The report's wall_time covers only the solve.
SolveReport pilot_infer(const RegressorModel& model, const Scene& scene,
                        const NlpConfig& cfg);

struct DaggerConfig {
  int new_samples = 300;  // J - n
  int retrain_every = 50;  // K
  int replan_every = 5;
  int horizon_override = 0;  // > 0 replaces the scenario plan horizon
  Difficulty difficulty = Difficulty::Small;
  TrainConfig train;
  NlpConfig nlp;
};

struct DaggerResult {
  std::vector<Sample> dataset;  // D0 plus the new expert-labeled samples
  int collected = 0;
  int skipped = 0;  // states whose expert solve did not converge
  int retrains = 0;
  std::vector<double> final_loss_curve;
};

// Expert-in-the-loop aggregation: drive scenarios closed-loop with the
// current model (pilot_infer), label every visited planning problem with the
// expert, append converged labels to the dataset, and retrain after every
// retrain_every visited states. Episodes are re-initialized from fresh
// seeded scenarios whenever one terminates.
DaggerResult dagger_train(RegressorModel& model, const std::vector<Sample>& d0,
                          const DaggerConfig& cfg, std::uint64_t seed);

// Trains the model directly against the optimizer's objective: the penalty
// loss of the lifted network output, backpropagated through the waypoint
// lift and the regressor. Returns the per-epoch mean penalty loss.
std::vector<double> cpn_train(RegressorModel& model, const std::vector<Scene>& scenes,
                              const TrainConfig& cfg, double penalty_weight,
                              std::uint64_t seed);

// Schema "pilot-sample-v1".
std::string sample_to_json(const Sample& sample);
Sample sample_from_json(const std::string& text);
void save_sample(const std::string& path, const Sample& sample);
Sample load_sample(const std::string& path);

}  // namespace pilot
