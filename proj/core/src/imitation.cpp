#include "pilot/imitation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "pilot/costcon.hpp"
#include "pilot/dynamics.hpp"
#include "pilot/raster.hpp"
#include "pilot/rng.hpp"
#include "pilot/serialization.hpp"
#include "pilot/warmstart.hpp"

namespace pilot {

namespace {

struct CachedSample {
  Raster raster;
  Eigen::Vector3d scalars;
  Eigen::VectorXd target;
};

CachedSample cache_sample(const RegressorModel& model, const Sample& sample) {
  if (static_cast<int>(sample.expert_waypoints.size()) != model.cfg.waypoints) {
    throw DimensionMismatch("imitation: sample waypoint count does not match the model");
  }
  CachedSample c;
  c.raster = rasterize(sample.scene, model.cfg.raster);
  c.scalars = raster_scalars(sample.scene);
  c.target.resize(2 * model.cfg.waypoints);
  for (int k = 0; k < model.cfg.waypoints; ++k) {
    c.target[2 * k] = sample.expert_waypoints[static_cast<std::size_t>(k)].x();
    c.target[2 * k + 1] = sample.expert_waypoints[static_cast<std::size_t>(k)].y();
  }
  return c;
}

// Mean squared waypoint error over the batch plus L2 regularization; the
// shared math behind l2_loss and the training loops.
std::pair<double, Eigen::VectorXd> cached_l2_loss(const RegressorModel& model,
                                                  const std::vector<const CachedSample*>& batch,
                                                  double mu) {
  const double n = static_cast<double>(batch.size());
  const double waypoints = model.cfg.waypoints;
  double loss = 0.0;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(model.params.size());
  for (const CachedSample* c : batch) {
    const Eigen::VectorXd out = predict_vector(model, c->raster, c->scalars);
    const Eigen::VectorXd diff = out - c->target;
    loss += diff.squaredNorm() / (n * waypoints);
    grad += backprop(model, c->raster, c->scalars, (2.0 / (n * waypoints)) * diff);
  }
  loss += mu * model.params.squaredNorm();
  grad += 2.0 * mu * model.params;
  return {loss, grad};
}

std::vector<int> shuffled_indices(int n, Rng& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  return idx;
}

// Waypoints lifted onto the decision variables through inverse dynamics,
// anchored at the true ego state.
DecisionVector lift_waypoints(const std::vector<Vec2>& waypoints, const Scene& scene,
                              const NlpConfig& cfg) {
  std::vector<Vec2> positions;
  positions.reserve(waypoints.size() + 1);
  positions.emplace_back(scene.ego.x, scene.ego.y);
  positions.insert(positions.end(), waypoints.begin(), waypoints.end());
  Trajectory traj = inverse_dynamics(positions, scene.ego.speed, scene.dt, cfg.wheelbase);
  DecisionVector dv = DecisionVector::pack(traj);
  dv.s0 = scene.ego;
  return dv;
}

}  // namespace

std::pair<double, Eigen::VectorXd> l2_loss(const RegressorModel& model,
                                           const std::vector<Sample>& batch, double mu) {
  if (batch.empty()) throw std::invalid_argument("l2_loss: empty batch");
  std::vector<CachedSample> cached;
  cached.reserve(batch.size());
  for (const Sample& s : batch) cached.push_back(cache_sample(model, s));
  std::vector<const CachedSample*> view;
  view.reserve(cached.size());
  for (const CachedSample& c : cached) view.push_back(&c);
  return cached_l2_loss(model, view, mu);
}

std::vector<double> pretrain(RegressorModel& model, const std::vector<Sample>& dataset,
                             const TrainConfig& cfg, std::uint64_t seed) {
  if (dataset.empty()) throw std::invalid_argument("pretrain: empty dataset");
  if (cfg.epochs < 1 || cfg.batch_size < 1 || cfg.lr <= 0.0) {
    throw std::invalid_argument("pretrain: invalid training config");
  }
  std::vector<CachedSample> cached;
  cached.reserve(dataset.size());
  for (const Sample& s : dataset) cached.push_back(cache_sample(model, s));

  Rng rng(seed);
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(model.params.size());
  std::vector<double> curve;
  curve.reserve(static_cast<std::size_t>(cfg.epochs));
  const int n = static_cast<int>(cached.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<int> order = shuffled_indices(n, rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int stop = std::min(n, start + cfg.batch_size);
      std::vector<const CachedSample*> batch;
      batch.reserve(static_cast<std::size_t>(stop - start));
      for (int i = start; i < stop; ++i) {
        batch.push_back(&cached[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
      }
      const auto [loss, grad] = cached_l2_loss(model, batch, cfg.mu);
      if (!std::isfinite(loss)) throw NonFiniteLoss("pretrain: non-finite training loss");
      velocity = cfg.momentum * velocity - cfg.lr * grad;
      model.params += velocity;
      epoch_loss += loss;
      ++batches;
    }
    curve.push_back(epoch_loss / batches);
  }
  return curve;
}

std::vector<Vec2> infer_waypoints(const RegressorModel& model, const Scene& scene) {
  const Raster raster = rasterize(scene, model.cfg.raster);
  return predict(model, raster, raster_scalars(scene));
}

SolveReport pilot_infer(const RegressorModel& model, const Scene& scene,
                        const NlpConfig& cfg) {
  if (model.cfg.waypoints != scene.horizon_steps) {
    throw DimensionMismatch("pilot_infer: model horizon does not match the scene");
  }
  const std::vector<Vec2> waypoints = infer_waypoints(model, scene);
  std::vector<Vec2> positions;
  positions.reserve(waypoints.size() + 1);
  positions.emplace_back(scene.ego.x, scene.ego.y);
  positions.insert(positions.end(), waypoints.begin(), waypoints.end());
  const Trajectory init = sanitize_network_output(positions, scene, cfg);
  return solve(scene, init, cfg);
}

DaggerResult dagger_train(RegressorModel& model, const std::vector<Sample>& d0,
                          const DaggerConfig& cfg, std::uint64_t seed) {
  if (cfg.new_samples < 0 || cfg.retrain_every < 1 || cfg.replan_every < 1) {
    throw std::invalid_argument("dagger_train: invalid config");
  }
  DaggerResult result;
  result.dataset = d0;
  Rng rng(seed);
  int visited = 0;
  const int visit_budget = 40 * std::max(1, cfg.new_samples) + 100;
  bool retrained_since_growth = true;

  while (result.collected < cfg.new_samples && visited < visit_budget) {
    Scenario scenario = generate_scenario(rng.next_u64(), cfg.difficulty);
    if (cfg.horizon_override > 0) scenario.horizon_steps = cfg.horizon_override;
    if (scenario.horizon_steps != model.cfg.waypoints) {
      throw DimensionMismatch("dagger_train: model horizon does not match the scenario");
    }
    SimState state = init_sim(scenario);
    while (state.status == EpisodeStatus::Running &&
           result.collected < cfg.new_samples && visited < visit_budget) {
      const Scene scene =
          extract_scene(state, scenario, scenario.horizon_steps, scenario.dt);
      const SolveReport expert = expert_plan(scene, cfg.nlp);
      if (expert.status == SolveStatus::Converged) {
        Sample sample;
        sample.scene = scene;
        sample.expert_waypoints.reserve(
            static_cast<std::size_t>(scenario.horizon_steps));
        for (int k = 1; k <= scenario.horizon_steps; ++k) {
          const EgoState& s = expert.trajectory.states[static_cast<std::size_t>(k)];
          sample.expert_waypoints.emplace_back(s.x, s.y);
        }
        result.dataset.push_back(std::move(sample));
        ++result.collected;
        retrained_since_growth = false;
      } else {
        ++result.skipped;
      }
      ++visited;
      if (visited % cfg.retrain_every == 0 && !result.dataset.empty()) {
        result.final_loss_curve =
            pretrain(model, result.dataset, cfg.train, rng.next_u64());
        ++result.retrains;
        retrained_since_growth = true;
      }

      const SolveReport plan = pilot_infer(model, scene, cfg.nlp);
      const ReferencePath window =
          planning_window(state, scenario, scenario.horizon_steps, scenario.dt);
      Trajectory plan_world;
      try {
        plan_world = from_reference_frame(plan.trajectory, window);
      } catch (const ProjectionOutOfDomain&) {
        // Failed solves can wander longitudinally out of the window where the
        // world transform is undefined; visit the constant-velocity states
        // instead so collection keeps moving.
        plan_world = from_reference_frame(
            heuristic_init(InitKind::ConstVel, scene, cfg.nlp), window);
      }
      state = step_closed_loop(scenario, state, plan_world, cfg.replan_every);
    }
  }
  if (!retrained_since_growth && !result.dataset.empty()) {
    result.final_loss_curve = pretrain(model, result.dataset, cfg.train, rng.next_u64());
    ++result.retrains;
  }
  return result;
}

std::vector<double> cpn_train(RegressorModel& model, const std::vector<Scene>& scenes,
                              const TrainConfig& cfg, double penalty_weight,
                              std::uint64_t seed) {
  if (scenes.empty()) throw std::invalid_argument("cpn_train: empty scene set");
  if (penalty_weight <= 0.0) throw std::invalid_argument("cpn_train: penalty weight must be positive");
  const NlpConfig nlp;  // objective weights: defaults
  struct CachedScene {
    Raster raster;
    Eigen::Vector3d scalars;
  };
  std::vector<CachedScene> cached;
  cached.reserve(scenes.size());
  for (const Scene& s : scenes) {
    if (s.horizon_steps != model.cfg.waypoints) {
      throw DimensionMismatch("cpn_train: scene horizon does not match the model");
    }
    cached.push_back({rasterize(s, model.cfg.raster), raster_scalars(s)});
  }

  const int n = static_cast<int>(scenes.size());
  const int out_dim = 2 * model.cfg.waypoints;
  const double fd_step = 1e-6;

  // Penalty loss of one scene's prediction and its gradient w.r.t. the
  // network output, chained through a central-difference Jacobian of the
  // waypoint lift.
  const auto scene_loss = [&](int i, const Eigen::VectorXd& out, Eigen::VectorXd* d_out) {
    const Scene& scene = scenes[static_cast<std::size_t>(i)];
    std::vector<Vec2> waypoints(static_cast<std::size_t>(model.cfg.waypoints));
    for (int k = 0; k < model.cfg.waypoints; ++k) {
      waypoints[static_cast<std::size_t>(k)] = {out[2 * k], out[2 * k + 1]};
    }
    DecisionVector dv = lift_waypoints(waypoints, scene, nlp);
    Eigen::VectorXd g_z;
    const double loss = cpn_loss(dv, scene, nlp, penalty_weight, &g_z);
    if (d_out != nullptr) {
      d_out->setZero(out_dim);
      std::vector<Vec2> probe = waypoints;
      for (int j = 0; j < out_dim; ++j) {
        const int wp = j / 2;
        double& coord = j % 2 == 0 ? probe[static_cast<std::size_t>(wp)].x()
                                   : probe[static_cast<std::size_t>(wp)].y();
        const double saved = coord;
        coord = saved + fd_step;
        const Eigen::VectorXd z_hi = lift_waypoints(probe, scene, nlp).z;
        coord = saved - fd_step;
        const Eigen::VectorXd z_lo = lift_waypoints(probe, scene, nlp).z;
        coord = saved;
        (*d_out)[j] = g_z.dot((z_hi - z_lo) / (2.0 * fd_step));
      }
    }
    return loss;
  };

  Rng rng(seed);
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(model.params.size());
  std::vector<double> curve;
  curve.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<int> order = shuffled_indices(n, rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int stop = std::min(n, start + cfg.batch_size);
      double batch_loss = 0.0;
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(model.params.size());
      for (int i = start; i < stop; ++i) {
        const int idx = order[static_cast<std::size_t>(i)];
        const CachedScene& c = cached[static_cast<std::size_t>(idx)];
        const Eigen::VectorXd out = predict_vector(model, c.raster, c.scalars);
        Eigen::VectorXd d_out;
        batch_loss += scene_loss(idx, out, &d_out) / (stop - start);
        grad += backprop(model, c.raster, c.scalars, d_out) / (stop - start);
      }
      batch_loss += cfg.mu * model.params.squaredNorm();
      grad += 2.0 * cfg.mu * model.params;
      if (!std::isfinite(batch_loss)) throw NonFiniteLoss("cpn_train: non-finite loss");
      velocity = cfg.momentum * velocity - cfg.lr * grad;
      model.params += velocity;
      epoch_loss += batch_loss;
      ++batches;
    }
    curve.push_back(epoch_loss / batches);
  }
  return curve;
}

std::string sample_to_json(const Sample& sample) {
  std::string out = "{\"schema\":\"pilot-sample-v1\",\"scene\":";
  out += scene_to_json(sample.scene);
  out += ",\"expert_waypoints\":[";
  for (std::size_t i = 0; i < sample.expert_waypoints.size(); ++i) {
    if (i > 0) out += ',';
    out += '[';
    out += format_double(sample.expert_waypoints[i].x());
    out += ',';
    out += format_double(sample.expert_waypoints[i].y());
    out += ']';
  }
  out += "]}";
  return out;
}

Sample sample_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("schema", "") != std::string("pilot-sample-v1")) {
    throw std::runtime_error("sample_from_json: expected schema pilot-sample-v1");
  }
  Sample sample;
  sample.scene = scene_from_json(j.at("scene").dump());
  for (const auto& p : j.at("expert_waypoints")) {
    sample.expert_waypoints.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  }
  return sample;
}

void save_sample(const std::string& path, const Sample& sample) {
  write_text_file(path, sample_to_json(sample));
}

Sample load_sample(const std::string& path) {
  return sample_from_json(read_text_file(path));
}

}  // namespace pilot
