#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <array>
#include <vector>

#include "pilot/geometry.hpp"
#include "pilot/problem.hpp"

namespace pilot {

// Flattened decision variables of the trajectory program: states x_1..x_N
// (4 entries each: x, y, heading, speed) followed by controls u_0..u_{N-1}
// (2 entries each: accel, steer). The initial state s0 is a fixed parameter.
struct DecisionVector {
  EgoState s0;
  int horizon = 0;
  Eigen::VectorXd z;

  static DecisionVector pack(const Trajectory& traj);
  Trajectory unpack(double dt) const;

  static int state_index(int k, int comp) { return 4 * (k - 1) + comp; }  // k in 1..N
  static int control_index(int N, int k, int comp) { return 4 * N + 2 * k + comp; }
};

// Per-timestep collision ellipse of one agent: the ego corner must stay
// outside. Semi-axes = agent half extents + ego half diagonal + margin; axes
// are aligned with the agent's heading.
struct ObstacleEllipse {
  Vec2 center{0.0, 0.0};
  double cos_heading = 1.0;
  double sin_heading = 0.0;
  double ax = 1.0;
  double ay = 1.0;
};

// Rectangular ego footprint; corner offsets rotate with the heading.
struct EgoFootprint {
  double length = 0.0;
  double width = 0.0;

  std::array<Vec2, 4> offsets() const {
    const double hl = 0.5 * length, hw = 0.5 * width;
    return {Vec2{hl, hw}, Vec2{hl, -hw}, Vec2{-hl, -hw}, Vec2{-hl, hw}};
  }
  std::array<Vec2, 4> corners(const Vec2& center, double heading) const;
};

// Max violation per constraint family; all entries >= 0.
struct ConstraintReport {
  double kinematic = 0.0;
  double speed = 0.0;
  double steer_bound = 0.0;
  double accel_bound = 0.0;
  double jerk = 0.0;
  double steer_jerk = 0.0;
  double border = 0.0;
  double collision = 0.0;

  double max_violation() const;
  static const std::array<const char*, 8>& family_names();
  std::array<double, 8> as_array() const;
};

struct Residuals {
  Eigen::VectorXd h;  // equalities (dynamics defects), 4N rows
  Eigen::VectorXd g;  // inequalities, feasible iff <= 0
  ConstraintReport report;
};

// Shared evaluation engine. Precomputes per-timestep ellipse data for a scene
// and exposes cost, residuals, Jacobians and fused augmented-Lagrangian /
// penalty evaluations. Row layout of g (blocks in order, each over the
// timesteps it covers):
//   speed lower, speed upper (k = 1..N); steer +/- , accel +/- (k = 0..N-1);
//   jerk +/-, steer jerk +/- (k = 0..N-2); border lower/upper per ego corner
//   (k = 1..N); collision per agent per ego corner (k = 1..N).
// Equality rows: 4 per step k = 0..N-1 (x, y, heading, speed defects); the
// heading row is wrapped to (-pi, pi]. All rows couple at most two
// consecutive timesteps (banded in time).
class NlpEvaluator {
 public:
  NlpEvaluator(const Scene& scene, const NlpConfig& cfg);

  int horizon() const { return N_; }
  int dim() const { return 6 * N_; }
  int num_eq() const { return 4 * N_; }
  int num_ineq() const;

  double cost(const Eigen::VectorXd& z) const;
  Eigen::VectorXd cost_gradient(const Eigen::VectorXd& z) const;
  // The cost is a diagonal quadratic, so its Hessian is this constant vector.
  Eigen::VectorXd cost_hessian_diag() const;
  Residuals residuals(const Eigen::VectorXd& z) const;
  void jacobians(const Eigen::VectorXd& z, Eigen::SparseMatrix<double>& jac_h,
                 Eigen::SparseMatrix<double>& jac_g) const;

  // Value and gradient of
  //   f(z) + lambda'h + rho/2 |h|^2 + 1/(2 rho) sum_i (max(0, mu_i + rho g_i)^2 - mu_i^2)
  double aug_lagrangian(const Eigen::VectorXd& z, const Eigen::VectorXd& lambda,
                        const Eigen::VectorXd& mu, double rho,
                        Eigen::VectorXd* grad) const;

  // f(z) + w sum max(0, g)^2 + w sum h^2, with analytic gradient.
  double penalty_loss(const Eigen::VectorXd& z, double penalty_weight,
                      Eigen::VectorXd* grad) const;

  const Scene& scene() const { return *scene_; }
  const NlpConfig& config() const { return *cfg_; }

 private:
  template <class Sink>
  void eval_constraints(const Eigen::VectorXd& z, Sink&& sink) const;

  const Scene* scene_;
  const NlpConfig* cfg_;
  int N_;
  EgoFootprint footprint_;
  std::array<Vec2, 4> offsets_;
  std::vector<std::vector<ObstacleEllipse>> ellipses_;  // [agent][timestep 0..N]
};

// Spec-facing wrappers over a one-shot evaluator.
double cost(const DecisionVector& z, const Scene& scene, const NlpConfig& cfg);
Eigen::VectorXd cost_gradient(const DecisionVector& z, const Scene& scene,
                              const NlpConfig& cfg);
Residuals constraint_residuals(const DecisionVector& z, const Scene& scene,
                               const NlpConfig& cfg);
void constraint_jacobians(const DecisionVector& z, const Scene& scene, const NlpConfig& cfg,
                          Eigen::SparseMatrix<double>& jac_h,
                          Eigen::SparseMatrix<double>& jac_g);
double cpn_loss(const DecisionVector& z, const Scene& scene, const NlpConfig& cfg,
                double penalty_weight, Eigen::VectorXd* grad = nullptr);

// Audit helper: per-family violations of a trajectory against a scene.
ConstraintReport constraint_report(const Trajectory& traj, const Scene& scene,
                                   const NlpConfig& cfg);

}  // namespace pilot
