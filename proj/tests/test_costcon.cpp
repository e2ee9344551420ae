#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cmath>
#include <vector>

#include "pilot/costcon.hpp"
#include "pilot/dynamics.hpp"
#include "pilot/geometry.hpp"
#include "pilot/problem.hpp"
#include "pilot/rng.hpp"
#include "test_util.hpp"

using namespace pilot;

namespace {

// Decision vector from a noisy rollout: dynamics residuals stay small (far
// from the heading-wrap discontinuity) while nothing is exactly on a
// constraint boundary.
Eigen::VectorXd noisy_rollout_z(const Scene& scene, Rng& rng, double noise) {
  std::vector<Control> controls;
  for (int k = 0; k < scene.horizon_steps; ++k) {
    controls.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-0.2, 0.2)});
  }
  const Trajectory traj = rollout(scene.ego, controls, scene.dt, 4.8);
  Eigen::VectorXd z = DecisionVector::pack(traj).z;
  for (int i = 0; i < z.size(); ++i) z[i] += noise * rng.normal();
  return z;
}

Scene fd_scene(int horizon) {
  Scene scene = testutil::straight_scene(horizon, 0.2, 6.0);
  scene.agents.push_back(
      testutil::straight_agent(1, horizon, 0.2, scene.ego.x + 12.0, 2.2, 1.0));
  return scene;
}

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

}  // namespace

TEST_CASE("residual sizes follow the row layout") {
  for (int agents : {0, 1, 3}) {
    const int N = 5;
    Scene scene = testutil::straight_scene(N, 0.2, 6.0);
    for (int a = 0; a < agents; ++a) {
      scene.agents.push_back(
          testutil::straight_agent(a, N, 0.2, 40.0 + 10.0 * a, 0.0));
    }
    const NlpConfig cfg;
    const NlpEvaluator eval(scene, cfg);
    CHECK(eval.dim() == 6 * N);
    CHECK(eval.num_eq() == 4 * N);
    CHECK(eval.num_ineq() == 6 * N + 4 * (N - 1) + 8 * N + 4 * agents * N);

    Rng rng(5ULL);
    const Eigen::VectorXd z = noisy_rollout_z(scene, rng, 0.01);
    const Residuals r = eval.residuals(z);
    CHECK(r.h.size() == eval.num_eq());
    CHECK(r.g.size() == eval.num_ineq());
  }
}

TEST_CASE("cost matches a hand-computed one-step value") {
  Scene scene = testutil::straight_scene(1, 0.2, 4.0);
  scene.ego = {5.0, 0.5, 0.0, 4.0};
  scene.target_x = 8.0;
  const NlpConfig cfg;  // w_x=0.1 w_v=2.5 w_y=0.05 w_a=1 w_delta=2, v_max=10

  Trajectory traj;
  traj.dt = 0.2;
  traj.states = {scene.ego, {6.0, -0.3, 0.1, 5.0}};
  traj.controls = {{0.7, -0.2}};
  const DecisionVector dv = DecisionVector::pack(traj);

  // k=0: 2.5*(4-10)^2 + 0.05*0.5^2            = 90.0125
  // k=1: 2.5*(5-10)^2 + 0.05*0.3^2            = 62.5045
  // terminal: 0.1*(6-8)^2                     = 0.4
  // controls: 1*0.7^2 + 2*0.2^2               = 0.57
  CHECK(cost(dv, scene, cfg) == doctest::Approx(153.487).epsilon(1e-12));

  // The k=0 terms are constant in z: shifting v_max changes the value but not
  // the gradient.
  const Eigen::VectorXd grad = cost_gradient(dv, scene, cfg);
  CHECK(grad.size() == 6);
  CHECK(grad[0] == doctest::Approx(2.0 * 0.1 * (6.0 - 8.0)));        // d/dx1
  CHECK(grad[1] == doctest::Approx(2.0 * 0.05 * (-0.3)));            // d/dy1
  CHECK(grad[2] == 0.0);                                             // d/dheading1
  CHECK(grad[3] == doctest::Approx(2.0 * 2.5 * (5.0 - 10.0)));       // d/dv1
  CHECK(grad[4] == doctest::Approx(2.0 * 1.0 * 0.7));                // d/da0
  CHECK(grad[5] == doctest::Approx(2.0 * 2.0 * (-0.2)));             // d/ddelta0
}

TEST_CASE("cost gradient matches central differences") {
  const Scene scene = fd_scene(4);
  const NlpConfig cfg;
  const NlpEvaluator eval(scene, cfg);
  Rng rng(101ULL);

  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd z = noisy_rollout_z(scene, rng, 0.05);
    const Eigen::VectorXd grad = eval.cost_gradient(z);
    REQUIRE(grad.size() == z.size());
    for (int j = 0; j < z.size(); ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(z[j]));
      Eigen::VectorXd zp = z, zm = z;
      zp[j] += h;
      zm[j] -= h;
      const double fd = (eval.cost(zp) - eval.cost(zm)) / (2.0 * h);
      CHECK(rel_err(grad[j], fd) < 1e-6);
    }
  }
}

TEST_CASE("cost hessian diagonal matches differentiated gradient") {
  const Scene scene = fd_scene(4);
  const NlpConfig cfg;
  const NlpEvaluator eval(scene, cfg);
  Rng rng(707ULL);

  const Eigen::VectorXd diag = eval.cost_hessian_diag();
  REQUIRE(diag.size() == eval.dim());
  const Eigen::VectorXd z = noisy_rollout_z(scene, rng, 0.05);
  for (int j = 0; j < z.size(); ++j) {
    const double h = 1e-5 * std::max(1.0, std::abs(z[j]));
    Eigen::VectorXd zp = z, zm = z;
    zp[j] += h;
    zm[j] -= h;
    const double fd =
        (eval.cost_gradient(zp)[j] - eval.cost_gradient(zm)[j]) / (2.0 * h);
    CHECK(std::abs(diag[j] - fd) < 1e-6 * std::max(1.0, std::abs(fd)));
  }
  // The cost has no cross terms, so the diagonal is the whole Hessian.
  const Eigen::VectorXd g0 = eval.cost_gradient(z);
  Eigen::VectorXd dz(z.size());
  for (int j = 0; j < dz.size(); ++j) dz[j] = rng.uniform(-0.1, 0.1);
  const Eigen::VectorXd g1 = eval.cost_gradient(z + dz);
  const Eigen::VectorXd predicted = g0 + diag.cwiseProduct(dz);
  for (int j = 0; j < z.size(); ++j) {
    CHECK(std::abs(g1[j] - predicted[j]) < 1e-9 * std::max(1.0, std::abs(g1[j])));
  }
}

TEST_CASE("constraint jacobians match central differences") {
  const Scene scene = fd_scene(4);
  const NlpConfig cfg;
  const NlpEvaluator eval(scene, cfg);
  Rng rng(202ULL);

  const Eigen::VectorXd z = noisy_rollout_z(scene, rng, 0.05);
  Eigen::SparseMatrix<double> jh, jg;
  eval.jacobians(z, jh, jg);
  REQUIRE(jh.rows() == eval.num_eq());
  REQUIRE(jg.rows() == eval.num_ineq());
  REQUIRE(jh.cols() == z.size());
  REQUIRE(jg.cols() == z.size());
  const Eigen::MatrixXd dh = Eigen::MatrixXd(jh);
  const Eigen::MatrixXd dg = Eigen::MatrixXd(jg);

  for (int j = 0; j < z.size(); ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(z[j]));
    Eigen::VectorXd zp = z, zm = z;
    zp[j] += h;
    zm[j] -= h;
    const Residuals rp = eval.residuals(zp);
    const Residuals rm = eval.residuals(zm);
    for (int i = 0; i < rp.h.size(); ++i) {
      const double fd = (rp.h[i] - rm.h[i]) / (2.0 * h);
      CHECK(rel_err(dh(i, j), fd) < 1e-5);
    }
    for (int i = 0; i < rp.g.size(); ++i) {
      const double fd = (rp.g[i] - rm.g[i]) / (2.0 * h);
      CHECK(rel_err(dg(i, j), fd) < 1e-5);
    }
  }
}

TEST_CASE("augmented lagrangian value and gradient") {
  const Scene scene = fd_scene(3);
  const NlpConfig cfg;
  const NlpEvaluator eval(scene, cfg);
  Rng rng(303ULL);

  int checked = 0;
  for (int trial = 0; trial < 12 && checked < 4; ++trial) {
    const Eigen::VectorXd z = noisy_rollout_z(scene, rng, 0.05);
    const double rho = (trial % 2 == 0) ? 10.0 : 500.0;
    Eigen::VectorXd lambda(eval.num_eq()), mu(eval.num_ineq());
    for (int i = 0; i < lambda.size(); ++i) lambda[i] = rng.normal();
    for (int i = 0; i < mu.size(); ++i) mu[i] = std::abs(rng.normal());

    // Value identity against separately assembled residuals.
    const Residuals r = eval.residuals(z);
    double want = eval.cost(z) + lambda.dot(r.h) + 0.5 * rho * r.h.squaredNorm();
    bool near_kink = false;
    for (int i = 0; i < r.g.size(); ++i) {
      const double t = mu[i] + rho * r.g[i];
      if (std::abs(t) < 1e-3 * rho) near_kink = true;
      const double relu = std::max(0.0, t);
      want += (relu * relu - mu[i] * mu[i]) / (2.0 * rho);
    }
    Eigen::VectorXd grad;
    const double got = eval.aug_lagrangian(z, lambda, mu, rho, &grad);
    CHECK(rel_err(got, want) < 1e-12);
    if (near_kink) continue;  // FD would straddle a max() corner
    ++checked;

    for (int j = 0; j < z.size(); ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(z[j]));
      Eigen::VectorXd zp = z, zm = z;
      zp[j] += h;
      zm[j] -= h;
      const double fp = eval.aug_lagrangian(zp, lambda, mu, rho, nullptr);
      const double fm = eval.aug_lagrangian(zm, lambda, mu, rho, nullptr);
      const double fd = (fp - fm) / (2.0 * h);
      CHECK(rel_err(grad[j], fd) < 1e-4);
    }
  }
  CHECK(checked >= 4);
}

TEST_CASE("penalty loss value and gradient") {
  const Scene scene = fd_scene(3);
  const NlpConfig cfg;
  const NlpEvaluator eval(scene, cfg);
  Rng rng(404ULL);

  int checked = 0;
  for (int trial = 0; trial < 12 && checked < 4; ++trial) {
    const Eigen::VectorXd z = noisy_rollout_z(scene, rng, 0.05);
    const double w = (trial % 2 == 0) ? 1.0 : 50.0;

    const Residuals r = eval.residuals(z);
    double want = eval.cost(z) + w * r.h.squaredNorm();
    bool near_kink = false;
    for (int i = 0; i < r.g.size(); ++i) {
      if (std::abs(r.g[i]) < 1e-4) near_kink = true;
      const double relu = std::max(0.0, r.g[i]);
      want += w * relu * relu;
    }
    Eigen::VectorXd grad;
    const double got = eval.penalty_loss(z, w, &grad);
    CHECK(rel_err(got, want) < 1e-12);
    CHECK(eval.penalty_loss(z, w, nullptr) == doctest::Approx(got).epsilon(1e-12));
    if (near_kink) continue;
    ++checked;

    for (int j = 0; j < z.size(); ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(z[j]));
      Eigen::VectorXd zp = z, zm = z;
      zp[j] += h;
      zm[j] -= h;
      const double fd =
          (eval.penalty_loss(zp, w, nullptr) - eval.penalty_loss(zm, w, nullptr)) / (2.0 * h);
      CHECK(rel_err(grad[j], fd) < 1e-4);
    }
  }
  CHECK(checked >= 4);
}

TEST_CASE("row structure: rate rows couple adjacent controls, dynamics rows stay banded") {
  const int N = 5;
  const Scene scene = fd_scene(N);
  const NlpConfig cfg;
  const NlpEvaluator eval(scene, cfg);
  Rng rng(505ULL);
  const Eigen::VectorXd z = noisy_rollout_z(scene, rng, 0.02);

  Eigen::SparseMatrix<double> jh, jg;
  eval.jacobians(z, jh, jg);
  const Eigen::MatrixXd dh = Eigen::MatrixXd(jh);
  const Eigen::MatrixXd dg = Eigen::MatrixXd(jg);

  SUBCASE("jerk rows") {
    const int base = 6 * N;  // after speed (2N) and control bounds (4N)
    for (int k = 0; k + 1 < N; ++k) {
      for (int sgn = 0; sgn < 2; ++sgn) {
        const int row = base + 2 * k + sgn;
        int nonzeros = 0;
        for (int j = 0; j < dg.cols(); ++j) {
          if (dg(row, j) != 0.0) ++nonzeros;
        }
        CHECK(nonzeros == 2);
        const double sign = (sgn == 0) ? 1.0 : -1.0;
        CHECK(dg(row, DecisionVector::control_index(N, k + 1, 0)) == sign);
        CHECK(dg(row, DecisionVector::control_index(N, k, 0)) == -sign);
      }
    }
  }

  SUBCASE("dynamics rows touch only steps k and k+1") {
    for (int k = 0; k < N; ++k) {
      for (int comp = 0; comp < 4; ++comp) {
        const int row = 4 * k + comp;
        for (int j = 0; j < dh.cols(); ++j) {
          if (dh(row, j) == 0.0) continue;
          bool allowed = false;
          if (k >= 1) {
            for (int c = 0; c < 4; ++c) {
              allowed |= (j == DecisionVector::state_index(k, c));
            }
          }
          for (int c = 0; c < 4; ++c) {
            allowed |= (j == DecisionVector::state_index(k + 1, c));
          }
          for (int c = 0; c < 2; ++c) {
            allowed |= (j == DecisionVector::control_index(N, k, c));
          }
          CHECK(allowed);
        }
      }
    }
  }
}

TEST_CASE("collision residuals are invariant under rotating scene and trajectory") {
  const int N = 4;
  const double dt = 0.2;
  const double phi = 0.7;
  const double c = std::cos(phi), s = std::sin(phi);
  const auto rot = [&](double x, double y) { return Vec2{c * x - s * y, s * x + c * y}; };

  Scene scene = testutil::straight_scene(N, dt, 6.0);
  scene.agents.push_back(testutil::straight_agent(1, N, dt, 15.0, 1.0, 2.0, 0.3));

  Rng rng(606ULL);
  std::vector<Control> controls;
  for (int k = 0; k < N; ++k) controls.push_back({rng.uniform(-1.0, 1.0), rng.uniform(-0.2, 0.2)});
  const Trajectory traj = rollout(scene.ego, controls, dt, 4.8);

  Scene rotated = scene;
  for (auto& agent : rotated.agents) {
    for (auto& pose : agent.center_states) {
      const Vec2 p = rot(pose.x, pose.y);
      pose = {p.x(), p.y(), wrap_angle(pose.heading + phi)};
    }
  }
  Trajectory traj_rot = traj;
  for (auto& st : traj_rot.states) {
    const Vec2 p = rot(st.x, st.y);
    st = {p.x(), p.y(), wrap_angle(st.heading + phi), st.speed};
  }
  rotated.ego = traj_rot.states[0];

  const NlpConfig cfg;
  const Residuals ra = constraint_residuals(DecisionVector::pack(traj), scene, cfg);
  const Residuals rb = constraint_residuals(DecisionVector::pack(traj_rot), rotated, cfg);
  REQUIRE(ra.g.size() == rb.g.size());
  const int collision_rows = 4 * N;  // one agent
  for (int i = 0; i < collision_rows; ++i) {
    const int row = static_cast<int>(ra.g.size()) - collision_rows + i;
    CHECK(ra.g[row] == doctest::Approx(rb.g[row]).epsilon(1e-10));
  }
  CHECK(ra.report.collision == doctest::Approx(rb.report.collision).epsilon(1e-10));
}

TEST_CASE("constraint_report isolates violation families") {
  const NlpConfig cfg;
  const double dt = 0.2;

  SUBCASE("feasible rollout reports all zeros") {
    Scene scene = testutil::straight_scene(6, dt, 6.0);
    scene.agents.push_back(testutil::straight_agent(1, 6, dt, 60.0, 3.0));
    const Trajectory traj =
        rollout(scene.ego, std::vector<Control>(6, {0.1, 0.01}), dt, cfg.wheelbase);
    const ConstraintReport rep = constraint_report(traj, scene, cfg);
    // The residual recomputes the dynamics in a different association order
    // than rollout, so "zero" means machine epsilon here.
    CHECK(rep.max_violation() < 1e-12);
  }

  SUBCASE("speed above the cap") {
    Scene scene = testutil::straight_scene(2, dt, 6.0);
    Trajectory traj = rollout(scene.ego, std::vector<Control>(2, {0.0, 0.0}), dt, cfg.wheelbase);
    traj.states[1].speed = scene.v_max + 0.5;
    const ConstraintReport rep = constraint_report(traj, scene, cfg);
    CHECK(rep.speed == doctest::Approx(0.5));
    CHECK(rep.kinematic > 0.0);  // the edit breaks the rollout
    CHECK(rep.border == 0.0);
    CHECK(rep.collision == 0.0);
    CHECK(rep.steer_bound == 0.0);
  }

  SUBCASE("control bounds with a one-step horizon") {
    Scene scene = testutil::straight_scene(1, dt, 6.0);
    Trajectory traj = rollout(scene.ego, {Control{0.0, cfg.delta_max + 0.1}}, dt, cfg.wheelbase);
    ConstraintReport rep = constraint_report(traj, scene, cfg);
    CHECK(rep.steer_bound == doctest::Approx(0.1));
    CHECK(rep.kinematic < 1e-12);
    CHECK(rep.accel_bound == 0.0);
    CHECK(rep.jerk == 0.0);

    traj = rollout(scene.ego, {Control{cfg.a_min - 0.25, 0.0}}, dt, cfg.wheelbase);
    rep = constraint_report(traj, scene, cfg);
    CHECK(rep.accel_bound == doctest::Approx(0.25));
    CHECK(rep.steer_bound == 0.0);
  }

  SUBCASE("rate limits from a dynamically exact rollout") {
    Scene scene = testutil::straight_scene(2, dt, 6.0);
    Trajectory traj =
        rollout(scene.ego, {Control{0.0, 0.0}, Control{1.0, 0.0}}, dt, cfg.wheelbase);
    ConstraintReport rep = constraint_report(traj, scene, cfg);
    CHECK(rep.jerk == doctest::Approx(1.0 - cfg.jerk_max));
    CHECK(rep.kinematic < 1e-12);
    CHECK(rep.accel_bound == 0.0);
    CHECK(rep.steer_jerk == 0.0);

    traj = rollout(scene.ego, {Control{0.0, 0.0}, Control{0.0, 0.3}}, dt, cfg.wheelbase);
    rep = constraint_report(traj, scene, cfg);
    CHECK(rep.steer_jerk == doctest::Approx(0.3 - cfg.steer_jerk_max));
    CHECK(rep.jerk == 0.0);
    CHECK(rep.steer_bound == 0.0);
  }

  SUBCASE("border violation from a laterally shifted rollout") {
    Scene scene = testutil::straight_scene(3, dt, 6.0);
    scene.ego.y = 4.2;  // upper border at 4.5, half width 0.95
    const Trajectory traj =
        rollout(scene.ego, std::vector<Control>(3, {0.0, 0.0}), dt, cfg.wheelbase);
    const ConstraintReport rep = constraint_report(traj, scene, cfg);
    CHECK(rep.border == doctest::Approx(4.2 + 0.5 * cfg.ego_width - 4.5));
    CHECK(rep.kinematic < 1e-12);
    CHECK(rep.collision == 0.0);
    CHECK(rep.speed == 0.0);
  }

  SUBCASE("collision with an agent parked on the path") {
    Scene scene = testutil::straight_scene(3, dt, 6.0);
    scene.agents.push_back(testutil::straight_agent(1, 3, dt, scene.ego.x + 6.0, 0.0));
    const Trajectory traj =
        rollout(scene.ego, std::vector<Control>(3, {0.0, 0.0}), dt, cfg.wheelbase);
    const ConstraintReport rep = constraint_report(traj, scene, cfg);
    CHECK(rep.collision > 0.0);
    CHECK(rep.border == 0.0);
    CHECK(rep.kinematic < 1e-12);
  }

  SUBCASE("kinematic defect from a nudged state") {
    Scene scene = testutil::straight_scene(3, dt, 6.0);
    Trajectory traj =
        rollout(scene.ego, std::vector<Control>(3, {0.0, 0.0}), dt, cfg.wheelbase);
    traj.states[2].x += 0.2;
    const ConstraintReport rep = constraint_report(traj, scene, cfg);
    CHECK(rep.kinematic == doctest::Approx(0.2));
    CHECK(rep.speed == 0.0);
    CHECK(rep.border == 0.0);
  }
}

TEST_CASE("cpn_loss equals cost plus weighted quadratic penalties") {
  const Scene scene = fd_scene(4);
  const NlpConfig cfg;
  Rng rng(707ULL);
  const Eigen::VectorXd z = noisy_rollout_z(scene, rng, 0.1);

  DecisionVector dv;
  dv.s0 = scene.ego;
  dv.horizon = 4;
  dv.z = z;

  const Residuals r = constraint_residuals(dv, scene, cfg);
  for (double w : {0.5, 10.0}) {
    double want = cost(dv, scene, cfg) + w * r.h.squaredNorm();
    for (int i = 0; i < r.g.size(); ++i) {
      const double relu = std::max(0.0, r.g[i]);
      want += w * relu * relu;
    }
    Eigen::VectorXd grad;
    const double got = cpn_loss(dv, scene, cfg, w, &grad);
    CHECK(rel_err(got, want) < 1e-12);
    CHECK(grad.size() == z.size());
  }

  CHECK_THROWS_AS(cpn_loss(dv, scene, cfg, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(cpn_loss(dv, scene, cfg, -1.0), std::invalid_argument);
}

TEST_CASE("pack and unpack invert each other") {
  Rng rng(808ULL);
  Trajectory traj;
  traj.dt = 0.2;
  for (int k = 0; k <= 5; ++k) {
    traj.states.push_back({rng.normal() * 5.0, rng.normal(), rng.uniform(-1.0, 1.0),
                           rng.uniform(0.0, 10.0)});
    if (k < 5) traj.controls.push_back({rng.normal(), 0.1 * rng.normal()});
  }
  const DecisionVector dv = DecisionVector::pack(traj);
  CHECK(dv.horizon == 5);
  CHECK(dv.z.size() == 30);
  const Trajectory back = dv.unpack(0.2);
  REQUIRE(back.states.size() == traj.states.size());
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    CHECK(back.states[k].x == traj.states[k].x);
    CHECK(back.states[k].y == traj.states[k].y);
    CHECK(back.states[k].heading == traj.states[k].heading);
    CHECK(back.states[k].speed == traj.states[k].speed);
  }
  for (std::size_t k = 0; k < traj.controls.size(); ++k) {
    CHECK(back.controls[k].accel == traj.controls[k].accel);
    CHECK(back.controls[k].steer == traj.controls[k].steer);
  }

  Trajectory bad = traj;
  bad.states.pop_back();
  CHECK_THROWS_AS(DecisionVector::pack(bad), DimensionMismatch);
}
