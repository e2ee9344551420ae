#include "pilot/nlp.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace pilot {

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::MaxIters: return "MaxIters";
    default: return "Diverged";
  }
}

namespace {

constexpr double kRho0 = 1e4;
constexpr double kRhoMax = 1e8;
constexpr double kRhoGrowth = 10.0;
constexpr double kInnerTol0 = 1e-2;
constexpr double kInnerTolFloor = 1e-4;
constexpr double kStationarityTol = 1e-4;
constexpr double kWarmMultiplierGate = 1e-2;
constexpr double kProgressFactor = 0.25;

bool finite(double v) { return std::isfinite(v); }
bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

struct InnerResult {
  int iterations = 0;
  bool reached_tol = false;
  bool nonfinite = false;
  double grad_inf = std::numeric_limits<double>::infinity();
};

// Minimizes the augmented Lagrangian at fixed multipliers with a damped
// Gauss-Newton iteration; z is updated in place and stays finite. The model
// Hessian drops the constraint curvature terms:
//   H = diag(cost) + rho (Jh' Jh + Jg' diag(active) Jg) + tau I,
// where a row of g is active when mu_i + rho g_i > 0, and tau is a Levenberg
// damping weight adapted from line search behaviour.
InnerResult minimize_inner(const NlpEvaluator& eval, const Eigen::VectorXd& lambda,
                           const Eigen::VectorXd& mu, double rho, double tol,
                           int max_iters, Eigen::VectorXd& z) {
  InnerResult res;
  const auto n = z.size();
  Eigen::VectorXd grad(n), grad_new(n);
  double f = eval.aug_lagrangian(z, lambda, mu, rho, &grad);
  if (!finite(f) || !finite(grad)) {
    res.nonfinite = true;
    return res;
  }

  const Eigen::VectorXd cost_diag = eval.cost_hessian_diag();
  Eigen::SparseMatrix<double> identity(n, n);
  identity.setIdentity();
  Eigen::SparseMatrix<double> jac_h, jac_g;
  Eigen::VectorXd z_new(n);
  double tau = 1e-6;
  int stalled = 0;

  for (int it = 0; it < max_iters; ++it) {
    res.grad_inf = grad.lpNorm<Eigen::Infinity>();
    if (res.grad_inf <= tol) {
      res.reached_tol = true;
      return res;
    }

    const Residuals r = eval.residuals(z);
    eval.jacobians(z, jac_h, jac_g);
    Eigen::VectorXd active(r.g.size());
    for (Eigen::Index i = 0; i < r.g.size(); ++i) {
      active[i] = mu[i] + rho * r.g[i] > 0.0 ? 1.0 : 0.0;
    }
    Eigen::SparseMatrix<double> hess =
        Eigen::SparseMatrix<double>(jac_h.transpose()) * jac_h;
    hess += Eigen::SparseMatrix<double>(jac_g.transpose()) *
            Eigen::SparseMatrix<double>(active.asDiagonal() * jac_g);
    hess *= rho;
    hess += Eigen::SparseMatrix<double>(cost_diag.asDiagonal());

    Eigen::VectorXd dir;
    double slope = 0.0;
    while (true) {
      Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(
          Eigen::SparseMatrix<double>(hess + tau * identity));
      if (llt.info() == Eigen::Success) {
        dir = llt.solve(-grad);
        slope = dir.dot(grad);
        if (finite(dir) && slope < 0.0) break;
      }
      tau *= 100.0;
      if (tau > 1e12) {
        dir = -grad;
        slope = dir.dot(grad);
        break;
      }
    }

    double alpha = 1.0;
    bool accepted = false;
    double f_new = f;
    for (int ls = 0; ls < 40; ++ls) {
      z_new = z + alpha * dir;
      f_new = eval.aug_lagrangian(z_new, lambda, mu, rho, &grad_new);
      if (finite(f_new) && finite(grad_new) && f_new <= f + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      // Backtrack to the minimizer of the quadratic through f, slope and the
      // rejected trial, kept inside [0.1, 0.5] of the current step.
      double shrink = 0.5;
      if (finite(f_new)) {
        const double denom = f_new - f - slope * alpha;
        if (denom > 0.0) {
          shrink = std::clamp(-0.5 * slope * alpha / denom, 0.1, 0.5);
        }
      }
      alpha *= shrink;
    }
    if (!accepted) {
      // No descent at machine-scale steps: treat as converged as far as this
      // subproblem can go.
      return res;
    }
    const double decrease = f - f_new;
    z.swap(z_new);
    f = f_new;
    grad.swap(grad_new);
    ++res.iterations;
    // Full steps mean the model is trustworthy; timid steps mean it is not.
    if (alpha >= 1.0) {
      tau = std::max(tau * 0.25, 1e-10);
    } else if (alpha < 0.1) {
      tau *= 10.0;
    }
    // Accepted steps that no longer move the objective mean the target
    // stationarity is below what floating point can resolve here; stop
    // instead of burning the iteration budget.
    if (decrease <= 1e-10 * (1.0 + std::abs(f))) {
      if (++stalled >= 8) return res;
    } else {
      stalled = 0;
    }
  }
  res.grad_inf = grad.lpNorm<Eigen::Infinity>();
  res.reached_tol = res.grad_inf <= tol;
  return res;
}

// Least-squares estimate of the KKT multipliers at a near-feasible point;
// makes warm starts at (or close to) an optimum terminate almost instantly.
void estimate_multipliers(const NlpEvaluator& eval, const Eigen::VectorXd& z,
                          const Eigen::VectorXd& g, Eigen::VectorXd& lambda,
                          Eigen::VectorXd& mu) {
  Eigen::SparseMatrix<double> jac_h, jac_g;
  eval.jacobians(z, jac_h, jac_g);
  std::vector<int> active;
  for (int i = 0; i < g.size(); ++i) {
    if (g[i] >= -1e-3) active.push_back(i);
  }
  const int ne = static_cast<int>(jac_h.rows());
  const int na = static_cast<int>(active.size());
  const Eigen::MatrixXd dense_h(jac_h);
  const Eigen::MatrixXd dense_g(jac_g);
  Eigen::MatrixXd a(eval.dim(), ne + na);
  a.leftCols(ne) = dense_h.transpose();
  for (int i = 0; i < na; ++i) {
    a.col(ne + i) = dense_g.row(active[static_cast<std::size_t>(i)]).transpose();
  }
  const Eigen::VectorXd rhs = -eval.cost_gradient(z);
  const Eigen::VectorXd sol = a.colPivHouseholderQr().solve(rhs);
  if (!finite(sol)) return;
  lambda = sol.head(ne);
  mu.setZero();
  for (int i = 0; i < na; ++i) {
    mu[active[static_cast<std::size_t>(i)]] = std::max(0.0, sol[ne + i]);
  }
}

}  // namespace

SolveReport solve(const Scene& scene, const Trajectory& init, const NlpConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const int N = scene.horizon_steps;
  if (init.horizon() != N || init.states.size() != static_cast<std::size_t>(N) + 1) {
    throw DimensionMismatch("solve: init horizon does not match the scene");
  }
  if (init.dt != scene.dt) {
    throw DimensionMismatch("solve: init timestep does not match the scene");
  }

  NlpEvaluator eval(scene, cfg);
  Eigen::VectorXd z(eval.dim());
  for (int k = 1; k <= N; ++k) {
    const EgoState& s = init.states[static_cast<std::size_t>(k)];
    z[DecisionVector::state_index(k, 0)] = s.x;
    z[DecisionVector::state_index(k, 1)] = s.y;
    z[DecisionVector::state_index(k, 2)] = s.heading;
    z[DecisionVector::state_index(k, 3)] = s.speed;
  }
  for (int k = 0; k < N; ++k) {
    const Control& u = init.controls[static_cast<std::size_t>(k)];
    z[DecisionVector::control_index(N, k, 0)] = u.accel;
    z[DecisionVector::control_index(N, k, 1)] = u.steer;
  }

  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(eval.num_eq());
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(eval.num_ineq());
  double rho = kRho0;
  double inner_tol = kInnerTol0;

  bool solver_converged = false;
  bool nonfinite = false;
  int total_inner = 0;

  {
    const Residuals r0 = eval.residuals(z);
    const double viol0 = r0.report.max_violation();
    if (finite(viol0) && viol0 <= kWarmMultiplierGate) {
      estimate_multipliers(eval, z, r0.g, lambda, mu);
    }
    double prev_viol = std::max(viol0, cfg.constraint_tol);

    for (int outer = 0; outer < cfg.max_iters; ++outer) {
      const int budget = cfg.max_inner_iters - total_inner;
      if (budget <= 0) break;
      const InnerResult inner =
          minimize_inner(eval, lambda, mu, rho, inner_tol, budget, z);
      total_inner += inner.iterations;
      if (inner.nonfinite) {
        nonfinite = true;
        break;
      }
      const Residuals r = eval.residuals(z);
      const double viol = r.report.max_violation();
      if (!finite(viol)) {
        nonfinite = true;
        break;
      }
      if (viol <= cfg.constraint_tol && inner.grad_inf <= kStationarityTol) {
        solver_converged = true;
        break;
      }
      // First-order multiplier update only while feasibility improves;
      // otherwise grow the penalty and leave the multipliers alone, so a
      // stalled subproblem cannot blow them up.
      if (viol <= std::max(kProgressFactor * prev_viol, cfg.constraint_tol)) {
        lambda += rho * r.h;
        mu = (mu + rho * r.g).cwiseMax(0.0);
      } else if (rho >= kRhoMax && viol >= 0.99 * prev_viol) {
        // The penalty has no leverage left and feasibility is frozen; further
        // outer iterations would repeat this one.
        break;
      } else {
        rho = std::min(rho * kRhoGrowth, kRhoMax);
      }
      prev_viol = std::max(viol, cfg.constraint_tol);
      // Ask the next subproblem for stationarity proportional to how
      // infeasible we still are.
      inner_tol = std::clamp(0.1 * viol, kInnerTolFloor, kInnerTol0);
    }
  }

  SolveReport report;
  report.iterations = total_inner;

  DecisionVector dv;
  dv.s0 = scene.ego;
  dv.horizon = N;
  dv.z = z;
  report.trajectory = dv.unpack(scene.dt);
  // Re-audit the exact trajectory being returned, so any external check of
  // the report reproduces these numbers bit for bit.
  const DecisionVector repacked = DecisionVector::pack(report.trajectory);
  const Residuals audit = eval.residuals(repacked.z);
  report.final_cost = eval.cost(repacked.z);
  report.max_violation = audit.report.max_violation();
  if (nonfinite || !finite(report.final_cost) || !finite(report.max_violation)) {
    report.status = SolveStatus::Diverged;
  } else if (solver_converged && report.max_violation <= cfg.constraint_tol) {
    report.status = SolveStatus::Converged;
  } else {
    report.status = SolveStatus::MaxIters;
  }
  report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

SolveReport solve_with_restarts(const Scene& scene, const std::vector<Trajectory>& inits,
                                const NlpConfig& cfg) {
  if (inits.empty()) {
    throw DimensionMismatch("solve_with_restarts: need at least one init");
  }
  // Rank: Converged (by cost) over MaxIters (by violation) over Diverged
  // (whose cost and violation are not meaningful). Ties keep the earlier init.
  const auto tier = [](const SolveReport& r) {
    switch (r.status) {
      case SolveStatus::Converged: return 0;
      case SolveStatus::MaxIters: return 1;
      default: return 2;
    }
  };
  SolveReport best;
  bool have = false;
  for (const auto& init : inits) {
    SolveReport r = solve(scene, init, cfg);
    if (!have) {
      best = std::move(r);
      have = true;
      continue;
    }
    if (tier(r) != tier(best)) {
      if (tier(r) < tier(best)) best = std::move(r);
      continue;
    }
    const bool wins = r.status == SolveStatus::Converged
                          ? r.final_cost < best.final_cost
                          : r.status == SolveStatus::MaxIters &&
                                r.max_violation < best.max_violation;
    if (wins) best = std::move(r);
  }
  return best;
}

}  // namespace pilot
