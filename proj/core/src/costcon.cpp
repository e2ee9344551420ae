#include "pilot/costcon.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace pilot {

DecisionVector DecisionVector::pack(const Trajectory& traj) {
  if (traj.states.size() != traj.controls.size() + 1 || traj.controls.empty()) {
    throw DimensionMismatch("pack: trajectory needs N controls and N+1 states");
  }
  DecisionVector dv;
  dv.s0 = traj.states.front();
  dv.horizon = traj.horizon();
  const int N = dv.horizon;
  dv.z.resize(6 * N);
  for (int k = 1; k <= N; ++k) {
    const EgoState& s = traj.states[static_cast<std::size_t>(k)];
    dv.z[state_index(k, 0)] = s.x;
    dv.z[state_index(k, 1)] = s.y;
    dv.z[state_index(k, 2)] = s.heading;
    dv.z[state_index(k, 3)] = s.speed;
  }
  for (int k = 0; k < N; ++k) {
    const Control& u = traj.controls[static_cast<std::size_t>(k)];
    dv.z[control_index(N, k, 0)] = u.accel;
    dv.z[control_index(N, k, 1)] = u.steer;
  }
  return dv;
}

Trajectory DecisionVector::unpack(double dt) const {
  Trajectory traj;
  traj.dt = dt;
  const int N = horizon;
  traj.states.reserve(static_cast<std::size_t>(N) + 1);
  traj.states.push_back(s0);
  for (int k = 1; k <= N; ++k) {
    traj.states.push_back({z[state_index(k, 0)], z[state_index(k, 1)],
                           wrap_angle(z[state_index(k, 2)]), z[state_index(k, 3)]});
  }
  traj.controls.reserve(static_cast<std::size_t>(N));
  for (int k = 0; k < N; ++k) {
    traj.controls.push_back({z[control_index(N, k, 0)], z[control_index(N, k, 1)]});
  }
  return traj;
}

std::array<Vec2, 4> EgoFootprint::corners(const Vec2& center, double heading) const {
  const double c = std::cos(heading), s = std::sin(heading);
  std::array<Vec2, 4> out;
  const auto offs = offsets();
  for (int i = 0; i < 4; ++i) {
    out[i] = {center.x() + c * offs[i].x() - s * offs[i].y(),
              center.y() + s * offs[i].x() + c * offs[i].y()};
  }
  return out;
}

double ConstraintReport::max_violation() const {
  const auto a = as_array();
  return *std::max_element(a.begin(), a.end());
}

const std::array<const char*, 8>& ConstraintReport::family_names() {
  static const std::array<const char*, 8> names = {
      "kinematic", "speed",      "steer_bound", "accel_bound",
      "jerk",      "steer_jerk", "border",      "collision"};
  return names;
}

std::array<double, 8> ConstraintReport::as_array() const {
  return {kinematic, speed, steer_bound, accel_bound, jerk, steer_jerk, border, collision};
}

namespace {

enum Family : int {
  kKinematic = 0,
  kSpeed,
  kSteerBound,
  kAccelBound,
  kJerk,
  kSteerJerk,
  kBorder,
  kCollision
};

struct Entry {
  int col;
  double val;
};

double& family_slot(ConstraintReport& r, int family) {
  switch (family) {
    case kKinematic: return r.kinematic;
    case kSpeed: return r.speed;
    case kSteerBound: return r.steer_bound;
    case kAccelBound: return r.accel_bound;
    case kJerk: return r.jerk;
    case kSteerJerk: return r.steer_jerk;
    case kBorder: return r.border;
    default: return r.collision;
  }
}

}  // namespace

NlpEvaluator::NlpEvaluator(const Scene& scene, const NlpConfig& cfg)
    : scene_(&scene), cfg_(&cfg), N_(scene.horizon_steps) {
  if (N_ < 1) throw DimensionMismatch("NlpEvaluator: horizon_steps must be >= 1");
  footprint_ = EgoFootprint{cfg.ego_length, cfg.ego_width};
  offsets_ = footprint_.offsets();
  const double ego_half_diag = std::hypot(0.5 * cfg.ego_length, 0.5 * cfg.ego_width);
  ellipses_.reserve(scene.agents.size());
  for (const auto& agent : scene.agents) {
    if (agent.center_states.size() != static_cast<std::size_t>(N_) + 1) {
      throw DimensionMismatch("NlpEvaluator: agent prediction length != horizon + 1");
    }
    std::vector<ObstacleEllipse> per_step;
    per_step.reserve(agent.center_states.size());
    for (const auto& pose : agent.center_states) {
      ObstacleEllipse e;
      e.center = {pose.x, pose.y};
      e.cos_heading = std::cos(pose.heading);
      e.sin_heading = std::sin(pose.heading);
      e.ax = agent.half_length + ego_half_diag + cfg.ellipse_margin;
      e.ay = agent.half_width + ego_half_diag + cfg.ellipse_margin;
      per_step.push_back(e);
    }
    ellipses_.push_back(std::move(per_step));
  }
}

int NlpEvaluator::num_ineq() const {
  const int w = static_cast<int>(ellipses_.size());
  return 6 * N_ + 4 * (N_ - 1) + 8 * N_ + 4 * w * N_;
}

double NlpEvaluator::cost(const Eigen::VectorXd& z) const {
  const NlpConfig& c = *cfg_;
  const Scene& sc = *scene_;
  const int N = N_;
  double j = c.w_v * (sc.ego.speed - sc.v_max) * (sc.ego.speed - sc.v_max) +
             c.w_y * sc.ego.y * sc.ego.y;
  for (int k = 1; k <= N; ++k) {
    const double y = z[DecisionVector::state_index(k, 1)];
    const double v = z[DecisionVector::state_index(k, 3)];
    j += c.w_v * (v - sc.v_max) * (v - sc.v_max) + c.w_y * y * y;
  }
  const double xn = z[DecisionVector::state_index(N, 0)];
  j += c.w_x * (xn - sc.target_x) * (xn - sc.target_x);
  for (int k = 0; k < N; ++k) {
    const double a = z[DecisionVector::control_index(N, k, 0)];
    const double d = z[DecisionVector::control_index(N, k, 1)];
    j += c.w_a * a * a + c.w_delta * d * d;
  }
  return j;
}

Eigen::VectorXd NlpEvaluator::cost_gradient(const Eigen::VectorXd& z) const {
  const NlpConfig& c = *cfg_;
  const Scene& sc = *scene_;
  const int N = N_;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(6 * N);
  for (int k = 1; k <= N; ++k) {
    grad[DecisionVector::state_index(k, 1)] =
        2.0 * c.w_y * z[DecisionVector::state_index(k, 1)];
    grad[DecisionVector::state_index(k, 3)] =
        2.0 * c.w_v * (z[DecisionVector::state_index(k, 3)] - sc.v_max);
  }
  grad[DecisionVector::state_index(N, 0)] +=
      2.0 * c.w_x * (z[DecisionVector::state_index(N, 0)] - sc.target_x);
  for (int k = 0; k < N; ++k) {
    grad[DecisionVector::control_index(N, k, 0)] =
        2.0 * c.w_a * z[DecisionVector::control_index(N, k, 0)];
    grad[DecisionVector::control_index(N, k, 1)] =
        2.0 * c.w_delta * z[DecisionVector::control_index(N, k, 1)];
  }
  return grad;
}

Eigen::VectorXd NlpEvaluator::cost_hessian_diag() const {
  const NlpConfig& c = *cfg_;
  const int N = N_;
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(6 * N);
  for (int k = 1; k <= N; ++k) {
    diag[DecisionVector::state_index(k, 1)] = 2.0 * c.w_y;
    diag[DecisionVector::state_index(k, 3)] = 2.0 * c.w_v;
  }
  diag[DecisionVector::state_index(N, 0)] = 2.0 * c.w_x;
  for (int k = 0; k < N; ++k) {
    diag[DecisionVector::control_index(N, k, 0)] = 2.0 * c.w_a;
    diag[DecisionVector::control_index(N, k, 1)] = 2.0 * c.w_delta;
  }
  return diag;
}

// Walks every constraint row once, handing the residual (and, when the sink
// asks for them, the nonzero derivative entries) to the sink. Single source
// of truth for the constraint math.
template <class Sink>
void NlpEvaluator::eval_constraints(const Eigen::VectorXd& z, Sink&& sink) const {
  constexpr bool kEntries = std::decay_t<Sink>::kWantsEntries;
  const NlpConfig& c = *cfg_;
  const Scene& sc = *scene_;
  const int N = N_;
  const double dt = sc.dt;
  const double L = c.wheelbase;

  const auto sval = [&](int k, int comp) -> double {
    if (k == 0) {
      switch (comp) {
        case 0: return sc.ego.x;
        case 1: return sc.ego.y;
        case 2: return sc.ego.heading;
        default: return sc.ego.speed;
      }
    }
    return z[DecisionVector::state_index(k, comp)];
  };
  const auto scol = [&](int k, int comp) -> int {
    return k == 0 ? -1 : DecisionVector::state_index(k, comp);
  };
  const auto ucol = [&](int k, int comp) -> int {
    return DecisionVector::control_index(N, k, comp);
  };

  Entry entries[4];
  int eq_row = 0;
  int g_row = 0;

  const auto emit_eq = [&](int family, double value, std::initializer_list<Entry> ents) {
    if constexpr (kEntries) {
      int n = 0;
      for (const Entry& e : ents) {
        if (e.col >= 0) entries[n++] = e;
      }
      sink.eq(family, eq_row, value, entries, n);
    } else {
      sink.eq(family, eq_row, value, nullptr, 0);
    }
    ++eq_row;
  };
  const auto emit_g = [&](int family, double value, std::initializer_list<Entry> ents) {
    if constexpr (kEntries) {
      int n = 0;
      for (const Entry& e : ents) {
        if (e.col >= 0) entries[n++] = e;
      }
      sink.ineq(family, g_row, value, entries, n);
    } else {
      sink.ineq(family, g_row, value, nullptr, 0);
    }
    ++g_row;
  };

  // Dynamics defects, 4 rows per step.
  for (int k = 0; k < N; ++k) {
    const double xk = sval(k, 0), yk = sval(k, 1), th = sval(k, 2), v = sval(k, 3);
    const double a = z[ucol(k, 0)], d = z[ucol(k, 1)];
    const double cth = std::cos(th), sth = std::sin(th);
    const double td = std::tan(d);

    emit_eq(kKinematic, sval(k + 1, 0) - xk - v * cth * dt,
            {{scol(k + 1, 0), 1.0},
             {scol(k, 0), -1.0},
             {scol(k, 2), v * sth * dt},
             {scol(k, 3), -cth * dt}});
    emit_eq(kKinematic, sval(k + 1, 1) - yk - v * sth * dt,
            {{scol(k + 1, 1), 1.0},
             {scol(k, 1), -1.0},
             {scol(k, 2), -v * cth * dt},
             {scol(k, 3), -sth * dt}});
    const double sec2 = 1.0 + td * td;
    emit_eq(kKinematic, wrap_angle(sval(k + 1, 2) - th - v * td / L * dt),
            {{scol(k + 1, 2), 1.0},
             {scol(k, 2), -1.0},
             {scol(k, 3), -td / L * dt},
             {ucol(k, 1), -v * sec2 / L * dt}});
    emit_eq(kKinematic, sval(k + 1, 3) - v - a * dt,
            {{scol(k + 1, 3), 1.0}, {scol(k, 3), -1.0}, {ucol(k, 0), -dt}});
  }

  // Speed bounds on the decision states.
  for (int k = 1; k <= N; ++k) {
    const double v = sval(k, 3);
    emit_g(kSpeed, sc.v_min - v, {{scol(k, 3), -1.0}});
    emit_g(kSpeed, v - sc.v_max, {{scol(k, 3), 1.0}});
  }
  // Steering and acceleration bounds.
  for (int k = 0; k < N; ++k) {
    const double d = z[ucol(k, 1)];
    emit_g(kSteerBound, d - c.delta_max, {{ucol(k, 1), 1.0}});
    emit_g(kSteerBound, -d - c.delta_max, {{ucol(k, 1), -1.0}});
  }
  for (int k = 0; k < N; ++k) {
    const double a = z[ucol(k, 0)];
    emit_g(kAccelBound, a - c.a_max, {{ucol(k, 0), 1.0}});
    emit_g(kAccelBound, c.a_min - a, {{ucol(k, 0), -1.0}});
  }
  // Rate limits between consecutive controls.
  for (int k = 0; k + 1 < N; ++k) {
    const double da = z[ucol(k + 1, 0)] - z[ucol(k, 0)];
    emit_g(kJerk, da - c.jerk_max, {{ucol(k + 1, 0), 1.0}, {ucol(k, 0), -1.0}});
    emit_g(kJerk, -da - c.jerk_max, {{ucol(k + 1, 0), -1.0}, {ucol(k, 0), 1.0}});
  }
  for (int k = 0; k + 1 < N; ++k) {
    const double dd = z[ucol(k + 1, 1)] - z[ucol(k, 1)];
    emit_g(kSteerJerk, dd - c.steer_jerk_max, {{ucol(k + 1, 1), 1.0}, {ucol(k, 1), -1.0}});
    emit_g(kSteerJerk, -dd - c.steer_jerk_max, {{ucol(k + 1, 1), -1.0}, {ucol(k, 1), 1.0}});
  }

  // Border and collision constraints act on the four footprint corners of
  // every decision state.
  for (int k = 1; k <= N; ++k) {
    const double xk = sval(k, 0), yk = sval(k, 1), th = sval(k, 2);
    const double cth = std::cos(th), sth = std::sin(th);
    for (int i = 0; i < 4; ++i) {
      const double ox = offsets_[i].x(), oy = offsets_[i].y();
      const double rx = cth * ox - sth * oy;
      const double ry = sth * ox + cth * oy;
      const double cx = xk + rx, cy = yk + ry;
      // d corner / d heading = (-ry, rx)
      const double low = sc.borders.lower.value(cx);
      const double dlow = sc.borders.lower.derivative(cx);
      emit_g(kBorder, low - cy,
             {{scol(k, 0), dlow},
              {scol(k, 1), -1.0},
              {scol(k, 2), dlow * (-ry) - rx}});
      const double up = sc.borders.upper.value(cx);
      const double dup = sc.borders.upper.derivative(cx);
      emit_g(kBorder, cy - up,
             {{scol(k, 0), -dup},
              {scol(k, 1), 1.0},
              {scol(k, 2), -dup * (-ry) + rx}});
    }
  }
  for (std::size_t ai = 0; ai < ellipses_.size(); ++ai) {
    const auto& per_step = ellipses_[ai];
    for (int k = 1; k <= N; ++k) {
      const ObstacleEllipse& e = per_step[static_cast<std::size_t>(k)];
      const double xk = sval(k, 0), yk = sval(k, 1), th = sval(k, 2);
      const double cth = std::cos(th), sth = std::sin(th);
      for (int i = 0; i < 4; ++i) {
        const double ox = offsets_[i].x(), oy = offsets_[i].y();
        const double rx = cth * ox - sth * oy;
        const double ry = sth * ox + cth * oy;
        const double dx = xk + rx - e.center.x();
        const double dy = yk + ry - e.center.y();
        const double u = e.cos_heading * dx + e.sin_heading * dy;
        const double w = -e.sin_heading * dx + e.cos_heading * dy;
        const double value = 1.0 - (u * u) / (e.ax * e.ax) - (w * w) / (e.ay * e.ay);
        const double dv_du = -2.0 * u / (e.ax * e.ax);
        const double dv_dw = -2.0 * w / (e.ay * e.ay);
        const double d_dx = dv_du * e.cos_heading - dv_dw * e.sin_heading;
        const double d_dy = dv_du * e.sin_heading + dv_dw * e.cos_heading;
        emit_g(kCollision, value,
               {{scol(k, 0), d_dx},
                {scol(k, 1), d_dy},
                {scol(k, 2), d_dx * (-ry) + d_dy * rx}});
      }
    }
  }
}

namespace {

struct ValueSink {
  static constexpr bool kWantsEntries = false;
  Eigen::VectorXd* h;
  Eigen::VectorXd* g;
  ConstraintReport* report;

  void eq(int family, int row, double value, const Entry*, int) {
    (*h)[row] = value;
    double& slot = family_slot(*report, family);
    slot = std::max(slot, std::abs(value));
  }
  void ineq(int family, int row, double value, const Entry*, int) {
    (*g)[row] = value;
    double& slot = family_slot(*report, family);
    slot = std::max(slot, std::max(0.0, value));
  }
};

struct TripletSink {
  static constexpr bool kWantsEntries = true;
  std::vector<Eigen::Triplet<double>>* th;
  std::vector<Eigen::Triplet<double>>* tg;

  void eq(int, int row, double, const Entry* entries, int n) {
    for (int i = 0; i < n; ++i) th->emplace_back(row, entries[i].col, entries[i].val);
  }
  void ineq(int, int row, double, const Entry* entries, int n) {
    for (int i = 0; i < n; ++i) tg->emplace_back(row, entries[i].col, entries[i].val);
  }
};

// Accumulates value and gradient of a separable function of the residuals:
// phi_eq(h_i) and phi_g(g_i) with derivative coefficients supplied per row.
struct WeightedGradSink {
  static constexpr bool kWantsEntries = true;
  const Eigen::VectorXd* lambda;
  const Eigen::VectorXd* mu;
  double rho = 0.0;
  double penalty_weight = 0.0;
  bool penalty_mode = false;
  double value = 0.0;
  Eigen::VectorXd* grad;

  void eq(int, int row, double h, const Entry* entries, int n) {
    double coeff;
    if (penalty_mode) {
      value += penalty_weight * h * h;
      coeff = 2.0 * penalty_weight * h;
    } else {
      const double l = (*lambda)[row];
      value += l * h + 0.5 * rho * h * h;
      coeff = l + rho * h;
    }
    for (int i = 0; i < n; ++i) (*grad)[entries[i].col] += coeff * entries[i].val;
  }
  void ineq(int, int row, double g, const Entry* entries, int n) {
    double coeff;
    if (penalty_mode) {
      const double relu = std::max(0.0, g);
      value += penalty_weight * relu * relu;
      coeff = 2.0 * penalty_weight * relu;
    } else {
      const double m = (*mu)[row];
      const double t = std::max(0.0, m + rho * g);
      value += (t * t - m * m) / (2.0 * rho);
      coeff = t;
    }
    if (coeff != 0.0) {
      for (int i = 0; i < n; ++i) (*grad)[entries[i].col] += coeff * entries[i].val;
    }
  }
};

}  // namespace

Residuals NlpEvaluator::residuals(const Eigen::VectorXd& z) const {
  Residuals r;
  r.h.resize(num_eq());
  r.g.resize(num_ineq());
  ValueSink sink{&r.h, &r.g, &r.report};
  eval_constraints(z, sink);
  return r;
}

void NlpEvaluator::jacobians(const Eigen::VectorXd& z, Eigen::SparseMatrix<double>& jac_h,
                             Eigen::SparseMatrix<double>& jac_g) const {
  std::vector<Eigen::Triplet<double>> th, tg;
  th.reserve(static_cast<std::size_t>(num_eq()) * 4);
  tg.reserve(static_cast<std::size_t>(num_ineq()) * 3);
  TripletSink sink{&th, &tg};
  eval_constraints(z, sink);
  jac_h.resize(num_eq(), dim());
  jac_g.resize(num_ineq(), dim());
  jac_h.setFromTriplets(th.begin(), th.end());
  jac_g.setFromTriplets(tg.begin(), tg.end());
}

double NlpEvaluator::aug_lagrangian(const Eigen::VectorXd& z, const Eigen::VectorXd& lambda,
                                    const Eigen::VectorXd& mu, double rho,
                                    Eigen::VectorXd* grad) const {
  Eigen::VectorXd scratch;
  if (!grad) grad = &scratch;
  *grad = cost_gradient(z);
  WeightedGradSink sink;
  sink.lambda = &lambda;
  sink.mu = &mu;
  sink.rho = rho;
  sink.grad = grad;
  eval_constraints(z, sink);
  return cost(z) + sink.value;
}

double NlpEvaluator::penalty_loss(const Eigen::VectorXd& z, double penalty_weight,
                                  Eigen::VectorXd* grad) const {
  if (grad) {
    *grad = cost_gradient(z);
    WeightedGradSink sink;
    sink.penalty_mode = true;
    sink.penalty_weight = penalty_weight;
    sink.grad = grad;
    eval_constraints(z, sink);
    return cost(z) + sink.value;
  }
  const Residuals r = residuals(z);
  double value = cost(z) + penalty_weight * r.h.squaredNorm();
  for (int i = 0; i < r.g.size(); ++i) {
    const double relu = std::max(0.0, r.g[i]);
    value += penalty_weight * relu * relu;
  }
  return value;
}

double cost(const DecisionVector& z, const Scene& scene, const NlpConfig& cfg) {
  Scene s = scene;
  s.ego = z.s0;
  return NlpEvaluator(s, cfg).cost(z.z);
}

Eigen::VectorXd cost_gradient(const DecisionVector& z, const Scene& scene,
                              const NlpConfig& cfg) {
  Scene s = scene;
  s.ego = z.s0;
  return NlpEvaluator(s, cfg).cost_gradient(z.z);
}

Residuals constraint_residuals(const DecisionVector& z, const Scene& scene,
                               const NlpConfig& cfg) {
  Scene s = scene;
  s.ego = z.s0;
  return NlpEvaluator(s, cfg).residuals(z.z);
}

void constraint_jacobians(const DecisionVector& z, const Scene& scene, const NlpConfig& cfg,
                          Eigen::SparseMatrix<double>& jac_h,
                          Eigen::SparseMatrix<double>& jac_g) {
  Scene s = scene;
  s.ego = z.s0;
  NlpEvaluator(s, cfg).jacobians(z.z, jac_h, jac_g);
}

double cpn_loss(const DecisionVector& z, const Scene& scene, const NlpConfig& cfg,
                double penalty_weight, Eigen::VectorXd* grad) {
  if (!(penalty_weight > 0.0)) {
    throw std::invalid_argument("cpn_loss: penalty_weight must be > 0");
  }
  Scene s = scene;
  s.ego = z.s0;
  return NlpEvaluator(s, cfg).penalty_loss(z.z, penalty_weight, grad);
}

ConstraintReport constraint_report(const Trajectory& traj, const Scene& scene,
                                   const NlpConfig& cfg) {
  const DecisionVector dv = DecisionVector::pack(traj);
  return constraint_residuals(dv, scene, cfg).report;
}

}  // namespace pilot
