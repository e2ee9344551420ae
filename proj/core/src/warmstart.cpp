#include "pilot/warmstart.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pilot/dynamics.hpp"

namespace pilot {

const char* to_string(InitKind kind) {
  switch (kind) {
    case InitKind::None: return "none";
    case InitKind::ConstVel: return "constvel";
    case InitKind::ConstAccel: return "constaccel";
    default: return "constdecel";
  }
}

Trajectory heuristic_init(InitKind kind, const Scene& scene, const NlpConfig& cfg) {
  const int N = scene.horizon_steps;
  const double dt = scene.dt;
  if (kind == InitKind::None) {
    Trajectory t;
    t.dt = dt;
    t.states.assign(static_cast<std::size_t>(N) + 1, EgoState{});
    t.controls.assign(static_cast<std::size_t>(N), Control{});
    return t;
  }
  std::vector<Control> controls(static_cast<std::size_t>(N));
  double v = scene.ego.speed;
  for (int k = 0; k < N; ++k) {
    double a = 0.0;
    if (kind == InitKind::ConstAccel) {
      a = std::max(0.0, std::min(cfg.a_max, (scene.v_max - v) / dt));
    } else if (kind == InitKind::ConstDecel) {
      a = std::min(0.0, std::max(cfg.a_min, -v / dt));
    }
    controls[static_cast<std::size_t>(k)].accel = a;
    v += a * dt;
  }
  return rollout(scene.ego, controls, dt, cfg.wheelbase);
}

namespace {

// Speed gained after the current step if acceleration a is ramped toward
// zero as fast as the jerk bound allows, over at most m future controls.
double rampdown_gain(double a, int m, double jerk_max, double dt) {
  double total = 0.0;
  for (int i = 1; i <= m; ++i) {
    const double t = a - i * jerk_max;
    if (t <= 0.0) break;
    total += t;
  }
  return total * dt;
}

// Largest a in [lo, hi] with ok(a) true; ok is monotone decreasing in a and
// ok(lo) is expected to hold (lo is returned as a safe fallback otherwise).
template <class F>
double bisect_largest(double lo, double hi, F&& ok) {
  if (ok(hi)) return hi;
  if (!ok(lo)) return lo;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (ok(mid) ? lo : hi) = mid;
  }
  return lo;
}

// Smallest a in [lo, hi] with ok(a) true; ok monotone increasing in a.
template <class F>
double bisect_smallest(double lo, double hi, F&& ok) {
  if (ok(lo)) return lo;
  if (!ok(hi)) return hi;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (ok(mid) ? hi : lo) = mid;
  }
  return hi;
}

const double kInf = std::numeric_limits<double>::infinity();

// Below this speed an interval counts as standstill; matches the threshold
// under which inverse dynamics stops trusting displacement directions.
constexpr double kStandstill = 1e-6;

}  // namespace

Trajectory sanitize_network_output(const std::vector<Vec2>& positions, const Scene& scene,
                                   const NlpConfig& cfg) {
  const double dt = scene.dt;
  const double jerk = cfg.jerk_max;
  const Trajectory raw = inverse_dynamics(positions, scene.ego.speed, dt, cfg.wheelbase);
  const int N = raw.horizon();

  // Clamped speed profile and the accelerations it implies.
  std::vector<double> v(static_cast<std::size_t>(N) + 1);
  v[0] = scene.ego.speed;
  for (int k = 1; k <= N; ++k) {
    v[static_cast<std::size_t>(k)] =
        std::clamp(raw.states[static_cast<std::size_t>(k)].speed, 0.0, scene.v_max);
  }

  std::vector<Control> controls(static_cast<std::size_t>(N));
  std::vector<double> rolled(static_cast<std::size_t>(N) + 1);

  // Forward pass over accelerations: acceleration bounds, jerk-limited
  // increments, and speed caps with enough look-ahead that every future
  // speed stays reachable inside [0, v_max] under the jerk limit. The tiny
  // decreasing margins keep the per-step windows non-empty against float
  // rounding; they shrink to zero at the horizon end.
  double vk = v[0];
  rolled[0] = vk;
  double a_prev = 0.0;
  for (int k = 0; k < N; ++k) {
    const int m = N - 1 - k;
    const double margin = m * 1e-12;
    const auto speed_ok_hi = [&](double a) {
      return vk + a * dt + rampdown_gain(a, m, jerk, dt) <= scene.v_max - margin;
    };
    const auto speed_ok_lo = [&](double a) {
      return vk + a * dt - rampdown_gain(-a, m, jerk, dt) >= margin;
    };
    const double cap_hi = bisect_largest(cfg.a_min, cfg.a_max, speed_ok_hi);
    const double cap_lo = bisect_smallest(cfg.a_min, cfg.a_max, speed_ok_lo);

    double lo = std::max(cfg.a_min, cap_lo);
    double hi = std::min(cfg.a_max, cap_hi);
    if (k > 0) {
      lo = std::max(lo, a_prev - jerk);
      hi = std::min(hi, a_prev + jerk);
    }
    // Positions never witness the speed after the last displacement, so the
    // final interval canonically holds speed; anything else would read back
    // differently when the output is sanitized again.
    const double desired =
        k < N - 1 ? (v[static_cast<std::size_t>(k) + 1] - vk) / dt : 0.0;
    double a;
    if (vk == 0.0 && desired <= 0.0) {
      // Parked and not asked to move: stay exactly stopped. The margins above
      // would otherwise force a creep, and the ramp-down look-ahead has
      // already brought a_prev to zero so the jerk window allows this.
      a = 0.0;
      if (k > 0) a = std::clamp(a, a_prev - jerk, a_prev + jerk);
    } else if (lo <= hi) {
      a = std::clamp(desired, lo, hi);
    } else {
      a = std::clamp(desired, cap_lo, cap_hi);  // float-safety fallback
    }

    // Exactness nudges: the committed value must satisfy the family checks
    // with the very float expressions the audits use.
    a = std::clamp(a, cfg.a_min, cfg.a_max);
    if (k > 0) {
      for (int i = 0; i < 64 && a - a_prev > jerk; ++i) a = std::nextafter(a, -kInf);
      for (int i = 0; i < 64 && a_prev - a > jerk; ++i) a = std::nextafter(a, kInf);
    }
    for (int i = 0; i < 64 && vk + a * dt > scene.v_max && a > cfg.a_min; ++i) {
      a = std::nextafter(a, -kInf);
    }
    for (int i = 0; i < 64 && vk + a * dt < 0.0 && a < cfg.a_max; ++i) {
      a = std::nextafter(a, kInf);
    }

    controls[static_cast<std::size_t>(k)].accel = a;
    vk = vk + a * dt;  // same recurrence rollout uses
    rolled[static_cast<std::size_t>(k) + 1] = vk;
    a_prev = a;
  }

  // Steering: bound clamp, then rate-limited forward pass. The windows never
  // conflict because the previous value already sits inside the bound.
  // Intervals that start or end near standstill steer toward zero: they move
  // too little for positions to encode the turn, so any other choice would
  // read back differently on a second pass.
  double d_prev = 0.0;
  for (int k = 0; k < N; ++k) {
    const bool crawling = rolled[static_cast<std::size_t>(k)] < kStandstill ||
                          rolled[static_cast<std::size_t>(k) + 1] < kStandstill;
    double d = crawling ? 0.0
                        : std::clamp(raw.controls[static_cast<std::size_t>(k)].steer,
                                     -cfg.delta_max, cfg.delta_max);
    if (k > 0) {
      d = std::clamp(d, d_prev - cfg.steer_jerk_max, d_prev + cfg.steer_jerk_max);
      for (int i = 0; i < 64 && d - d_prev > cfg.steer_jerk_max; ++i) {
        d = std::nextafter(d, -kInf);
      }
      for (int i = 0; i < 64 && d_prev - d > cfg.steer_jerk_max; ++i) {
        d = std::nextafter(d, kInf);
      }
    }
    controls[static_cast<std::size_t>(k)].steer = d;
    d_prev = d;
  }

  return rollout(scene.ego, controls, dt, cfg.wheelbase);
}

std::vector<Trajectory> expert_inits(const Scene& scene, const NlpConfig& cfg) {
  std::vector<Trajectory> inits;
  inits.reserve(5);
  inits.push_back(heuristic_init(InitKind::None, scene, cfg));
  inits.push_back(heuristic_init(InitKind::ConstVel, scene, cfg));
  inits.push_back(heuristic_init(InitKind::ConstAccel, scene, cfg));
  inits.push_back(heuristic_init(InitKind::ConstDecel, scene, cfg));

  // Lane-centered constant-speed member: drive the corridor centerline at
  // the current speed (nudged forward when nearly stopped) to seed a basin
  // the heading-preserving members cannot reach.
  const int N = scene.horizon_steps;
  const double dt = scene.dt;
  double speed = scene.ego.speed;
  if (speed < 0.5) speed = std::min(2.0, scene.v_max);
  const auto center = [&](double x) {
    return 0.5 * (scene.borders.lower.value(x) + scene.borders.upper.value(x));
  };
  std::vector<Vec2> positions;
  positions.reserve(static_cast<std::size_t>(N) + 1);
  for (int k = 0; k <= N; ++k) {
    const double x = scene.ego.x + speed * dt * k;
    positions.emplace_back(x, center(x));
  }
  if (N >= 2) {
    Trajectory lane = inverse_dynamics(positions, scene.ego.speed, dt, cfg.wheelbase);
    inits.push_back(std::move(lane));
  } else {
    Trajectory lane;
    lane.dt = dt;
    for (int k = 0; k <= N; ++k) {
      lane.states.push_back({positions[static_cast<std::size_t>(k)].x(),
                             positions[static_cast<std::size_t>(k)].y(), 0.0, speed});
    }
    lane.controls.assign(static_cast<std::size_t>(N), Control{});
    inits.push_back(std::move(lane));
  }
  return inits;
}

SolveReport expert_plan(const Scene& scene, const NlpConfig& cfg) {
  return solve_with_restarts(scene, expert_inits(scene, cfg), cfg);
}

}  // namespace pilot
