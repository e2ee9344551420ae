#include "pilot/frenet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pilot {

ReferencePath ReferencePath::from_points(std::vector<Vec2> points) {
  if (points.size() < 2) {
    throw DimensionMismatch("ReferencePath: need at least 2 points");
  }
  ReferencePath path;
  path.arclength_.reserve(points.size());
  path.arclength_.push_back(0.0);
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double len = (points[i] - points[i - 1]).norm();
    if (!(len > 0.0)) {
      throw DimensionMismatch("ReferencePath: consecutive points must be distinct");
    }
    path.arclength_.push_back(path.arclength_.back() + len);
  }
  path.points_ = std::move(points);
  return path;
}

std::size_t ReferencePath::segment(double s) const {
  const auto it = std::upper_bound(arclength_.begin(), arclength_.end(), s);
  const std::size_t hi = static_cast<std::size_t>(it - arclength_.begin());
  if (hi <= 1) return 0;
  return std::min(hi - 1, points_.size() - 2);
}

Vec2 ReferencePath::position_at(double s) const {
  const std::size_t i = segment(s);
  const double seg_len = arclength_[i + 1] - arclength_[i];
  const double t = (s - arclength_[i]) / seg_len;
  return points_[i] + t * (points_[i + 1] - points_[i]);
}

double ReferencePath::tangent_at(double s) const {
  const std::size_t i = segment(s);
  const Vec2 d = points_[i + 1] - points_[i];
  return std::atan2(d.y(), d.x());
}

Projection project_point(const ReferencePath& path, const Vec2& p) {
  const auto& pts = path.points();
  const auto& arc = path.cumulative_arclength();
  double best_d2 = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  bool low_overrun = false, high_overrun = false;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Vec2 d = pts[i + 1] - pts[i];
    const double seg_len2 = d.squaredNorm();
    const double raw_t = (p - pts[i]).dot(d) / seg_len2;
    const double t = std::clamp(raw_t, 0.0, 1.0);
    const Vec2 foot = pts[i] + t * d;
    const double d2 = (p - foot).squaredNorm();
    // Ties (up to fp noise) keep the earlier segment, i.e. the smaller
    // arc length.
    if (d2 + 1e-12 * std::max(1.0, d2) < best_d2) {
      best_d2 = d2;
      best_s = arc[i] + t * std::sqrt(seg_len2);
      low_overrun = (i == 0 && raw_t < 0.0);
      high_overrun = (i + 2 == pts.size() && raw_t > 1.0);
    }
  }
  Projection proj;
  proj.arclength = best_s;
  proj.clamped = low_overrun || high_overrun;
  const double tangent = path.tangent_at(best_s);
  const Vec2 rel = p - path.position_at(best_s);
  proj.lateral = std::cos(tangent) * rel.y() - std::sin(tangent) * rel.x();
  return proj;
}

Pose pose_to_reference(const ReferencePath& path, const Pose& world, bool* clamped) {
  const Projection proj = project_point(path, {world.x, world.y});
  if (clamped) *clamped = proj.clamped;
  Pose ref;
  ref.x = proj.arclength;
  ref.y = proj.lateral;
  ref.heading = wrap_angle(world.heading - path.tangent_at(proj.arclength));
  return ref;
}

Pose pose_from_reference(const ReferencePath& path, const Pose& ref) {
  if (ref.x < -1e-9 || ref.x > path.length() + 1e-9) {
    throw ProjectionOutOfDomain("longitudinal coordinate " + std::to_string(ref.x) +
                                " outside path domain [0, " +
                                std::to_string(path.length()) + "]");
  }
  const double s = std::clamp(ref.x, 0.0, path.length());
  const double tangent = path.tangent_at(s);
  const Vec2 base = path.position_at(s);
  Pose world;
  world.x = base.x() - std::sin(tangent) * ref.y;
  world.y = base.y() + std::cos(tangent) * ref.y;
  world.heading = wrap_angle(ref.heading + tangent);
  return world;
}

Trajectory to_reference_frame(const Trajectory& world, const ReferencePath& path) {
  Trajectory out;
  out.dt = world.dt;
  out.controls = world.controls;
  out.states.reserve(world.states.size());
  for (const auto& s : world.states) {
    bool clamped = false;
    const Pose ref = pose_to_reference(path, {s.x, s.y, s.heading}, &clamped);
    if (clamped) {
      throw ProjectionOutOfDomain("trajectory state projects beyond the path ends");
    }
    out.states.push_back({ref.x, ref.y, ref.heading, s.speed});
  }
  return out;
}

Trajectory from_reference_frame(const Trajectory& ref, const ReferencePath& path) {
  Trajectory out;
  out.dt = ref.dt;
  out.controls = ref.controls;
  out.states.reserve(ref.states.size());
  for (const auto& s : ref.states) {
    const Pose world = pose_from_reference(path, {s.x, s.y, s.heading});
    out.states.push_back({world.x, world.y, world.heading, s.speed});
  }
  return out;
}

Scene to_reference_frame(const Scene& scene_world) {
  const ReferencePath path = ReferencePath::from_points(scene_world.reference_path);
  Scene out = scene_world;

  bool clamped = false;
  const Pose ego = pose_to_reference(
      path, {scene_world.ego.x, scene_world.ego.y, scene_world.ego.heading}, &clamped);
  if (clamped) throw ProjectionOutOfDomain("ego projects beyond the path ends");
  out.ego.x = ego.x;
  out.ego.y = ego.y;
  out.ego.heading = ego.heading;

  for (auto& agent : out.agents) {
    for (auto& pose : agent.center_states) {
      const Pose ref = pose_to_reference(path, pose, &clamped);
      if (clamped) {
        throw ProjectionOutOfDomain("agent " + std::to_string(agent.id) +
                                    " projects beyond the path ends");
      }
      pose = ref;
    }
  }

  out.reference_path.clear();
  out.reference_path.reserve(path.points().size());
  for (double s : path.cumulative_arclength()) {
    out.reference_path.emplace_back(s, 0.0);
  }
  return out;
}

}  // namespace pilot
