#pragma once

#include <stdexcept>
#include <vector>

#include "pilot/geometry.hpp"
#include "pilot/problem.hpp"

namespace pilot {

struct ProjectionOutOfDomain : std::runtime_error {
  explicit ProjectionOutOfDomain(const std::string& what) : std::runtime_error(what) {}
};

// Polyline with cached cumulative arc length; the longitudinal coordinate of
// the reference frame is arc length along it.
class ReferencePath {
 public:
  static ReferencePath from_points(std::vector<Vec2> points);

  const std::vector<Vec2>& points() const { return points_; }
  const std::vector<double>& cumulative_arclength() const { return arclength_; }
  double length() const { return arclength_.back(); }

  Vec2 position_at(double s) const;
  double tangent_at(double s) const;  // segment direction angle

 private:
  // Segment index i with arclength_[i] <= s < arclength_[i+1], clamped.
  std::size_t segment(double s) const;

  std::vector<Vec2> points_;
  std::vector<double> arclength_;
};

struct Projection {
  double arclength = 0.0;
  double lateral = 0.0;  // signed, left of path positive
  bool clamped = false;  // true when the nearest point is a path endpoint
};

// Nearest-point projection; ties between segments resolve to the smaller arc
// length. Never throws: out-of-domain points clamp to the path ends and set
// the clamped flag.
Projection project_point(const ReferencePath& path, const Vec2& p);

// World pose -> (arclength, lateral, relative heading) and back. Headings are
// measured against the tangent of the segment that contains the arc length.
Pose pose_to_reference(const ReferencePath& path, const Pose& world, bool* clamped = nullptr);
Pose pose_from_reference(const ReferencePath& path, const Pose& ref);

Trajectory to_reference_frame(const Trajectory& world, const ReferencePath& path);
Trajectory from_reference_frame(const Trajectory& ref, const ReferencePath& path);

// Transforms ego and agent states of a world-frame scene into the frame of
// scene.reference_path; the returned scene's reference_path is the
// straightened polyline (the x-axis). Borders pass through unchanged (they
// are defined in the reference frame already). Throws ProjectionOutOfDomain
// if any projected point clamps to a path end.
Scene to_reference_frame(const Scene& scene_world);

}  // namespace pilot
