#pragma once

#include <Eigen/Core>
#include <array>
#include <vector>

namespace pilot {

using Vec2 = Eigen::Vector2d;

constexpr double kPi = 3.14159265358979323846;

// Wrap an angle to (-pi, pi].
double wrap_angle(double a);

// Linear interpolation between two angles along the short way, result wrapped.
double lerp_angle(double a, double b, double t);

inline Vec2 rotate(const Vec2& p, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * p.x() - s * p.y(), s * p.x() + c * p.y()};
}

// Natural cubic spline through strictly increasing knots. C2 inside the
// domain, extended linearly (C1) beyond it.
class CubicSpline {
 public:
  CubicSpline() = default;
  CubicSpline(std::vector<double> knots_x, std::vector<double> values);

  double value(double x) const;
  double derivative(double x) const;
  double second_derivative(double x) const;

  const std::vector<double>& knots_x() const { return x_; }
  const std::vector<double>& values() const { return y_; }
  bool empty() const { return x_.empty(); }
  double x_min() const { return x_.front(); }
  double x_max() const { return x_.back(); }

 private:
  std::size_t segment(double x) const;

  std::vector<double> x_, y_;
  std::vector<double> m_;  // second derivatives at knots (natural: ends zero)
};

// Oriented rectangle described by center, heading and half extents.
struct OrientedBox {
  Vec2 center{0.0, 0.0};
  double heading = 0.0;
  double half_length = 0.0;
  double half_width = 0.0;

  std::array<Vec2, 4> corners() const;
};

// Separating-axis overlap test for two oriented rectangles.
bool boxes_overlap(const OrientedBox& a, const OrientedBox& b);

bool point_in_box(const Vec2& p, const OrientedBox& box);

}  // namespace pilot
