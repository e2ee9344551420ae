#include "pilot/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace pilot {

double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a > kPi) {
    a -= 2.0 * kPi;
  } else if (a <= -kPi) {
    a += 2.0 * kPi;
  }
  return a;
}

double lerp_angle(double a, double b, double t) {
  return wrap_angle(a + wrap_angle(b - a) * t);
}

CubicSpline::CubicSpline(std::vector<double> knots_x, std::vector<double> values)
    : x_(std::move(knots_x)), y_(std::move(values)) {
  if (x_.size() < 2 || x_.size() != y_.size()) {
    throw std::invalid_argument("CubicSpline: need >= 2 knots and matching values");
  }
  const std::size_t n = x_.size();
  for (std::size_t i = 1; i < n; ++i) {
    if (!(x_[i] > x_[i - 1])) {
      throw std::invalid_argument("CubicSpline: knots must be strictly increasing");
    }
  }
  // Tridiagonal solve for interior second derivatives, natural end conditions.
  m_.assign(n, 0.0);
  if (n > 2) {
    const std::size_t k = n - 2;
    std::vector<double> diag(k), rhs(k), upper(k);
    for (std::size_t i = 0; i < k; ++i) {
      const double h0 = x_[i + 1] - x_[i];
      const double h1 = x_[i + 2] - x_[i + 1];
      diag[i] = 2.0 * (h0 + h1);
      upper[i] = h1;
      rhs[i] = 6.0 * ((y_[i + 2] - y_[i + 1]) / h1 - (y_[i + 1] - y_[i]) / h0);
    }
    for (std::size_t i = 1; i < k; ++i) {
      const double h0 = x_[i + 1] - x_[i];  // sub-diagonal entry of row i
      const double w = h0 / diag[i - 1];
      diag[i] -= w * upper[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
    m_[k] = rhs[k - 1] / diag[k - 1];
    for (std::size_t i = k - 1; i-- > 0;) {
      m_[i + 1] = (rhs[i] - upper[i] * m_[i + 2]) / diag[i];
    }
  }
}

std::size_t CubicSpline::segment(double x) const {
  std::size_t lo = 0, hi = x_.size() - 1;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (x_[mid] <= x) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

double CubicSpline::value(double x) const {
  if (x <= x_.front()) {
    return y_.front() + derivative(x_.front()) * (x - x_.front());
  }
  if (x >= x_.back()) {
    return y_.back() + derivative(x_.back()) * (x - x_.back());
  }
  const std::size_t i = segment(x);
  const double h = x_[i + 1] - x_[i];
  const double a = (x_[i + 1] - x) / h;
  const double b = (x - x_[i]) / h;
  return a * y_[i] + b * y_[i + 1] +
         ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
}

double CubicSpline::derivative(double x) const {
  const double lo = x_.front(), hi = x_.back();
  const double xc = std::min(std::max(x, lo), hi);
  std::size_t i = segment(xc);
  if (xc >= hi) i = x_.size() - 2;
  const double h = x_[i + 1] - x_[i];
  const double a = (x_[i + 1] - xc) / h;
  const double b = (xc - x_[i]) / h;
  return (y_[i + 1] - y_[i]) / h - (3.0 * a * a - 1.0) * h * m_[i] / 6.0 +
         (3.0 * b * b - 1.0) * h * m_[i + 1] / 6.0;
}

double CubicSpline::second_derivative(double x) const {
  if (x < x_.front() || x > x_.back()) return 0.0;
  const std::size_t i = segment(x);
  const double h = x_[i + 1] - x_[i];
  const double a = (x_[i + 1] - x) / h;
  const double b = (x - x_[i]) / h;
  return a * m_[i] + b * m_[i + 1];
}

std::array<Vec2, 4> OrientedBox::corners() const {
  const double c = std::cos(heading), s = std::sin(heading);
  const Vec2 ax{c, s}, ay{-s, c};
  return {center + half_length * ax + half_width * ay,
          center + half_length * ax - half_width * ay,
          center - half_length * ax - half_width * ay,
          center - half_length * ax + half_width * ay};
}

namespace {

bool separated_on_axes(const OrientedBox& a, const OrientedBox& b) {
  const double c = std::cos(a.heading), s = std::sin(a.heading);
  const Vec2 axes[2] = {{c, s}, {-s, c}};
  const auto bc = b.corners();
  for (int i = 0; i < 2; ++i) {
    const double extent = (i == 0) ? a.half_length : a.half_width;
    const double ca = axes[i].dot(a.center);
    double lo = axes[i].dot(bc[0]), hi = lo;
    for (int j = 1; j < 4; ++j) {
      const double p = axes[i].dot(bc[j]);
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
    if (hi < ca - extent || lo > ca + extent) return true;
  }
  return false;
}

}  // namespace

bool boxes_overlap(const OrientedBox& a, const OrientedBox& b) {
  return !separated_on_axes(a, b) && !separated_on_axes(b, a);
}

bool point_in_box(const Vec2& p, const OrientedBox& box) {
  const Vec2 d = p - box.center;
  const double c = std::cos(box.heading), s = std::sin(box.heading);
  const double lx = c * d.x() + s * d.y();
  const double ly = -s * d.x() + c * d.y();
  return std::abs(lx) <= box.half_length && std::abs(ly) <= box.half_width;
}

}  // namespace pilot
