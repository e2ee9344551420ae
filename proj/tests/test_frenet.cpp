#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "pilot/frenet.hpp"
#include "pilot/geometry.hpp"
#include "pilot/problem.hpp"
#include "pilot/rng.hpp"
#include "test_util.hpp"

using namespace pilot;

namespace {

std::vector<Vec2> arc_points(double radius, double sweep, int n) {
  std::vector<Vec2> pts;
  for (int i = 0; i <= n; ++i) {
    const double phi = sweep * i / n;
    pts.push_back({radius * std::sin(phi), radius * (1.0 - std::cos(phi))});
  }
  return pts;
}

// Dense-sampling oracle: nearest sampled point along the polyline, spaced
// about 1 mm apart.
Projection brute_projection(const ReferencePath& path, const Vec2& p) {
  Projection best;
  double best_d2 = std::numeric_limits<double>::infinity();
  const auto& pts = path.points();
  const auto& arcs = path.cumulative_arclength();
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const int per_segment =
        std::max(16, static_cast<int>(std::ceil((arcs[i + 1] - arcs[i]) / 1e-3)));
    for (int j = 0; j <= per_segment; ++j) {
      const double t = static_cast<double>(j) / per_segment;
      const Vec2 q = pts[i] + (pts[i + 1] - pts[i]) * t;
      const double d2 = (p - q).squaredNorm();
      if (d2 < best_d2 - 1e-15) {
        best_d2 = d2;
        best.arclength = arcs[i] + (arcs[i + 1] - arcs[i]) * t;
      }
    }
  }
  best.lateral = std::sqrt(best_d2);
  return best;
}

}  // namespace

TEST_CASE("arc length accumulates segment norms") {
  const ReferencePath path =
      ReferencePath::from_points({{0.0, 0.0}, {3.0, 4.0}, {3.0, 10.0}});
  REQUIRE(path.cumulative_arclength().size() == 3);
  CHECK(path.cumulative_arclength()[0] == 0.0);
  CHECK(path.cumulative_arclength()[1] == doctest::Approx(5.0));
  CHECK(path.length() == doctest::Approx(11.0));

  const Vec2 mid = path.position_at(2.5);
  CHECK(mid.x() == doctest::Approx(1.5));
  CHECK(mid.y() == doctest::Approx(2.0));
  CHECK(path.tangent_at(1.0) == doctest::Approx(std::atan2(4.0, 3.0)));
  CHECK(path.tangent_at(7.0) == doctest::Approx(kPi / 2.0));

  CHECK_THROWS_AS(ReferencePath::from_points({{1.0, 1.0}}), DimensionMismatch);
  CHECK_THROWS_AS(ReferencePath::from_points({{1.0, 1.0}, {1.0, 1.0}}), DimensionMismatch);
}

TEST_CASE("projection matches a dense sampling oracle") {
  Rng rng(31415ULL);
  const ReferencePath straight =
      ReferencePath::from_points({{0.0, 0.0}, {10.0, 0.0}, {20.0, 5.0}, {35.0, 5.0}});
  const ReferencePath curved = ReferencePath::from_points(arc_points(40.0, 1.2, 60));

  for (const ReferencePath* path : {&straight, &curved}) {
    for (int trial = 0; trial < 200; ++trial) {
      const double s = rng.uniform(0.5, path->length() - 0.5);
      const double off = rng.uniform(-4.0, 4.0);
      const double tan = path->tangent_at(s);
      const Vec2 p = path->position_at(s) +
                     Vec2{-std::sin(tan), std::cos(tan)} * off;
      const Projection got = project_point(*path, p);
      const Projection want = brute_projection(*path, p);
      CHECK(std::abs(got.arclength - want.arclength) < 2e-3);
      CHECK(std::abs(std::abs(got.lateral) - want.lateral) < 2e-3);
      CHECK(!got.clamped);
    }
  }
}

TEST_CASE("projection sign, ties, and clamping") {
  const ReferencePath path =
      ReferencePath::from_points({{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}});

  SUBCASE("left of travel is positive") {
    const Projection left = project_point(path, {0.5, 0.3});
    CHECK(left.lateral == doctest::Approx(0.3));
    const Projection right = project_point(path, {0.5, -0.3});
    CHECK(right.lateral == doctest::Approx(-0.3));
  }

  SUBCASE("ties resolve to the smaller arc length") {
    // (0.8, 0.2) is 0.2 from both segments; the first one wins.
    const Projection p = project_point(path, {0.8, 0.2});
    CHECK(p.arclength == doctest::Approx(0.8));
    CHECK(p.lateral == doctest::Approx(0.2));
  }

  SUBCASE("points beyond the ends clamp and say so") {
    const Projection before = project_point(path, {-2.0, 0.5});
    CHECK(before.clamped);
    CHECK(before.arclength == 0.0);
    const Projection after = project_point(path, {1.0, 3.0});
    CHECK(after.clamped);
    CHECK(after.arclength == doctest::Approx(path.length()));
  }
}

TEST_CASE("pose transforms round trip") {
  Rng rng(2718ULL);
  const ReferencePath path = ReferencePath::from_points(arc_points(60.0, 0.9, 80));
  for (int trial = 0; trial < 200; ++trial) {
    const double s = rng.uniform(1.0, path.length() - 1.0);
    const double tan = path.tangent_at(s);
    const Vec2 p = path.position_at(s) +
                   Vec2{-std::sin(tan), std::cos(tan)} * rng.uniform(-3.0, 3.0);
    const Pose world{p.x(), p.y(), rng.uniform(-kPi, kPi)};

    bool clamped = true;
    const Pose ref = pose_to_reference(path, world, &clamped);
    CHECK(!clamped);
    const Pose back = pose_from_reference(path, ref);
    CHECK(back.x == doctest::Approx(world.x).epsilon(1e-9));
    CHECK(back.y == doctest::Approx(world.y).epsilon(1e-9));
    CHECK(wrap_angle(back.heading - world.heading) == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("trajectory transforms preserve speed and round trip") {
  const ReferencePath path = ReferencePath::from_points(arc_points(50.0, 1.0, 70));
  Trajectory world;
  world.dt = 0.2;
  Rng rng(99ULL);
  for (int k = 0; k <= 8; ++k) {
    const double s = 5.0 + 4.0 * k;
    const double tan = path.tangent_at(s);
    const Vec2 p = path.position_at(s) +
                   Vec2{-std::sin(tan), std::cos(tan)} * rng.uniform(-2.0, 2.0);
    world.states.push_back({p.x(), p.y(), wrap_angle(tan + rng.uniform(-0.2, 0.2)),
                            rng.uniform(0.0, 10.0)});
    if (k < 8) world.controls.push_back({rng.normal(), 0.1 * rng.normal()});
  }

  const Trajectory ref = to_reference_frame(world, path);
  REQUIRE(ref.states.size() == world.states.size());
  CHECK(ref.dt == world.dt);
  for (std::size_t k = 0; k < ref.states.size(); ++k) {
    CHECK(ref.states[k].speed == world.states[k].speed);
  }
  for (std::size_t k = 0; k < ref.controls.size(); ++k) {
    CHECK(ref.controls[k].accel == world.controls[k].accel);
    CHECK(ref.controls[k].steer == world.controls[k].steer);
  }
  // Arc length grows monotonically along this trajectory.
  for (std::size_t k = 1; k < ref.states.size(); ++k) {
    CHECK(ref.states[k].x > ref.states[k - 1].x);
  }

  const Trajectory back = from_reference_frame(ref, path);
  for (std::size_t k = 0; k < back.states.size(); ++k) {
    CHECK(back.states[k].x == doctest::Approx(world.states[k].x).epsilon(1e-9));
    CHECK(back.states[k].y == doctest::Approx(world.states[k].y).epsilon(1e-9));
    CHECK(wrap_angle(back.states[k].heading - world.states[k].heading) ==
          doctest::Approx(0.0).epsilon(1e-9));
    CHECK(back.states[k].speed == world.states[k].speed);
  }
}

TEST_CASE("straightening a scene maps the route onto the x axis") {
  // Build a world scene on an arc; ego sits on the path with path-aligned
  // heading, one agent rides 1.5 m to the left.
  const std::vector<Vec2> pts = arc_points(80.0, 0.7, 50);
  const ReferencePath path = ReferencePath::from_points(pts);

  Scene world;
  world.reference_path = pts;
  world.horizon_steps = 5;
  world.dt = 0.2;
  world.v_max = 10.0;
  const double s_ego = 10.0;
  const double tan_ego = path.tangent_at(s_ego);
  world.ego = {path.position_at(s_ego).x(), path.position_at(s_ego).y(), tan_ego, 6.0};
  world.borders.lower = CubicSpline({0.0, path.length()}, {-4.5, -4.5});
  world.borders.upper = CubicSpline({0.0, path.length()}, {4.5, 4.5});
  world.borders.x_min = 0.0;
  world.borders.x_max = path.length();
  world.target_x = 40.0;

  AgentPrediction agent;
  agent.id = 4;
  agent.half_length = 2.4;
  agent.half_width = 0.95;
  for (int k = 0; k <= 5; ++k) {
    const double s = 25.0 + 2.0 * k;
    const double tan = path.tangent_at(s);
    const Vec2 p = path.position_at(s) + Vec2{-std::sin(tan), std::cos(tan)} * 1.5;
    agent.center_states.push_back({p.x(), p.y(), tan});
  }
  world.agents.push_back(agent);

  const Scene ref = to_reference_frame(world);
  CHECK(ref.ego.x == doctest::Approx(s_ego).epsilon(1e-6));
  CHECK(ref.ego.y == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(ref.ego.heading == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(ref.ego.speed == 6.0);
  REQUIRE(ref.reference_path.size() == pts.size());
  for (std::size_t i = 0; i < ref.reference_path.size(); ++i) {
    CHECK(ref.reference_path[i].y() == 0.0);
    CHECK(ref.reference_path[i].x() ==
          doctest::Approx(path.cumulative_arclength()[i]).epsilon(1e-12));
  }
  for (int k = 0; k <= 5; ++k) {
    CHECK(ref.agents[0].center_states[k].x == doctest::Approx(25.0 + 2.0 * k).epsilon(1e-4));
    CHECK(ref.agents[0].center_states[k].y == doctest::Approx(1.5).epsilon(1e-4));
    CHECK(ref.agents[0].center_states[k].heading == doctest::Approx(0.0).epsilon(1e-4));
  }
  // Borders pass through unchanged.
  CHECK(ref.borders.lower.value(10.0) == world.borders.lower.value(10.0));
  CHECK(ref.borders.x_max == world.borders.x_max);
  CHECK(ref.target_x == world.target_x);

  // A scene whose ego lies beyond the path end cannot be straightened.
  Scene bad = world;
  bad.ego.x = -20.0;
  bad.ego.y = -5.0;
  CHECK_THROWS_AS(to_reference_frame(bad), ProjectionOutOfDomain);
}
