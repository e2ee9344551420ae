#include "pilot/serialization.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "pilot/geometry.hpp"

namespace pilot {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void JsonWriter::separate() {
  if (need_comma_) out_ += ',';
  need_comma_ = false;
}

void JsonWriter::begin_object() {
  separate();
  out_ += '{';
}

void JsonWriter::end_object() {
  out_ += '}';
  need_comma_ = true;
}

void JsonWriter::begin_array() {
  separate();
  out_ += '[';
}

void JsonWriter::end_array() {
  out_ += ']';
  need_comma_ = true;
}

void JsonWriter::key(std::string_view k) {
  separate();
  out_ += '"';
  out_ += k;
  out_ += "\":";
}

void JsonWriter::value(double v) {
  separate();
  out_ += format_double(v);
  need_comma_ = true;
}

void JsonWriter::value(int v) { value(static_cast<std::int64_t>(v)); }

void JsonWriter::value(std::int64_t v) {
  separate();
  out_ += std::to_string(v);
  need_comma_ = true;
}

void JsonWriter::value(std::uint64_t v) {
  separate();
  out_ += std::to_string(v);
  need_comma_ = true;
}

void JsonWriter::value(std::string_view s) {
  separate();
  out_ += '"';
  for (char c : s) {
    if (c == '"' || c == '\\') out_ += '\\';
    out_ += c;
  }
  out_ += '"';
  need_comma_ = true;
}

void JsonWriter::value_bool(bool b) {
  separate();
  out_ += b ? "true" : "false";
  need_comma_ = true;
}

std::string JsonWriter::take() { return std::move(out_); }

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

void write_spline(JsonWriter& w, const CubicSpline& s) {
  w.begin_object();
  w.key("knots_x");
  w.begin_array();
  for (double x : s.knots_x()) w.value(x);
  w.end_array();
  w.key("values");
  w.begin_array();
  for (double y : s.values()) w.value(y);
  w.end_array();
  w.end_object();
}

CubicSpline read_spline(const json& j) {
  std::vector<double> xs = j.at("knots_x").get<std::vector<double>>();
  std::vector<double> ys = j.at("values").get<std::vector<double>>();
  return CubicSpline(std::move(xs), std::move(ys));
}

void write_ego(JsonWriter& w, const EgoState& e) {
  w.begin_object();
  w.key("x");
  w.value(e.x);
  w.key("y");
  w.value(e.y);
  w.key("heading");
  w.value(e.heading);
  w.key("speed");
  w.value(e.speed);
  w.end_object();
}

EgoState read_ego(const json& j) {
  EgoState e;
  e.x = j.at("x").get<double>();
  e.y = j.at("y").get<double>();
  e.heading = j.at("heading").get<double>();
  e.speed = j.at("speed").get<double>();
  return e;
}

void expect_schema(const json& j, const char* schema) {
  if (!j.is_object() || j.value("schema", "") != schema) {
    throw std::runtime_error(std::string("expected schema ") + schema);
  }
}

}  // namespace

std::string scene_to_json(const Scene& scene) {
  JsonWriter w;
  w.begin_object();
  w.key("schema");
  w.value("pilot-scene-v1");
  w.key("ego");
  write_ego(w, scene.ego);
  w.key("reference_path");
  w.begin_array();
  for (const auto& p : scene.reference_path) {
    w.begin_array();
    w.value(p.x());
    w.value(p.y());
    w.end_array();
  }
  w.end_array();
  w.key("borders");
  w.begin_object();
  w.key("lower");
  write_spline(w, scene.borders.lower);
  w.key("upper");
  write_spline(w, scene.borders.upper);
  w.key("x_min");
  w.value(scene.borders.x_min);
  w.key("x_max");
  w.value(scene.borders.x_max);
  w.end_object();
  w.key("agents");
  w.begin_array();
  for (const auto& a : scene.agents) {
    w.begin_object();
    w.key("id");
    w.value(a.id);
    w.key("half_length");
    w.value(a.half_length);
    w.key("half_width");
    w.value(a.half_width);
    w.key("center_states");
    w.begin_array();
    for (const auto& p : a.center_states) {
      w.begin_array();
      w.value(p.x);
      w.value(p.y);
      w.value(p.heading);
      w.end_array();
    }
    w.end_array();
    w.end_object();
  }
  w.end_array();
  w.key("v_min");
  w.value(scene.v_min);
  w.key("v_max");
  w.value(scene.v_max);
  w.key("horizon_steps");
  w.value(scene.horizon_steps);
  w.key("dt");
  w.value(scene.dt);
  w.key("target_x");
  w.value(scene.target_x);
  w.end_object();
  return w.take();
}

Scene scene_from_json(const std::string& text) {
  const json j = json::parse(text);
  expect_schema(j, "pilot-scene-v1");
  Scene s;
  s.ego = read_ego(j.at("ego"));
  for (const auto& p : j.at("reference_path")) {
    s.reference_path.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  }
  const json& b = j.at("borders");
  s.borders.lower = read_spline(b.at("lower"));
  s.borders.upper = read_spline(b.at("upper"));
  s.borders.x_min = b.at("x_min").get<double>();
  s.borders.x_max = b.at("x_max").get<double>();
  for (const auto& ja : j.at("agents")) {
    AgentPrediction a;
    a.id = ja.at("id").get<int>();
    a.half_length = ja.at("half_length").get<double>();
    a.half_width = ja.at("half_width").get<double>();
    for (const auto& p : ja.at("center_states")) {
      a.center_states.push_back(
          {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
    }
    s.agents.push_back(std::move(a));
  }
  s.v_min = j.at("v_min").get<double>();
  s.v_max = j.at("v_max").get<double>();
  s.horizon_steps = j.at("horizon_steps").get<int>();
  s.dt = j.at("dt").get<double>();
  s.target_x = j.at("target_x").get<double>();
  clamp_ego_speed(s);
  return s;
}

void save_scene(const std::string& path, const Scene& scene) {
  write_text_file(path, scene_to_json(scene) + "\n");
}

Scene load_scene(const std::string& path) { return scene_from_json(read_text_file(path)); }

std::string trajectory_to_json(const Trajectory& traj) {
  JsonWriter w;
  w.begin_object();
  w.key("schema");
  w.value("pilot-traj-v1");
  w.key("dt");
  w.value(traj.dt);
  w.key("states");
  w.begin_array();
  for (const auto& s : traj.states) {
    w.begin_array();
    w.value(s.x);
    w.value(s.y);
    w.value(s.heading);
    w.value(s.speed);
    w.end_array();
  }
  w.end_array();
  w.key("controls");
  w.begin_array();
  for (const auto& u : traj.controls) {
    w.begin_array();
    w.value(u.accel);
    w.value(u.steer);
    w.end_array();
  }
  w.end_array();
  w.end_object();
  return w.take();
}

Trajectory trajectory_from_json(const std::string& text) {
  const json j = json::parse(text);
  expect_schema(j, "pilot-traj-v1");
  Trajectory t;
  t.dt = j.at("dt").get<double>();
  for (const auto& s : j.at("states")) {
    t.states.push_back({s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>(),
                        s.at(3).get<double>()});
  }
  for (const auto& u : j.at("controls")) {
    t.controls.push_back({u.at(0).get<double>(), u.at(1).get<double>()});
  }
  if (t.states.size() != t.controls.size() + 1) {
    throw std::runtime_error("trajectory: states length must be controls length + 1");
  }
  return t;
}

void save_trajectory(const std::string& path, const Trajectory& traj) {
  write_text_file(path, trajectory_to_json(traj) + "\n");
}

Trajectory load_trajectory(const std::string& path) {
  return trajectory_from_json(read_text_file(path));
}

}  // namespace pilot
