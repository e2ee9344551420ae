#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "pilot/problem.hpp"

namespace pilot {

// All on-disk formats are JSON with a "schema" version field. Floats are
// written with printf %.17g so that deserialization is a bit-exact round trip.

std::string format_double(double v);

// Minimal deterministic JSON emitter (compact, key order = call order).
class JsonWriter {
 public:
  void begin_object();
  void end_object();
  void begin_array();
  void end_array();
  void key(std::string_view k);
  void value(double v);
  void value(int v);
  void value(std::int64_t v);
  void value(std::uint64_t v);
  void value(std::string_view s);
  void value_bool(bool b);
  std::string take();

 private:
  void separate();

  std::string out_;
  bool need_comma_ = false;
};

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Schema "pilot-scene-v1".
std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);
void save_scene(const std::string& path, const Scene& scene);
Scene load_scene(const std::string& path);

// Schema "pilot-traj-v1".
std::string trajectory_to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const std::string& text);
void save_trajectory(const std::string& path, const Trajectory& traj);
Trajectory load_trajectory(const std::string& path);

// FNV-1a 64-bit, used for config hashes in run manifests.
std::uint64_t fnv1a64(std::string_view data);

}  // namespace pilot
