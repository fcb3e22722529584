#pragma once

#include <array>
#include <string>

#include <json.hpp>

#include "surgsynth/error.hpp"
#include "surgsynth/geometry.hpp"

namespace surgsynth::detail {

using Json = nlohmann::json;

inline Json parse_json(const std::string &text, const std::string &what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error &e) {
    throw Error(Errc::kParseError, what + ": " + e.what());
  }
}

template <std::size_t N>
std::array<double, N> read_reals(const Json &j, const std::string &path) {
  if (!j.is_array() || j.size() != N)
    throw Error(Errc::kSchemaError, path + ": expected " + std::to_string(N) + " numbers");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!j[i].is_number()) throw Error(Errc::kSchemaError, path + "/" + std::to_string(i) + ": not a number");
    out[i] = j[i].get<double>();
  }
  return out;
}

inline Vec3 read_vec3(const Json &j, const std::string &path) {
  const auto a = read_reals<3>(j, path);
  return {a[0], a[1], a[2]};
}

inline Json vec3_json(const Vec3 &v) { return Json::array({v.x(), v.y(), v.z()}); }

// Accepts a flat [R(9, row-major), t(3)] array, the nested form [[R], [t]], or
// an object {"R": [...], "t": [...]}.
inline Pose read_pose(const Json &j, const std::string &path) {
  std::array<double, 12> v{};
  if (j.is_object()) {
    if (!j.contains("R") || !j.contains("t")) throw Error(Errc::kSchemaError, path + ": pose needs R and t");
    const auto r = read_reals<9>(j["R"], path + "/R");
    const auto t = read_reals<3>(j["t"], path + "/t");
    std::copy(r.begin(), r.end(), v.begin());
    std::copy(t.begin(), t.end(), v.begin() + 9);
  } else if (j.is_array() && j.size() == 2) {
    const auto r = read_reals<9>(j[0], path + "/0");
    const auto t = read_reals<3>(j[1], path + "/1");
    std::copy(r.begin(), r.end(), v.begin());
    std::copy(t.begin(), t.end(), v.begin() + 9);
  } else {
    v = read_reals<12>(j, path);
  }
  Pose p = Pose::FromArray(v);
  if (!is_rotation(p.rotation, 1e-6)) throw Error(Errc::kSchemaError, path + ": rotation is not orthonormal");
  return p;
}

inline Json pose_json(const Pose &p) {
  Json out = Json::array();
  for (double d : p.to_array()) out.push_back(d);
  return out;
}

template <typename T>
T value_or(const Json &j, const char *key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception &e) {
    throw Error(Errc::kSchemaError, std::string(key) + ": " + e.what());
  }
}

}  // namespace surgsynth::detail
