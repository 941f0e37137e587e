#include "camconv/camera.hpp"

#include <cmath>
#include <stdexcept>

namespace camconv {

namespace {

void check(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("invalid intrinsics: ") + what);
}

std::string normalize_name(std::string name) {
  // U+00B7 middle dot is two bytes in UTF-8.
  const std::string dot = "\xc2\xb7";
  for (auto pos = name.find(dot); pos != std::string::npos; pos = name.find(dot)) {
    name.replace(pos, dot.size(), "_");
  }
  return name;
}

}  // namespace

CameraIntrinsics make_intrinsics(double f, double cx, double cy, int w, int h) {
  check(std::isfinite(f) && f > 0.0, "focal length must be positive");
  check(std::isfinite(cx) && std::isfinite(cy), "principal point must be finite");
  check(w >= 1 && h >= 1, "sensor size must be at least 1x1");
  return CameraIntrinsics{f, cx, cy, w, h};
}

CameraIntrinsics crop_intrinsics(const CameraIntrinsics& cam, double x0, double y0, int w, int h) {
  check(w >= 1 && h >= 1, "crop size must be at least 1x1");
  return make_intrinsics(cam.f, cam.cx - x0, cam.cy - y0, w, h);
}

ResizedIntrinsics resize_intrinsics(const CameraIntrinsics& cam, double rx, double ry) {
  check(std::isfinite(rx) && std::isfinite(ry) && rx > 0.0 && ry > 0.0, "resize factors must be positive");
  const long w = std::lround(cam.w * rx);
  const long h = std::lround(cam.h * ry);
  check(w >= 1 && h >= 1, "resized sensor has zero extent");
  ResizedIntrinsics out;
  out.approximate = rx != ry;
  out.f_avg = rx == ry ? cam.f * rx : cam.f * (rx + ry) / 2.0;
  out.cam = make_intrinsics(out.f_avg, cam.cx * rx, cam.cy * ry, static_cast<int>(w), static_cast<int>(h));
  return out;
}

Eigen::Vector3d backproject(const CameraIntrinsics& cam, double i, double j, double d) {
  return {(i - cam.cx) * d / cam.f, (j - cam.cy) * d / cam.f, d};
}

Eigen::Vector2d project(const CameraIntrinsics& cam, const Eigen::Vector3d& p) {
  return {cam.f * p.x() / p.z() + cam.cx, cam.f * p.y() / p.z() + cam.cy};
}

double horizontal_fov(const CameraIntrinsics& cam) {
  return std::atan((cam.w - 1 - cam.cx) / cam.f) + std::atan(cam.cx / cam.f);
}

double vertical_fov(const CameraIntrinsics& cam) {
  return std::atan((cam.h - 1 - cam.cy) / cam.f) + std::atan(cam.cy / cam.f);
}

const std::vector<SensorPreset>& sensor_presets() {
  static const std::vector<SensorPreset> table = {
      {"s1", 256, 192}, {"s2", 192, 256}, {"s3", 224, 224}, {"s4", 128, 96},
      {"s5", 320, 320}, {"sS", 256, 192}, {"sK", 384, 128},
  };
  return table;
}

const std::vector<FocalPreset>& focal_presets() {
  static const std::vector<FocalPreset> table = {
      {"f72", 72.0}, {"f128", 128.0}, {"f64", 64.0}, {"fn", kDefaultNormalizedFocal},
  };
  return table;
}

const SensorPreset& sensor_preset(const std::string& name) {
  for (const auto& s : sensor_presets()) {
    if (s.name == name) return s;
  }
  throw std::invalid_argument("unknown sensor preset: " + name);
}

const FocalPreset& focal_preset(const std::string& name) {
  for (const auto& f : focal_presets()) {
    if (f.name == name) return f;
  }
  throw std::invalid_argument("unknown focal preset: " + name);
}

CameraIntrinsics preset_camera(const std::string& sensor, double f) {
  const auto& s = sensor_preset(sensor);
  return make_intrinsics(f, s.w / 2.0, s.h / 2.0, s.w, s.h);
}

const std::vector<CameraPreset>& preset_table() {
  static const std::vector<CameraPreset> table = [] {
    std::vector<CameraPreset> t;
    for (const auto& s : sensor_presets()) {
      for (const auto& f : focal_presets()) {
        t.push_back({s.name + "_" + f.name, preset_camera(s.name, f.f)});
      }
    }
    return t;
  }();
  return table;
}

CameraPreset camera_preset(const std::string& name) {
  const std::string key = normalize_name(name);
  for (const auto& p : preset_table()) {
    if (p.name == key) return p;
  }
  throw std::invalid_argument("unknown camera preset: " + name);
}

nlohmann::json intrinsics_to_json(const CameraIntrinsics& cam, std::optional<double> focal_normalized_to) {
  nlohmann::json j;
  j["f"] = cam.f;
  j["cx"] = cam.cx;
  j["cy"] = cam.cy;
  j["w"] = cam.w;
  j["h"] = cam.h;
  j["focal_normalized_to"] = focal_normalized_to ? nlohmann::json(*focal_normalized_to) : nlohmann::json(nullptr);
  return j;
}

CameraSidecar intrinsics_from_json(const nlohmann::json& j) {
  try {
    CameraSidecar out;
    out.cam = make_intrinsics(j.at("f").get<double>(), j.at("cx").get<double>(), j.at("cy").get<double>(),
                              j.at("w").get<int>(), j.at("h").get<int>());
    if (j.contains("focal_normalized_to") && !j.at("focal_normalized_to").is_null()) {
      out.focal_normalized_to = j.at("focal_normalized_to").get<double>();
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed intrinsics json: ") + e.what());
  }
}

}  // namespace camconv
