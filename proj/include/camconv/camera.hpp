#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace camconv {

// Pinhole intrinsics with a single isotropic focal length, all in pixels.
//
// Pixel convention: integer pixel index p sits at continuous image coordinate
// p (no half-pixel center offset). The principal point, crop offsets and the
// centered-coordinate maps all use this convention.
struct CameraIntrinsics {
  double f = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int w = 1;
  int h = 1;

  bool operator==(const CameraIntrinsics&) const = default;
};

// Throws std::invalid_argument unless f > 0, w >= 1, h >= 1 and every value is finite.
CameraIntrinsics make_intrinsics(double f, double cx, double cy, int w, int h);

// Moves the origin to (x0, y0) and sets the sensor to (w, h). Focal length is unchanged.
CameraIntrinsics crop_intrinsics(const CameraIntrinsics& cam, double x0, double y0, int w, int h);

struct ResizedIntrinsics {
  CameraIntrinsics cam;
  // Average focal f * (rx + ry) / 2; equals cam.f.
  double f_avg = 0.0;
  // True when rx != ry: the true camera is anisotropic and cam only approximates it.
  bool approximate = false;
};

// Sensor sizes are rounded half away from zero; a resulting zero extent throws.
ResizedIntrinsics resize_intrinsics(const CameraIntrinsics& cam, double rx, double ry);

// Camera frame: x right, y down, z forward. d is Z-depth in meters.
Eigen::Vector3d backproject(const CameraIntrinsics& cam, double i, double j, double d);
// Inverse of backproject; returns (i, j). Requires p.z() > 0.
Eigen::Vector2d project(const CameraIntrinsics& cam, const Eigen::Vector3d& p);

// Horizontal / vertical field of view spanned by the sensor, in radians.
double horizontal_fov(const CameraIntrinsics& cam);
double vertical_fov(const CameraIntrinsics& cam);

struct CameraPreset {
  std::string name;
  CameraIntrinsics intrinsics;
};

struct SensorPreset {
  std::string name;
  int w;
  int h;
};

struct FocalPreset {
  std::string name;
  double f;
};

const std::vector<SensorPreset>& sensor_presets();
const std::vector<FocalPreset>& focal_presets();

// Every sensor x focal combination, named "<sensor>_<focal>" (e.g. "s1_f72"),
// with the principal point at the sensor center.
const std::vector<CameraPreset>& preset_table();

const SensorPreset& sensor_preset(const std::string& name);
const FocalPreset& focal_preset(const std::string& name);
CameraIntrinsics preset_camera(const std::string& sensor, double f);
// Looks up "s1_f72" style names; "s1·f72" is accepted as well.
CameraPreset camera_preset(const std::string& name);

// Default focal length 100 px.
inline constexpr double kDefaultNormalizedFocal = 100.0;

// Sidecar JSON: {"f","cx","cy","w","h","focal_normalized_to": float|null}.
nlohmann::json intrinsics_to_json(const CameraIntrinsics& cam,
                                  std::optional<double> focal_normalized_to = std::nullopt);
struct CameraSidecar {
  CameraIntrinsics cam;
  std::optional<double> focal_normalized_to;
};
CameraSidecar intrinsics_from_json(const nlohmann::json& j);

}  // namespace camconv
