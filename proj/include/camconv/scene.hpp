#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "camconv/camera.hpp"
#include "camconv/depth_map.hpp"

namespace camconv::synth {

// World frame: y up, the room interior spans [0, room.x] x [0, room.y] x [0, room.z].
struct Box {
  Eigen::Vector3d lo;
  Eigen::Vector3d hi;
};

// Fixed real-world sizes give the images absolute scale cues.
struct CatalogEntry {
  std::string kind;
  double width;   // x extent, m
  double depth;   // z extent, m
  double height;  // y extent, m
  double texture_scale;  // checker cell size, m
};

const std::vector<CatalogEntry>& object_catalog();

struct SceneObject {
  std::string kind;
  Eigen::Vector3d center;
  Eigen::Vector3d size;
  Eigen::Vector3d albedo;
  double texture_scale = 0.25;

  Box box() const { return {center - size / 2.0, center + size / 2.0}; }
};

struct Scene {
  Eigen::Vector3d room;
  Eigen::Vector3d floor_albedo;
  Eigen::Vector3d wall_albedo;
  Eigen::Vector3d ceiling_albedo;
  double floor_texture = 0.5;
  double wall_texture = 1.0;
  std::vector<SceneObject> objects;
  // Direction the light travels, unit length.
  Eigen::Vector3d light;
  // Objects keep out of this vertical cylinder (x, z center and radius); cameras are placed inside it.
  Eigen::Vector2d free_center;
  double free_radius = 0.8;
  std::uint64_t seed = 0;
};

// Deterministic in seed: room extents U[3, 8] m per axis and 4 to 10 catalog objects.
Scene generate_scene(std::uint64_t seed);

// Camera-to-world rigid transform. Camera axes: x right, y down, z forward.
struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

CameraPose make_pose(const Eigen::Vector3d& position, double yaw, double pitch, double roll);
// Random pose inside the scene's free region, deterministic in seed.
CameraPose sample_pose(const Scene& scene, std::uint64_t seed);

enum class Provenance { Rendered, Derived };

struct Sample {
  GridF rgb;  // (h, w, 3) in [0, 1]
  DepthMap depth;
  CameraIntrinsics cam;
  CameraPose pose;
  std::uint64_t scene_seed = 0;
  Provenance provenance = Provenance::Rendered;
};

struct RayHit {
  double t;
  Eigen::Vector3d normal;
  Eigen::Vector3d albedo;
  double texture_scale;
};

// First surface hit by origin + t * dir for t > 0. Rays from inside the room always hit.
std::optional<RayHit> cast_ray(const Scene& scene, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir);

// Throws std::invalid_argument when the camera is outside the room or inside an object.
void check_pose(const Scene& scene, const CameraPose& pose);

// One ray per pixel through the pixel coordinate (camera module convention).
// Stores Z-depth; pixels outside the depth validity range are masked.
Sample render(const Scene& scene, const CameraIntrinsics& cam, const CameraPose& pose, const DepthRange& range = {});

struct CropWindow {
  int x0 = 0;
  int y0 = 0;
  int w = 1;
  int h = 1;
};

// Crops then resizes rgb and depth; intrinsics follow crop_intrinsics and
// resize_intrinsics. Target pixel (i, j) samples the cropped source at
// (i / rx, j / ry), the position the resized intrinsics predict. Depth is
// interpolated bilinearly over the taps with non-zero weight and masked when a
// tap is invalid, out of range or the taps differ by more than 10% relative.
Sample derive_view(const Sample& sample, const CropWindow& window, double rx, double ry);

// Distance from p to the nearest scene surface (room walls or object faces).
double distance_to_surfaces(const Scene& scene, const Eigen::Vector3d& p);

}  // namespace camconv::synth
