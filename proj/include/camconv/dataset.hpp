#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "camconv/scene.hpp"

namespace camconv::synth {

// Camera distribution written in preset notation, tokens joined by '_' (or a
// middle dot): sensors, optional "U", focal presets. Examples: "s1_f72" (fixed),
// "s1_f72_f128" (two discrete focals), "s1_s2_U_f72_f128" (two sensors, focal
// uniform in [72, 128]). Focals may also be given as "f<number>".
struct CameraDistribution {
  std::vector<std::string> sensors;
  std::vector<double> focals;
  bool uniform = false;

  static CameraDistribution parse(const std::string& notation);
};

// Augmentation draws a uniform image scale and a principal-point shift (fraction
// of the sensor extent) per sample; the sample is rendered directly with the
// augmented intrinsics.
struct AugmentSpec {
  bool enabled = false;
  double scale_min = 0.7;
  double scale_max = 1.3;
  double shift = 0.15;
};

struct DatasetSpec {
  std::string name;
  std::string cameras;
  std::uint64_t first_scene = 0;
  std::size_t scene_count = 10;
  std::size_t views_per_scene = 1;
  // Applied uniformly to the preset intrinsics (0.25 turns s1 into 64x48).
  double resolution_scale = 1.0;
  std::uint64_t seed = 0;
  AugmentSpec augment;
  DepthRange range;
};

nlohmann::json dataset_spec_to_json(const DatasetSpec& spec);
// Throws std::invalid_argument on malformed specs.
DatasetSpec dataset_spec_from_json(const nlohmann::json& j);

// Intrinsics of view v in a dataset. Sensors cycle fastest, then discrete focals;
// uniform focals are drawn from the per-sample stream.
CameraIntrinsics dataset_camera(const DatasetSpec& spec, std::uint64_t scene_seed, std::size_t view);

// Renders every (scene, view) pair in memory. The pose of (scene, view) depends
// only on spec.seed, so datasets that share it show the same content through
// different cameras.
std::vector<Sample> generate_samples(const DatasetSpec& spec);

struct Dataset {
  DatasetSpec spec;
  std::vector<Sample> samples;
};

// Writes <dir>/manifest.json and one directory per sample holding rgb.ppm,
// depth.pfm, mask.pgm and cam.json. Rebuilding with an identical spec is a
// no-op; a concurrent build of the same directory fails on <dir>.lock.
void build_dataset(const DatasetSpec& spec, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace camconv::synth
