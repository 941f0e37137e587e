#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "camconv/autodiff.hpp"
#include "camconv/camera.hpp"
#include "camconv/depth_map.hpp"
#include "camconv/losses.hpp"
#include "camconv/scene.hpp"

namespace camconv::net {

// Encoder-decoder with stride-2 conv+relu encoder stages, bilinear x2 decoder,
// concatenating skip connections and prediction heads at every decoder level.
// With use_camconvs the six camera maps are concatenated to the bottleneck and
// to every skip connection ahead of a 3x3 conv; without, the same convs run on
// the features alone.
struct NetConfig {
  int levels = 3;
  int base_channels = 16;
  bool use_camconvs = true;
  bool use_focal_norm = false;
  double f_n = kDefaultNormalizedFocal;
  // One entry per decoder level, coarsest first: true = depth+confidence+normals,
  // false = depth+confidence. Empty selects normals on the coarsest level only.
  std::vector<bool> normals_heads;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument on levels < 2, non-positive channels or f_n, or
  // a head layout other than normals on the coarsest level only.
  void validate() const;
  std::vector<bool> heads() const;
  // Number of decoder levels (levels + 1).
  std::size_t decoder_levels() const { return static_cast<std::size_t>(levels) + 1; }
};

nlohmann::json net_config_to_json(const NetConfig& c);
NetConfig net_config_from_json(const nlohmann::json& j);

struct TensorSpec {
  std::string name;
  Shape shape;
  // Encoder tensors never change shape with use_camconvs.
  bool encoder = false;
};

// Every parameter tensor in a fixed order.
std::vector<TensorSpec> parameter_layout(const NetConfig& config);

template <typename T>
struct Params {
  std::vector<std::string> names;
  std::vector<Grid<T>> tensors;

  std::size_t count() const;
  const Grid<T>& get(const std::string& name) const;
  template <typename U>
  Params<U> cast() const {
    Params<U> out{names, {}};
    for (const auto& t : tensors) out.tensors.push_back(t.template cast<U>());
    return out;
  }
};

struct ModelParams {
  NetConfig config;
  Params<float> params;
};

// He-uniform kernels, zero biases, depth-head bias near typical indoor inverse depth.
ModelParams build(const NetConfig& config);

template <typename T>
struct LevelOutput {
  std::size_t h = 0;
  std::size_t w = 0;
  // Features entering the heads.
  ad::Var<T> features;
  // Raw inverse depth: normalized to f_n when use_focal_norm, metric otherwise.
  ad::Var<T> xi;
  ad::Var<T> confidence;
  std::optional<ad::Var<T>> normals;
};

// Decoder levels, coarsest first.
template <typename T>
using NetOutput = std::vector<LevelOutput<T>>;

// Channel stack as network input: cc divided by f_n, fov and nc unchanged.
template <typename T>
Grid<T> camera_channels(const CameraIntrinsics& cam, std::size_t h, std::size_t w, double f_n);

// rgb is (h, w, 3) in [0, 1] and must match the camera sensor; both extents
// must be divisible by 2^levels. Throws std::invalid_argument otherwise.
template <typename T>
NetOutput<T> forward(ad::Tape<T>& tape, const NetConfig& config, const std::vector<ad::Var<T>>& params,
                     const Grid<T>& rgb, const CameraIntrinsics& cam);

// Ground truth per decoder level, coarsest first, in the network's output space.
struct LevelTarget {
  GridF xi;
  Mask mask;
  std::optional<GridF> normals;
  Mask normals_mask;
};

std::vector<LevelTarget> build_targets(const synth::Sample& sample, const NetConfig& config);

// Per-level losses with Mean reduction, combined with total_loss. Levels without
// valid pixels contribute nothing; throws if no level has any. The confidence
// target is derived from the current prediction and held constant; passing
// confidence_targets (one per level) pins it, as a finite-difference check needs.
template <typename T>
ad::Var<T> sample_loss(const NetOutput<T>& out, const std::vector<LevelTarget>& targets, const LossWeights& weights,
                       const std::vector<Grid<T>>* confidence_targets = nullptr);

// Finest-level metric depth (denormalized when use_focal_norm), every pixel valid.
DepthMap predict_depth(const ModelParams& model, const synth::Sample& sample);

}  // namespace camconv::net
