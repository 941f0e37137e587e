#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "camconv/losses.hpp"
#include "camconv/network.hpp"
#include "camconv/scene.hpp"

namespace camconv::net {

struct TrainConfig {
  // Adam.
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t iterations = 100;
  std::size_t batch_size = 4;
  LossWeights weights;
  std::vector<std::filesystem::path> datasets;
  // Sensor sizes ("WxH") that must all be present in the training data. Empty
  // accepts whatever the datasets contain.
  std::vector<std::string> sensor_group;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t step, double loss);
  std::size_t step;
  double loss;
};

struct TrainResult {
  ModelParams model;
  // Mean batch loss per step.
  std::vector<double> loss_curve;
};

std::string sensor_key(const CameraIntrinsics& cam);

// One sensor size per step, cycling through the sizes present; every step
// updates the single shared parameter set. Throws DivergenceError on a
// non-finite loss.
TrainResult train(const TrainConfig& train_config, const NetConfig& net_config,
                  const std::vector<synth::Sample>& samples);
// Loads train_config.datasets and trains on their union.
TrainResult train(const TrainConfig& train_config, const NetConfig& net_config);

// Average gradient of the batch loss with respect to every parameter tensor,
// plus the mean loss.
struct BatchGradient {
  double loss = 0;
  std::vector<GridF> grads;
};
BatchGradient batch_gradient(const ModelParams& model, const std::vector<const synth::Sample*>& batch,
                             const LossWeights& weights);

void save_checkpoint(const ModelParams& model, const std::filesystem::path& path);
// Throws std::runtime_error on a malformed or truncated file.
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace camconv::net
