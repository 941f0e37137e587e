#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "camconv/train.hpp"

using namespace camconv;
using namespace camconv::net;
namespace fs = std::filesystem;

namespace {

NetConfig tiny_net() {
  NetConfig c;
  c.levels = 2;
  c.base_channels = 4;
  c.use_camconvs = true;
  c.use_focal_norm = true;
  c.f_n = 25;
  c.seed = 3;
  return c;
}

std::vector<synth::Sample> samples(const CameraIntrinsics& cam, std::uint64_t first, std::size_t n) {
  std::vector<synth::Sample> out;
  for (std::uint64_t s = first; s < first + n; ++s) {
    const auto scene = synth::generate_scene(s);
    out.push_back(synth::render(scene, cam, synth::sample_pose(scene, s)));
  }
  return out;
}

const CameraIntrinsics kCamA = make_intrinsics(30, 16, 12, 32, 24);
const CameraIntrinsics kCamB = make_intrinsics(20, 8, 8, 16, 16);

}  // namespace

TEST(TrainConfig, JsonRoundTripAndValidation) {
  TrainConfig c;
  c.learning_rate = 5e-4;
  c.iterations = 12;
  c.batch_size = 3;
  c.weights.normal = 7;
  c.datasets = {"a", "b"};
  c.sensor_group = {"64x48"};
  c.seed = 9;
  const auto j = train_config_to_json(c);
  EXPECT_EQ(j.at("optimizer"), "adam");
  EXPECT_EQ(train_config_to_json(train_config_from_json(j)), j);

  auto bad = j;
  bad["optimizer"] = "sgd";
  EXPECT_THROW(train_config_from_json(bad), std::invalid_argument);
  bad = j;
  bad["learning_rate"] = 0;
  EXPECT_THROW(train_config_from_json(bad), std::invalid_argument);
  bad = j;
  bad["betas"] = {0.9, 1.0};
  EXPECT_THROW(train_config_from_json(bad), std::invalid_argument);
  bad = j;
  bad["batch_size"] = 0;
  EXPECT_THROW(train_config_from_json(bad), std::invalid_argument);
}

TEST(Train, LossDecreases) {
  TrainConfig tc;
  tc.iterations = 50;
  tc.batch_size = 2;
  tc.learning_rate = 2e-3;
  const auto r = train(tc, tiny_net(), samples(kCamA, 0, 5));
  ASSERT_EQ(r.loss_curve.size(), 50u);
  double head = 0, tail = 0;
  for (std::size_t k = 0; k < 5; ++k) {
    head += r.loss_curve[k];
    tail += r.loss_curve[45 + k];
  }
  EXPECT_LT(tail, head);
}

TEST(Train, Deterministic) {
  TrainConfig tc;
  tc.iterations = 5;
  tc.batch_size = 2;
  const auto data = samples(kCamA, 0, 4);
  const auto a = train(tc, tiny_net(), data), b = train(tc, tiny_net(), data);
  EXPECT_EQ(a.model.params.tensors, b.model.params.tensors);
  EXPECT_EQ(a.loss_curve, b.loss_curve);
}

TEST(Train, FirstStepIsBiasCorrectedAdam) {
  TrainConfig tc;
  tc.iterations = 1;
  tc.batch_size = 1;
  tc.learning_rate = 1e-3;
  const auto data = samples(kCamA, 0, 1);
  const ModelParams init = build(tiny_net());
  const auto g = batch_gradient(init, {&data[0]}, tc.weights);
  const auto r = train(tc, tiny_net(), data);
  for (std::size_t n = 0; n < init.params.tensors.size(); ++n) {
    for (std::size_t i = 0; i < init.params.tensors[n].size(); ++i) {
      const double gi = g.grads[n][i];
      const double m_hat = gi, v_hat = gi * gi;  // bias correction undoes the (1 - beta) factors
      const double expect = init.params.tensors[n][i] - 1e-3 * m_hat / (std::sqrt(v_hat) + 1e-8 / std::sqrt(1 - 0.999));
      EXPECT_NEAR(r.model.params.tensors[n][i], expect, 1e-6) << n << " " << i;
    }
  }
}

TEST(Train, SensorGroupsShareOneParameterSet) {
  // Keys sort as "16x16" < "32x24": step 0 draws from kCamB, step 1 from kCamA.
  auto mixed = samples(kCamA, 0, 3);
  for (auto& s : samples(kCamB, 10, 3)) mixed.push_back(s);
  const auto only_b = samples(kCamB, 10, 3);
  TrainConfig tc;
  tc.batch_size = 2;
  tc.iterations = 1;
  EXPECT_EQ(train(tc, tiny_net(), mixed).model.params.tensors, train(tc, tiny_net(), only_b).model.params.tensors);
  tc.iterations = 2;
  const auto both = train(tc, tiny_net(), mixed);
  EXPECT_NE(both.model.params.tensors, train(tc, tiny_net(), only_b).model.params.tensors);
  // the one model runs on both sensors
  EXPECT_EQ(predict_depth(both.model, mixed.front()).values.shape(), (Shape{24, 32, 1}));
  EXPECT_EQ(predict_depth(both.model, mixed.back()).values.shape(), (Shape{16, 16, 1}));
}

TEST(Train, MissingSensorGroupIsAnError) {
  TrainConfig tc;
  tc.iterations = 1;
  tc.sensor_group = {"32x24", "64x48"};
  EXPECT_THROW(train(tc, tiny_net(), samples(kCamA, 0, 2)), std::invalid_argument);
  tc.sensor_group = {"32x24"};
  EXPECT_NO_THROW(train(tc, tiny_net(), samples(kCamA, 0, 2)));
  EXPECT_THROW(train(tc, tiny_net(), {}), std::invalid_argument);
}

TEST(Train, DivergenceIsReported) {
  const auto data = samples(kCamA, 0, 1);
  TrainConfig tc;
  tc.iterations = 5;
  tc.batch_size = 1;
  tc.learning_rate = 1e30;
  try {
    train(tc, tiny_net(), data);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GE(e.step, 1u);
    EXPECT_FALSE(std::isfinite(e.loss));
  }
}

TEST(Checkpoint, RoundTrip) {
  TrainConfig tc;
  tc.iterations = 2;
  const auto r = train(tc, tiny_net(), samples(kCamA, 0, 2));
  const fs::path p = fs::temp_directory_path() / "camconv_test_ckpt.bin";
  save_checkpoint(r.model, p);
  const ModelParams back = load_checkpoint(p);
  EXPECT_EQ(back.params.names, r.model.params.names);
  EXPECT_EQ(back.params.tensors, r.model.params.tensors);
  EXPECT_EQ(net_config_to_json(back.config), net_config_to_json(r.model.config));
  const auto s = samples(kCamA, 50, 1)[0];
  EXPECT_EQ(predict_depth(back, s).values, predict_depth(r.model, s).values);
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  const fs::path p = fs::temp_directory_path() / "camconv_test_ckpt_bad.bin";
  save_checkpoint(build(tiny_net()), p);
  std::string bytes;
  {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    bytes = ss.str();
  }
  auto write = [&](const std::string& b) { std::ofstream(p, std::ios::binary | std::ios::trunc) << b; };

  write(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(load_checkpoint(p), std::runtime_error);
  std::string magic = bytes;
  magic[0] = 'X';
  write(magic);
  EXPECT_THROW(load_checkpoint(p), std::runtime_error);
  std::string version = bytes;
  version[4] = 2;
  write(version);
  EXPECT_THROW(load_checkpoint(p), std::runtime_error);
  // a checkpoint whose config disagrees with its tensors
  NetConfig other = tiny_net();
  other.use_camconvs = false;
  save_checkpoint({other, build(tiny_net()).params}, p);
  EXPECT_THROW(load_checkpoint(p), std::runtime_error);
  EXPECT_THROW(load_checkpoint(fs::temp_directory_path() / "camconv_no_such_ckpt"), std::runtime_error);
}
