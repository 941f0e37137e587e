#include "camconv/train.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "camconv/dataset.hpp"
#include "camconv/rng.hpp"

namespace camconv::net {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(learning_rate > 0 && std::isfinite(learning_rate))) throw std::invalid_argument("TrainConfig: lr must be positive");
  if (iterations == 0) throw std::invalid_argument("TrainConfig: iterations must be positive");
  if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be positive");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw std::invalid_argument("TrainConfig: betas must lie in [0, 1)");
  if (!(epsilon > 0)) throw std::invalid_argument("TrainConfig: epsilon must be positive");
}

json train_config_to_json(const TrainConfig& c) {
  json datasets = json::array();
  for (const auto& d : c.datasets) datasets.push_back(d.string());
  return json{{"optimizer", "adam"},
              {"learning_rate", c.learning_rate},
              {"betas", {c.beta1, c.beta2}},
              {"epsilon", c.epsilon},
              {"iterations", c.iterations},
              {"batch_size", c.batch_size},
              {"weights", {c.weights.depth, c.weights.gradient, c.weights.confidence, c.weights.normal}},
              {"datasets", datasets},
              {"sensor_group", c.sensor_group},
              {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j) {
  try {
    TrainConfig c;
    if (j.value("optimizer", std::string("adam")) != "adam") throw std::invalid_argument("TrainConfig: only adam is supported");
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    if (j.contains("betas")) {
      c.beta1 = j.at("betas").at(0).get<double>();
      c.beta2 = j.at("betas").at(1).get<double>();
    }
    c.epsilon = j.value("epsilon", c.epsilon);
    c.iterations = j.value("iterations", c.iterations);
    c.batch_size = j.value("batch_size", c.batch_size);
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      c.weights = LossWeights{w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>(), w.at(3).get<double>()};
    }
    for (const auto& d : j.value("datasets", json::array())) c.datasets.emplace_back(d.get<std::string>());
    c.sensor_group = j.value("sensor_group", std::vector<std::string>{});
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed train config: ") + e.what());
  }
}

DivergenceError::DivergenceError(std::size_t s, double l)
    : std::runtime_error("training diverged at step " + std::to_string(s) + " (loss " + std::to_string(l) + ")"),
      step(s),
      loss(l) {}

std::string sensor_key(const CameraIntrinsics& cam) { return std::to_string(cam.w) + "x" + std::to_string(cam.h); }

BatchGradient batch_gradient(const ModelParams& model, const std::vector<const synth::Sample*>& batch,
                             const LossWeights& weights) {
  if (batch.empty()) throw std::invalid_argument("batch_gradient: empty batch");
  BatchGradient out;
  for (const auto& t : model.params.tensors) out.grads.emplace_back(t.shape(), 0.0f);
  const float inv = 1.0f / static_cast<float>(batch.size());
  for (const synth::Sample* s : batch) {
    ad::Tape<float> tape;
    std::vector<ad::Var<float>> vars;
    for (const auto& t : model.params.tensors) vars.push_back(tape.variable(t));
    const auto prediction = forward(tape, model.config, vars, s->rgb, s->cam);
    const auto loss = sample_loss(prediction, build_targets(*s, model.config), weights);
    tape.backward(loss);
    out.loss += static_cast<double>(loss.value()[0]) / static_cast<double>(batch.size());
    for (std::size_t n = 0; n < vars.size(); ++n) {
      const GridF& g = vars[n].grad();
      auto& acc = out.grads[n];
      for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i] * inv;
    }
  }
  return out;
}

TrainResult train(const TrainConfig& tc, const NetConfig& nc, const std::vector<synth::Sample>& samples) {
  tc.validate();
  nc.validate();
  if (samples.empty()) throw std::invalid_argument("train: no samples");
  std::map<std::string, std::vector<const synth::Sample*>> groups;
  for (const auto& s : samples) groups[sensor_key(s.cam)].push_back(&s);
  for (const auto& key : tc.sensor_group) {
    if (!groups.contains(key)) throw std::invalid_argument("train: sensor size " + key + " missing from the data");
  }
  std::vector<const std::vector<const synth::Sample*>*> order;
  for (const auto& [key, g] : groups) order.push_back(&g);

  TrainResult result{build(nc), {}};
  auto& params = result.model.params.tensors;
  std::vector<GridF> m, v;
  for (const auto& t : params) {
    m.emplace_back(t.shape(), 0.0f);
    v.emplace_back(t.shape(), 0.0f);
  }
  double b1t = 1, b2t = 1;
  for (std::size_t step = 0; step < tc.iterations; ++step) {
    const auto& group = *order[step % order.size()];
    Rng rng(mix_seed({tc.seed, step, 0xba7c}));
    std::vector<const synth::Sample*> batch;
    for (std::size_t b = 0; b < tc.batch_size; ++b) {
      batch.push_back(group[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(group.size()) - 1))]);
    }
    const BatchGradient g = batch_gradient(result.model, batch, tc.weights);
    if (!std::isfinite(g.loss)) throw DivergenceError(step, g.loss);
    result.loss_curve.push_back(g.loss);

    b1t *= tc.beta1;
    b2t *= tc.beta2;
    const double lr_t = tc.learning_rate * std::sqrt(1 - b2t) / (1 - b1t);
    for (std::size_t n = 0; n < params.size(); ++n) {
      for (std::size_t i = 0; i < params[n].size(); ++i) {
        const double gi = g.grads[n][i];
        const double mi = tc.beta1 * m[n][i] + (1 - tc.beta1) * gi;
        const double vi = tc.beta2 * v[n][i] + (1 - tc.beta2) * gi * gi;
        m[n][i] = static_cast<float>(mi);
        v[n][i] = static_cast<float>(vi);
        params[n][i] = static_cast<float>(params[n][i] - lr_t * mi / (std::sqrt(vi) + tc.epsilon));
      }
    }
  }
  return result;
}

TrainResult train(const TrainConfig& tc, const NetConfig& nc) {
  if (tc.datasets.empty()) throw std::invalid_argument("train: no datasets listed");
  std::vector<synth::Sample> samples;
  for (const auto& dir : tc.datasets) {
    auto ds = synth::load_dataset(dir);
    for (auto& s : ds.samples) samples.push_back(std::move(s));
  }
  return train(tc, nc, samples);
}

namespace {

constexpr char kMagic[4] = {'C', 'A', 'M', 'F'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("checkpoint truncated");
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

std::string get_string(std::istream& is, std::uint32_t limit) {
  const std::uint32_t n = get_u32(is);
  if (n > limit) throw std::runtime_error("checkpoint string length out of range");
  std::string s(n, '\0');
  if (!is.read(s.data(), n)) throw std::runtime_error("checkpoint truncated");
  return s;
}

}  // namespace

void save_checkpoint(const ModelParams& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  const std::string config = net_config_to_json(model.config).dump();
  put_u32(os, static_cast<std::uint32_t>(config.size()));
  os.write(config.data(), static_cast<std::streamsize>(config.size()));
  put_u32(os, static_cast<std::uint32_t>(model.params.tensors.size()));
  for (std::size_t n = 0; n < model.params.tensors.size(); ++n) {
    const auto& name = model.params.names[n];
    const auto& t = model.params.tensors[n];
    put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(os, static_cast<std::uint32_t>(t.shape().size()));
    for (auto d : t.shape()) put_u32(os, static_cast<std::uint32_t>(d));
    for (float f : t.values()) put_u32(os, std::bit_cast<std::uint32_t>(f));
  }
  if (!os) throw std::runtime_error("failed writing checkpoint " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("not a CAMF checkpoint: " + path.string());
  if (get_u32(is) != kVersion) throw std::runtime_error("unsupported checkpoint version");
  NetConfig config;
  try {
    config = net_config_from_json(json::parse(get_string(is, 1 << 20)));
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("checkpoint config: ") + e.what());
  }
  const auto layout = parameter_layout(config);
  const std::uint32_t count = get_u32(is);
  if (count != layout.size()) throw std::runtime_error("checkpoint tensor count does not match its config");
  ModelParams model{config, {}};
  for (std::uint32_t n = 0; n < count; ++n) {
    std::string name = get_string(is, 4096);
    const std::uint32_t ndim = get_u32(is);
    if (ndim > 8) throw std::runtime_error("checkpoint tensor rank out of range");
    Shape shape;
    for (std::uint32_t d = 0; d < ndim; ++d) shape.push_back(get_u32(is));
    if (name != layout[n].name || shape != layout[n].shape) {
      throw std::runtime_error("checkpoint tensor " + name + " does not match the layout");
    }
    GridF t(shape);
    for (auto& f : t.values()) f = std::bit_cast<float>(get_u32(is));
    model.params.names.push_back(std::move(name));
    model.params.tensors.push_back(std::move(t));
  }
  return model;
}

}  // namespace camconv::net
