#include "camconv/gradcheck.hpp"

#include <functional>

#include "camconv/depth_geometry.hpp"
#include "camconv/losses.hpp"
#include "camconv/network.hpp"
#include "camconv/rng.hpp"
#include "camconv/scene.hpp"
#include "camconv/train.hpp"

namespace camconv {

namespace {

using ad::Tape;
using ad::Var;
using V = Var<double>;

GridD random_grid(Shape shape, std::uint64_t seed, double lo, double hi) {
  GridD g(std::move(shape));
  Rng rng(mix_seed({seed, 0x9c}));
  for (auto& v : g.values()) v = rng.uniform(lo, hi);
  return g;
}

Mask random_mask(std::size_t h, std::size_t w, std::uint64_t seed) {
  Mask m(h, w, true);
  Rng rng(mix_seed({seed, 0x3a}));
  for (std::size_t p = 0; p < m.bits.size(); ++p) m.bits[p] = rng.uniform() > 0.2;
  return m;
}

// Contracts an arbitrary output with fixed random weights so every element
// of the output receives a distinct upstream gradient.
V contract(V y, std::uint64_t seed) {
  const GridD w = random_grid(y.value().shape(), seed, -1.0, 1.0);
  return ad::sum_all(ad::mul(y, y.tape->constant(w)));
}

struct Case {
  std::string name;
  ad::LossBuilder build;
  std::vector<GridD> inputs;
};

std::vector<Case> primitive_cases() {
  std::vector<Case> cases;
  const Shape img{5, 6, 2};
  auto unary = [&](const std::string& name, std::function<V(V)> op, double lo, double hi) {
    cases.push_back({name, [op](Tape<double>&, const std::vector<V>& in) { return contract(op(in[0]), 11); },
                     {random_grid(img, 1, lo, hi)}});
  };
  for (int stride : {1, 2}) {
    for (auto pad : {ad::Padding::Same, ad::Padding::Valid}) {
      const std::string name = std::string("conv2d/s") + std::to_string(stride) + (pad == ad::Padding::Same ? "/same" : "/valid");
      cases.push_back({name,
                       [stride, pad](Tape<double>&, const std::vector<V>& in) {
                         return contract(ad::conv2d(in[0], in[1], std::optional<V>(in[2]), stride, pad), 12);
                       },
                       {random_grid({7, 6, 2}, 2, -1, 1), random_grid({3, 3, 2, 3}, 3, -1, 1), random_grid({3}, 4, -1, 1)}});
    }
  }
  cases.push_back({"concat_channels",
                   [](Tape<double>&, const std::vector<V>& in) { return contract(ad::concat_channels<double>({in[0], in[1]}), 13); },
                   {random_grid(img, 5, -1, 1), random_grid({5, 6, 3}, 6, -1, 1)}});
  cases.push_back({"resize_bilinear",
                   [](Tape<double>&, const std::vector<V>& in) { return contract(ad::resize_bilinear(in[0], 7, 4), 14); },
                   {random_grid(img, 7, -1, 1)}});
  cases.push_back({"upsample_bilinear_x2",
                   [](Tape<double>&, const std::vector<V>& in) { return contract(ad::upsample_bilinear_x2(in[0]), 15); },
                   {random_grid(img, 8, -1, 1)}});
  unary("relu", [](V x) { return ad::relu(x); }, -1, 1);
  unary("sigmoid", [](V x) { return ad::sigmoid(x); }, -3, 3);
  unary("softplus", [](V x) { return ad::softplus(x); }, -3, 3);
  unary("abs", [](V x) { return ad::abs(x); }, -1, 1);
  unary("square", [](V x) { return ad::square(x); }, -2, 2);
  unary("sqrt", [](V x) { return ad::sqrt(x); }, 0.2, 3);
  unary("exp", [](V x) { return ad::exp(x); }, -2, 2);
  unary("log", [](V x) { return ad::log(x); }, 0.2, 3);
  unary("mul_scalar", [](V x) { return ad::mul_scalar(x, 1.7); }, -1, 1);
  unary("add_scalar", [](V x) { return ad::square(ad::add_scalar(x, 0.3)); }, -1, 1);
  unary("normalize_channels", [](V x) { return ad::normalize_channels(x); }, -1, 1);
  auto binary = [&](const std::string& name, std::function<V(V, V)> op) {
    cases.push_back({name, [op](Tape<double>&, const std::vector<V>& in) { return contract(op(in[0], in[1]), 16); },
                     {random_grid(img, 9, -1, 1), random_grid(img, 10, -1, 1)}});
  };
  binary("add", [](V a, V b) { return ad::add(a, b); });
  binary("sub", [](V a, V b) { return ad::sub(a, b); });
  binary("mul", [](V a, V b) { return ad::mul(a, b); });
  cases.push_back({"sum_all", [](Tape<double>&, const std::vector<V>& in) { return ad::sum_all(ad::square(in[0])); },
                   {random_grid(img, 17, -1, 1)}});
  cases.push_back({"weighted_sum",
                   [](Tape<double>&, const std::vector<V>& in) {
                     return ad::weighted_sum<double>({ad::sum_all(ad::square(in[0])), ad::sum_all(ad::exp(in[1]))}, {0.7, -1.3});
                   },
                   {random_grid(img, 18, -1, 1), random_grid(img, 19, -1, 1)}});
  return cases;
}

std::vector<Case> loss_cases() {
  std::vector<Case> cases;
  const std::size_t h = 20, w = 24;
  const Mask mask = random_mask(h, w, 30);
  const GridD gt = random_grid({h, w, 1}, 31, 0.2, 2.0);
  const GridD pred = random_grid({h, w, 1}, 32, 0.2, 2.0);
  for (auto r : {Reduction::Sum, Reduction::Mean}) {
    const std::string suffix = r == Reduction::Sum ? "/sum" : "/mean";
    cases.push_back({"depth_loss" + suffix,
                     [=](Tape<double>&, const std::vector<V>& in) { return depth_loss(in[0], gt, mask, r); }, {pred}});
    cases.push_back({"gradient_loss" + suffix,
                     [=](Tape<double>&, const std::vector<V>& in) { return gradient_loss(in[0], gt, mask, r); }, {pred}});
    const GridD target = random_grid({h, w, 1}, 33, 0.05, 1.0);
    cases.push_back({"confidence_loss" + suffix,
                     [=](Tape<double>&, const std::vector<V>& in) { return confidence_loss(ad::sigmoid(in[0]), target, mask, r); },
                     {random_grid({h, w, 1}, 34, -2, 2)}});
    GridD ngt = random_grid({h, w, 3}, 35, -1, 1);
    for (std::size_t p = 0; p < h * w; ++p) {
      double n = 0;
      for (int k = 0; k < 3; ++k) n += ngt[p * 3 + k] * ngt[p * 3 + k];
      for (int k = 0; k < 3; ++k) ngt[p * 3 + k] /= std::sqrt(n);
    }
    cases.push_back({"normal_loss" + suffix,
                     [=](Tape<double>&, const std::vector<V>& in) {
                       return normal_loss(ad::normalize_channels(in[0]), ngt, mask, r);
                     },
                     {random_grid({h, w, 3}, 36, -1, 1)}});
  }
  cases.push_back({"eigen_scale_invariant_loss",
                   [=](Tape<double>&, const std::vector<V>& in) { return eigen_scale_invariant_loss(in[0], gt, mask); },
                   {pred}});
  cases.push_back({"total_loss",
                   [=](Tape<double>&, const std::vector<V>& in) {
                     const GridD conf = random_grid({h, w, 1}, 37, 0.05, 1.0);
                     ScaleLosses<double> s{depth_loss(in[0], gt, mask, Reduction::Mean),
                                           gradient_loss(in[0], gt, mask, Reduction::Mean),
                                           confidence_loss(ad::sigmoid(in[1]), conf, mask, Reduction::Mean), std::nullopt};
                     return total_loss<double>({s, s}, LossWeights{});
                   },
                   {pred, random_grid({h, w, 1}, 38, -2, 2)}});
  return cases;
}

synth::Sample network_sample() {
  const CameraIntrinsics cam = make_intrinsics(13.0, 8.0, 8.0, 16, 16);
  const synth::Scene scene = synth::generate_scene(404);
  return synth::render(scene, cam, synth::sample_pose(scene, 404));
}

Case network_case(const net::ModelParams& model, const synth::Sample& sample, const std::string& name) {
  const net::NetConfig config = model.config;
  const auto targets = net::build_targets(sample, config);
  const GridD rgb = sample.rgb.cast<double>();
  // Confidence targets are a stop-gradient function of the prediction: freeze
  // them at the unperturbed point.
  std::vector<GridD> conf;
  {
    Tape<double> tape;
    std::vector<V> vars;
    for (const auto& t : model.params.tensors) vars.push_back(tape.constant(t.cast<double>()));
    const auto out = net::forward(tape, config, vars, rgb, sample.cam);
    for (std::size_t l = 0; l < out.size(); ++l) conf.push_back(confidence_target(out[l].xi.value(), targets[l].xi.cast<double>()));
  }
  std::vector<GridD> inputs;
  for (const auto& t : model.params.tensors) inputs.push_back(t.cast<double>());
  return {name,
          [=](Tape<double>& tape, const std::vector<V>& params) {
            const auto out = net::forward(tape, config, params, rgb, sample.cam);
            return net::sample_loss(out, targets, LossWeights{}, &conf);
          },
          inputs};
}

}  // namespace

std::vector<GradSuiteEntry> run_gradient_suite(bool full) {
  std::vector<Case> cases = primitive_cases();
  for (auto& c : loss_cases()) cases.push_back(std::move(c));

  net::NetConfig config;
  config.levels = 2;
  config.base_channels = 4;
  config.use_camconvs = true;
  config.use_focal_norm = true;
  config.f_n = 12.0;
  config.seed = 5;
  const synth::Sample sample = network_sample();
  const net::ModelParams init = net::build(config);
  cases.push_back(network_case(init, sample, "network/init"));
  net::TrainConfig tc;
  tc.iterations = 10;
  tc.batch_size = 1;
  const net::ModelParams trained = net::train(tc, config, {sample}).model;
  cases.push_back(network_case(trained, sample, "network/step10"));

  std::vector<GradSuiteEntry> out;
  for (const auto& c : cases) {
    const std::size_t limit = full || c.name.rfind("network", 0) != 0 ? 0 : 24;
    const auto r = ad::check_gradients(c.build, c.inputs, 1e-5, 1e-7, limit);
    out.push_back({c.name, r, r.checked > 0 && r.max_rel_error < kGradTolerance});
  }
  return out;
}

}  // namespace camconv
