#include "camconv/network.hpp"

#include <cmath>
#include <stdexcept>

#include "camconv/depth_geometry.hpp"
#include "camconv/maps.hpp"
#include "camconv/rng.hpp"

namespace camconv::net {

using nlohmann::json;

void NetConfig::validate() const {
  if (levels < 2) throw std::invalid_argument("NetConfig: levels must be >= 2");
  if (base_channels < 1) throw std::invalid_argument("NetConfig: base_channels must be positive");
  if (!(std::isfinite(f_n) && f_n > 0)) throw std::invalid_argument("NetConfig: f_n must be positive");
  const auto h = heads();
  if (h.size() != decoder_levels()) throw std::invalid_argument("NetConfig: one head entry per decoder level");
  if (!h.front()) throw std::invalid_argument("NetConfig: the coarsest level carries depth+confidence+normals");
  for (std::size_t l = 1; l < h.size(); ++l) {
    if (h[l]) throw std::invalid_argument("NetConfig: finer levels carry depth+confidence only");
  }
}

std::vector<bool> NetConfig::heads() const {
  if (!normals_heads.empty()) return normals_heads;
  std::vector<bool> h(decoder_levels(), false);
  h.front() = true;
  return h;
}

json net_config_to_json(const NetConfig& c) {
  json heads = json::array();
  for (bool b : c.heads()) heads.push_back(b ? "DCN" : "DC");
  return json{{"levels", c.levels},     {"base_channels", c.base_channels}, {"use_camconvs", c.use_camconvs},
              {"use_focal_norm", c.use_focal_norm}, {"f_n", c.f_n}, {"heads", heads}, {"seed", c.seed}};
}

NetConfig net_config_from_json(const json& j) {
  try {
    NetConfig c;
    c.levels = j.value("levels", c.levels);
    c.base_channels = j.value("base_channels", c.base_channels);
    c.use_camconvs = j.value("use_camconvs", c.use_camconvs);
    c.use_focal_norm = j.value("use_focal_norm", c.use_focal_norm);
    c.f_n = j.value("f_n", c.f_n);
    c.seed = j.value("seed", c.seed);
    if (j.contains("heads")) {
      for (const auto& h : j.at("heads")) {
        const auto s = h.get<std::string>();
        if (s != "DCN" && s != "DC") throw std::invalid_argument("NetConfig: head must be DCN or DC, got " + s);
        c.normals_heads.push_back(s == "DCN");
      }
    }
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed net config: ") + e.what());
  }
}

namespace {

std::size_t enc_channels(const NetConfig& c, int k) {
  return k == 0 ? 3 : static_cast<std::size_t>(c.base_channels) << (k - 1);
}

std::size_t dec_channels(const NetConfig& c, int k) {
  if (k == 0) return static_cast<std::size_t>(std::max(c.base_channels / 2, 4));
  return enc_channels(c, k);
}

std::string name(const std::string& prefix, int k, const std::string& suffix) {
  return prefix + std::to_string(k) + suffix;
}

Shape kernel(std::size_t cin, std::size_t cout) { return {3, 3, cin, cout}; }

}  // namespace

std::vector<TensorSpec> parameter_layout(const NetConfig& c) {
  c.validate();
  const int L = c.levels;
  const std::size_t extra = c.use_camconvs ? static_cast<std::size_t>(kNumMapChannels) : std::size_t{0};
  const auto heads = c.heads();
  std::vector<TensorSpec> t;
  for (int k = 1; k <= L; ++k) {
    t.push_back({name("enc", k, ".w"), kernel(enc_channels(c, k - 1), enc_channels(c, k)), true});
    t.push_back({name("enc", k, ".b"), {enc_channels(c, k)}, true});
  }
  auto add_heads = [&](int k) {
    const std::size_t d = dec_channels(c, k);
    t.push_back({name("head", k, ".xi.w"), kernel(d, 1)});
    t.push_back({name("head", k, ".xi.b"), {1}});
    t.push_back({name("head", k, ".conf.w"), kernel(d, 1)});
    t.push_back({name("head", k, ".conf.b"), {1}});
    if (heads[static_cast<std::size_t>(L - k)]) {
      t.push_back({name("head", k, ".normal.w"), kernel(d, 3)});
      t.push_back({name("head", k, ".normal.b"), {3}});
    }
  };
  t.push_back({"bottleneck.w", kernel(enc_channels(c, L) + extra, dec_channels(c, L))});
  t.push_back({"bottleneck.b", {dec_channels(c, L)}});
  add_heads(L);
  for (int k = L - 1; k >= 0; --k) {
    t.push_back({name("skip", k, ".w"), kernel(enc_channels(c, k) + extra, dec_channels(c, k))});
    t.push_back({name("skip", k, ".b"), {dec_channels(c, k)}});
    t.push_back({name("dec", k, ".w"), kernel(dec_channels(c, k + 1) + dec_channels(c, k), dec_channels(c, k))});
    t.push_back({name("dec", k, ".b"), {dec_channels(c, k)}});
    add_heads(k);
  }
  return t;
}

template <typename T>
std::size_t Params<T>::count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

template <typename T>
const Grid<T>& Params<T>::get(const std::string& n) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == n) return tensors[i];
  }
  throw std::out_of_range("no parameter tensor named " + n);
}

template struct Params<float>;
template struct Params<double>;

ModelParams build(const NetConfig& config) {
  ModelParams m{config, {}};
  const auto layout = parameter_layout(config);
  for (std::size_t n = 0; n < layout.size(); ++n) {
    const auto& spec = layout[n];
    GridF g(spec.shape);
    const bool is_kernel = spec.shape.size() == 4;
    const bool is_head = spec.name.rfind("head", 0) == 0;
    if (is_kernel) {
      const double fan_in = static_cast<double>(spec.shape[0] * spec.shape[1] * spec.shape[2]);
      const double bound = std::sqrt((is_head ? 1.0 : 6.0) / fan_in);
      Rng rng(mix_seed({config.seed, n, 0x1417}));
      for (auto& v : g.values()) v = static_cast<float>(rng.uniform(-bound, bound));
    } else if (spec.name.find(".xi.b") != std::string::npos) {
      // softplus(-1) ~ 0.31 1/m, a typical indoor inverse depth.
      g.fill(-1.0f);
    }
    m.params.names.push_back(spec.name);
    m.params.tensors.push_back(std::move(g));
  }
  return m;
}

template <typename T>
Grid<T> camera_channels(const CameraIntrinsics& cam, std::size_t h, std::size_t w, double f_n) {
  const ChannelStack stack = make_stack(cam, h, w);
  Grid<T> out(h, w, kNumMapChannels);
  for (std::size_t p = 0; p < h * w; ++p) {
    for (std::size_t k = 0; k < kNumMapChannels; ++k) {
      double v = stack.channels[p * kNumMapChannels + k];
      if (k == kCcX || k == kCcY) v /= f_n;
      out[p * kNumMapChannels + k] = static_cast<T>(v);
    }
  }
  return out;
}

template <typename T>
NetOutput<T> forward(ad::Tape<T>& tape, const NetConfig& c, const std::vector<ad::Var<T>>& params,
                     const Grid<T>& rgb, const CameraIntrinsics& cam) {
  const auto layout = parameter_layout(c);
  if (params.size() != layout.size()) throw std::invalid_argument("forward: parameter count does not match config");
  for (std::size_t n = 0; n < layout.size(); ++n) {
    require_shape(params[n].value().shape() == layout[n].shape,
                  layout[n].name + " " + shape_string(params[n].value().shape()) + " vs " +
                      shape_string(layout[n].shape));
  }
  require_shape(rgb.rank() == 3 && rgb.c() == 3, "forward expects an (h, w, 3) image, got " + shape_string(rgb.shape()));
  if (rgb.h() != static_cast<std::size_t>(cam.h) || rgb.w() != static_cast<std::size_t>(cam.w)) {
    throw std::invalid_argument("forward: image " + shape_string(rgb.shape()) + " does not match the camera sensor " +
                                std::to_string(cam.w) + "x" + std::to_string(cam.h));
  }
  const int L = c.levels;
  const std::size_t div = std::size_t{1} << L;
  if (rgb.h() % div || rgb.w() % div) {
    throw std::invalid_argument("forward: sensor " + std::to_string(cam.w) + "x" + std::to_string(cam.h) +
                                " is not divisible by " + std::to_string(div));
  }

  std::size_t next = 0;
  auto param = [&]() { return params[next++]; };
  auto conv = [&](ad::Var<T> x, int stride) {
    auto w = param();
    auto b = param();
    return ad::conv2d(x, w, std::optional<ad::Var<T>>(b), stride, ad::Padding::Same);
  };
  const auto heads = c.heads();
  NetOutput<T> out;
  auto emit = [&](int k, ad::Var<T> features) {
    LevelOutput<T> lo;
    lo.h = features.value().h();
    lo.w = features.value().w();
    lo.features = features;
    lo.xi = ad::add_scalar(ad::softplus(conv(features, 1)), T(1e-4));
    lo.confidence = ad::sigmoid(conv(features, 1));
    if (heads[static_cast<std::size_t>(L - k)]) lo.normals = ad::normalize_channels(conv(features, 1));
    out.push_back(lo);
  };
  auto with_maps = [&](ad::Var<T> x) {
    if (!c.use_camconvs) return x;
    const auto maps = tape.constant(camera_channels<T>(cam, x.value().h(), x.value().w(), c.f_n));
    return ad::concat_channels<T>({x, maps});
  };

  Grid<T> input(rgb.shape());
  for (std::size_t p = 0; p < rgb.size(); ++p) input[p] = T(2) * rgb[p] - T(1);
  std::vector<ad::Var<T>> enc{tape.constant(std::move(input))};
  for (int k = 1; k <= L; ++k) enc.push_back(ad::relu(conv(enc.back(), 2)));

  ad::Var<T> dec = ad::relu(conv(with_maps(enc[static_cast<std::size_t>(L)]), 1));
  emit(L, dec);
  for (int k = L - 1; k >= 0; --k) {
    const auto skip = ad::relu(conv(with_maps(enc[static_cast<std::size_t>(k)]), 1));
    const auto up = ad::upsample_bilinear_x2(dec);
    dec = ad::relu(conv(ad::concat_channels<T>({up, skip}), 1));
    emit(k, dec);
  }
  return out;
}

std::vector<LevelTarget> build_targets(const synth::Sample& sample, const NetConfig& c) {
  const InverseDepthMap metric = to_inverse(sample.depth);
  const InverseDepthMap space =
      c.use_focal_norm ? normalize_inverse_depth(metric, FocalNormalization{c.f_n}) : metric;
  const auto heads = c.heads();
  std::vector<LevelTarget> targets;
  for (int k = c.levels; k >= 0; --k) {
    const int factor = 1 << k;
    LevelTarget t;
    const InverseDepthMap pooled = pool_inverse_depth(space, factor);
    t.xi = pooled.values;
    t.mask = pooled.mask;
    if (heads[static_cast<std::size_t>(c.levels - k)]) {
      InverseDepthMap pooled_metric = pool_inverse_depth(metric, factor);
      t.normals_mask = Mask(pooled.mask.h, pooled.mask.w, false);
      t.normals = GridF(pooled.mask.h, pooled.mask.w, 3);
      if (pooled_metric.mask.count() > 0) {
        const NormalMap n = normals_from_depth(to_depth(pooled_metric));
        t.normals = n.values;
        t.normals_mask = n.mask;
      }
    }
    targets.push_back(std::move(t));
  }
  return targets;
}

template <typename T>
ad::Var<T> sample_loss(const NetOutput<T>& out, const std::vector<LevelTarget>& targets, const LossWeights& weights,
                       const std::vector<Grid<T>>* confidence_targets) {
  if (out.size() != targets.size()) throw std::invalid_argument("sample_loss: level count mismatch");
  if (confidence_targets && confidence_targets->size() != out.size()) {
    throw std::invalid_argument("sample_loss: one confidence target per level");
  }
  std::vector<ScaleLosses<T>> scales;
  for (std::size_t l = 0; l < out.size(); ++l) {
    const auto& o = out[l];
    const auto& t = targets[l];
    if (t.mask.count() == 0) continue;
    const Grid<T> gt = t.xi.template cast<T>();
    const Grid<T> conf_target = confidence_targets ? (*confidence_targets)[l] : confidence_target(o.xi.value(), gt);
    ScaleLosses<T> s{depth_loss(o.xi, gt, t.mask, Reduction::Mean), {},
                     confidence_loss(o.confidence, conf_target, t.mask, Reduction::Mean), std::nullopt};
    try {
      s.gradient = gradient_loss(o.xi, gt, t.mask, Reduction::Mean);
    } catch (const std::invalid_argument&) {
      // No valid neighbor pair at this level: the term is zero.
      s.gradient = ad::mul_scalar(s.depth, T(0));
    }
    if (o.normals && t.normals && t.normals_mask.count() > 0) {
      s.normal = normal_loss(*o.normals, t.normals->template cast<T>(), t.normals_mask, Reduction::Mean);
    }
    scales.push_back(s);
  }
  if (scales.empty()) throw std::invalid_argument("sample_loss: no valid ground truth at any level");
  return total_loss(scales, weights);
}

DepthMap predict_depth(const ModelParams& model, const synth::Sample& sample) {
  ad::Tape<float> tape;
  std::vector<ad::Var<float>> vars;
  for (const auto& t : model.params.tensors) vars.push_back(tape.constant(t));
  const auto out = forward(tape, model.config, vars, sample.rgb, sample.cam);
  const GridF& xi = out.back().xi.value();
  const double factor =
      model.config.use_focal_norm ? focal_normalization_factor(sample.cam, FocalNormalization{model.config.f_n}) : 1.0;
  DepthMap d{GridF(xi.shape()), Mask(xi.h(), xi.w(), true), sample.cam};
  for (std::size_t p = 0; p < xi.size(); ++p) {
    d.values[p] = static_cast<float>(factor / static_cast<double>(xi[p]));
  }
  return d;
}

template GridF camera_channels(const CameraIntrinsics&, std::size_t, std::size_t, double);
template GridD camera_channels(const CameraIntrinsics&, std::size_t, std::size_t, double);
template NetOutput<float> forward(ad::Tape<float>&, const NetConfig&, const std::vector<ad::Var<float>>&,
                                  const GridF&, const CameraIntrinsics&);
template NetOutput<double> forward(ad::Tape<double>&, const NetConfig&, const std::vector<ad::Var<double>>&,
                                   const GridD&, const CameraIntrinsics&);
template ad::Var<float> sample_loss(const NetOutput<float>&, const std::vector<LevelTarget>&, const LossWeights&,
                                    const std::vector<GridF>*);
template ad::Var<double> sample_loss(const NetOutput<double>&, const std::vector<LevelTarget>&, const LossWeights&,
                                     const std::vector<GridD>*);

}  // namespace camconv::net
