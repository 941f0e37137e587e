#include "camconv/dataset.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "camconv/depth_geometry.hpp"
#include "camconv/image_io.hpp"
#include "camconv/rng.hpp"

namespace camconv::synth {

namespace fs = std::filesystem;
using nlohmann::json;

CameraDistribution CameraDistribution::parse(const std::string& notation) {
  std::string s = notation;
  const std::string dot = "\xc2\xb7";
  for (auto pos = s.find(dot); pos != std::string::npos; pos = s.find(dot)) s.replace(pos, dot.size(), "_");
  CameraDistribution d;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, '_')) {
    if (tok.empty()) continue;
    if (tok == "U") {
      d.uniform = true;
    } else if (tok[0] == 's') {
      sensor_preset(tok);
      d.sensors.push_back(tok);
    } else if (tok[0] == 'f') {
      try {
        d.focals.push_back(focal_preset(tok).f);
      } catch (const std::invalid_argument&) {
        std::size_t used = 0;
        double f = 0;
        try {
          f = std::stod(tok.substr(1), &used);
        } catch (const std::exception&) {
        }
        if (used + 1 != tok.size() || !(f > 0)) throw std::invalid_argument("bad focal token: " + tok);
        d.focals.push_back(f);
      }
    } else {
      throw std::invalid_argument("bad camera token '" + tok + "' in " + notation);
    }
  }
  if (d.sensors.empty() || d.focals.empty()) {
    throw std::invalid_argument("camera notation needs a sensor and a focal: " + notation);
  }
  if (d.uniform && d.focals.size() != 2) throw std::invalid_argument("uniform focal needs exactly two bounds: " + notation);
  return d;
}

json dataset_spec_to_json(const DatasetSpec& s) {
  return json{{"name", s.name},
              {"cameras", s.cameras},
              {"scene_seeds", {{"first", s.first_scene}, {"count", s.scene_count}}},
              {"views_per_scene", s.views_per_scene},
              {"resolution_scale", s.resolution_scale},
              {"seed", s.seed},
              {"augment",
               {{"enabled", s.augment.enabled},
                {"scale", {s.augment.scale_min, s.augment.scale_max}},
                {"shift", s.augment.shift}}},
              {"depth_range", {s.range.d_min, s.range.d_max}}};
}

DatasetSpec dataset_spec_from_json(const json& j) {
  try {
    DatasetSpec s;
    s.name = j.value("name", std::string());
    s.cameras = j.at("cameras").get<std::string>();
    if (j.contains("scene_seeds")) {
      s.first_scene = j.at("scene_seeds").value("first", std::uint64_t{0});
      s.scene_count = j.at("scene_seeds").at("count").get<std::size_t>();
    }
    s.views_per_scene = j.value("views_per_scene", std::size_t{1});
    s.resolution_scale = j.value("resolution_scale", 1.0);
    s.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("augment")) {
      const auto& a = j.at("augment");
      s.augment.enabled = a.value("enabled", false);
      if (a.contains("scale")) {
        s.augment.scale_min = a.at("scale").at(0).get<double>();
        s.augment.scale_max = a.at("scale").at(1).get<double>();
      }
      s.augment.shift = a.value("shift", s.augment.shift);
    }
    if (j.contains("depth_range")) {
      s.range.d_min = j.at("depth_range").at(0).get<double>();
      s.range.d_max = j.at("depth_range").at(1).get<double>();
    }
    CameraDistribution::parse(s.cameras);
    if (s.scene_count == 0 || s.views_per_scene == 0) throw std::invalid_argument("dataset spec has no samples");
    if (!(s.resolution_scale > 0)) throw std::invalid_argument("resolution_scale must be positive");
    if (!(s.augment.scale_min > 0 && s.augment.scale_min <= s.augment.scale_max && s.augment.shift >= 0)) {
      throw std::invalid_argument("bad augmentation ranges");
    }
    return s;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed dataset spec: ") + e.what());
  }
}

CameraIntrinsics dataset_camera(const DatasetSpec& spec, std::uint64_t scene_seed, std::size_t view) {
  const auto dist = CameraDistribution::parse(spec.cameras);
  Rng rng(mix_seed({spec.seed, scene_seed, view, 0xca3e7a}));
  const std::size_t ns = dist.sensors.size();
  const std::string& sensor = dist.sensors[view % ns];
  double f = 0;
  if (dist.uniform) {
    f = rng.uniform(dist.focals[0], dist.focals[1]);
  } else {
    f = dist.focals[(view / ns) % dist.focals.size()];
  }
  CameraIntrinsics cam = preset_camera(sensor, f);
  if (spec.augment.enabled) {
    const double s = rng.uniform(spec.augment.scale_min, spec.augment.scale_max);
    const double dx = rng.uniform(-spec.augment.shift, spec.augment.shift) * cam.w;
    const double dy = rng.uniform(-spec.augment.shift, spec.augment.shift) * cam.h;
    cam = make_intrinsics(cam.f * s, cam.cx + dx, cam.cy + dy, cam.w, cam.h);
  }
  if (spec.resolution_scale != 1.0) cam = resize_intrinsics(cam, spec.resolution_scale, spec.resolution_scale).cam;
  return cam;
}

std::vector<Sample> generate_samples(const DatasetSpec& spec) {
  std::vector<Sample> samples;
  for (std::size_t s = 0; s < spec.scene_count; ++s) {
    const std::uint64_t scene_seed = spec.first_scene + s;
    const Scene scene = generate_scene(scene_seed);
    for (std::size_t v = 0; v < spec.views_per_scene; ++v) {
      const CameraPose pose = sample_pose(scene, mix_seed({spec.seed, v}));
      samples.push_back(render(scene, dataset_camera(spec, scene_seed, v), pose, spec.range));
    }
  }
  return samples;
}

namespace {

json pose_to_json(const CameraPose& p) {
  json r = json::array();
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) r.push_back(p.rotation(a, b));
  }
  return json{{"rotation", r}, {"position", {p.position.x(), p.position.y(), p.position.z()}}};
}

CameraPose pose_from_json(const json& j) {
  CameraPose p;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) p.rotation(a, b) = j.at("rotation").at(static_cast<std::size_t>(3 * a + b)).get<double>();
  }
  for (int a = 0; a < 3; ++a) p.position[a] = j.at("position").at(static_cast<std::size_t>(a)).get<double>();
  return p;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed json in " + path.string() + ": " + e.what());
  }
}

std::string sample_dir_name(std::size_t k) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06zu", k);
  return buf;
}

class DirLock {
 public:
  explicit DirLock(fs::path path) : path_(std::move(path)) {
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) throw std::runtime_error("dataset is being built by another process: " + path_.string());
  }
  ~DirLock() {
    ::close(fd_);
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

}  // namespace

void build_dataset(const DatasetSpec& spec, const fs::path& dir) {
  const json spec_json = dataset_spec_to_json(spec);
  const fs::path manifest_path = dir / "manifest.json";
  fs::create_directories(dir.parent_path().empty() ? fs::path(".") : dir.parent_path());
  DirLock lock(fs::path(dir.string() + ".lock"));
  if (fs::exists(manifest_path)) {
    try {
      if (read_json(manifest_path).at("spec") == spec_json) return;
    } catch (const std::exception&) {
    }
  }
  fs::create_directories(dir);
  const auto samples = generate_samples(spec);
  json entries = json::array();
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const Sample& s = samples[k];
    const std::string name = sample_dir_name(k);
    const fs::path sd = dir / name;
    fs::create_directories(sd);
    write_ppm(sd / "rgb.ppm", s.rgb);
    GridF depth = s.depth.values;
    for (std::size_t p = 0; p < depth.size(); ++p) {
      if (!s.depth.mask.bits[p]) depth[p] = 0.0f;
    }
    write_pfm(sd / "depth.pfm", depth);
    write_mask_pgm(sd / "mask.pgm", s.depth.mask);
    write_json(sd / "cam.json", intrinsics_to_json(s.cam));
    entries.push_back(json{{"dir", name},
                           {"scene_seed", s.scene_seed},
                           {"view", k % spec.views_per_scene},
                           {"provenance", s.provenance == Provenance::Rendered ? "rendered" : "derived"},
                           {"pose", pose_to_json(s.pose)}});
  }
  // The manifest goes last so a partially written dataset is never mistaken for a complete one.
  write_json(manifest_path, json{{"spec", spec_json}, {"samples", entries}});
}

Dataset load_dataset(const fs::path& dir) {
  const json manifest = read_json(dir / "manifest.json");
  Dataset ds;
  try {
    ds.spec = dataset_spec_from_json(manifest.at("spec"));
    for (const auto& e : manifest.at("samples")) {
      const fs::path sd = dir / e.at("dir").get<std::string>();
      Sample s;
      s.rgb = read_ppm(sd / "rgb.ppm");
      const auto sidecar = intrinsics_from_json(read_json(sd / "cam.json"));
      s.cam = sidecar.cam;
      s.depth.values = read_pfm(sd / "depth.pfm");
      s.depth.mask = read_mask_pgm(sd / "mask.pgm");
      s.depth.cam = s.cam;
      if (s.depth.values.h() != static_cast<std::size_t>(s.cam.h) || s.depth.values.w() != static_cast<std::size_t>(s.cam.w) ||
          s.rgb.h() != s.depth.values.h() || s.rgb.w() != s.depth.values.w() || s.depth.mask.h != s.depth.values.h() ||
          s.depth.mask.w != s.depth.values.w()) {
        throw std::runtime_error("sample files disagree on image size in " + sd.string());
      }
      s.pose = pose_from_json(e.at("pose"));
      s.scene_seed = e.at("scene_seed").get<std::uint64_t>();
      s.provenance = e.at("provenance").get<std::string>() == "derived" ? Provenance::Derived : Provenance::Rendered;
      ds.samples.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed manifest in " + dir.string() + ": " + e.what());
  }
  return ds;
}

}  // namespace camconv::synth
