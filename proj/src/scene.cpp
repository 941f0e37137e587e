#include "camconv/scene.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/Geometry>

#include "camconv/depth_geometry.hpp"
#include "camconv/maps.hpp"
#include "camconv/rng.hpp"

namespace camconv::synth {

using Eigen::Vector3d;

const std::vector<CatalogEntry>& object_catalog() {
  static const std::vector<CatalogEntry> catalog = {
      {"chair", 0.5, 0.5, 1.0, 0.25},   {"table", 1.2, 0.8, 0.75, 0.3},  {"cabinet", 0.8, 0.5, 1.8, 0.4},
      {"sofa", 2.0, 0.9, 0.85, 0.5},    {"bed", 2.0, 1.6, 0.6, 0.5},     {"crate", 0.4, 0.4, 0.4, 0.2},
      {"bookshelf", 1.0, 0.35, 2.0, 0.25}, {"desk", 1.4, 0.7, 0.75, 0.35},
  };
  return catalog;
}

namespace {

Vector3d random_albedo(Rng& rng) {
  return {rng.uniform(0.25, 0.95), rng.uniform(0.25, 0.95), rng.uniform(0.25, 0.95)};
}

bool overlaps_xz(const Box& a, const Box& b) {
  return a.lo.x() < b.hi.x() && b.lo.x() < a.hi.x() && a.lo.z() < b.hi.z() && b.lo.z() < a.hi.z();
}

bool intersects_disc(const Box& b, const Eigen::Vector2d& c, double r) {
  const double dx = std::max({b.lo.x() - c.x(), 0.0, c.x() - b.hi.x()});
  const double dz = std::max({b.lo.z() - c.y(), 0.0, c.y() - b.hi.z()});
  return dx * dx + dz * dz < r * r;
}

bool try_place(Scene& scene, const CatalogEntry& e, Rng& rng) {
  const Vector3d size(e.width, e.height, e.depth);
  if (size.x() > scene.room.x() || size.z() > scene.room.z()) return false;
  const Vector3d center(rng.uniform(size.x() / 2, scene.room.x() - size.x() / 2), size.y() / 2,
                        rng.uniform(size.z() / 2, scene.room.z() - size.z() / 2));
  const Box box{center - size / 2, center + size / 2};
  if (intersects_disc(box, scene.free_center, scene.free_radius)) return false;
  for (const auto& o : scene.objects) {
    if (overlaps_xz(box, o.box())) return false;
  }
  scene.objects.push_back({e.kind, center, size, random_albedo(rng), e.texture_scale});
  return true;
}

}  // namespace

Scene generate_scene(std::uint64_t seed) {
  Rng rng(mix_seed({seed, 0x5ce11e}));
  Scene s;
  s.seed = seed;
  s.room = Vector3d(rng.uniform(3.0, 8.0), rng.uniform(3.0, 8.0), rng.uniform(3.0, 8.0));
  s.floor_albedo = random_albedo(rng);
  s.wall_albedo = random_albedo(rng);
  s.ceiling_albedo = random_albedo(rng);
  s.free_center = Eigen::Vector2d(s.room.x() / 2, s.room.z() / 2);
  const Vector3d light(rng.uniform(-0.6, 0.6), -1.0, rng.uniform(-0.6, 0.6));
  s.light = light.normalized();

  const auto& catalog = object_catalog();
  const auto target = rng.uniform_int(4, 10);
  while (static_cast<std::int64_t>(s.objects.size()) < target) {
    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
      const auto& e = catalog[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(catalog.size()) - 1))];
      placed = try_place(s, e, rng);
    }
    // Crowded room: fall back to the smallest catalog item.
    const CatalogEntry* smallest = &catalog.front();
    for (const auto& e : catalog) {
      if (e.width * e.depth < smallest->width * smallest->depth) smallest = &e;
    }
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) placed = try_place(s, *smallest, rng);
    if (!placed) break;
  }
  return s;
}

CameraPose make_pose(const Vector3d& position, double yaw, double pitch, double roll) {
  // Camera (x right, y down, z forward) onto world (y up) at zero angles.
  Eigen::Matrix3d base;
  base << -1, 0, 0, 0, -1, 0, 0, 0, 1;
  const Eigen::Matrix3d r = Eigen::AngleAxisd(yaw, Vector3d::UnitY()).toRotationMatrix() * base *
                            Eigen::AngleAxisd(pitch, Vector3d::UnitX()).toRotationMatrix() *
                            Eigen::AngleAxisd(roll, Vector3d::UnitZ()).toRotationMatrix();
  return {r, position};
}

CameraPose sample_pose(const Scene& scene, std::uint64_t seed) {
  Rng rng(mix_seed({scene.seed, seed, 0x905e}));
  const double radius = 0.6 * scene.free_radius * std::sqrt(rng.uniform());
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const Vector3d pos(scene.free_center.x() + radius * std::cos(angle), rng.uniform(1.0, 1.6),
                     scene.free_center.y() + radius * std::sin(angle));
  const double deg = std::numbers::pi / 180.0;
  return make_pose(pos, rng.uniform(0.0, 2.0 * std::numbers::pi), rng.uniform(-20.0, 5.0) * deg,
                   rng.uniform(-3.0, 3.0) * deg);
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Slab test from outside the box; returns entry distance and face normal.
bool intersect_box(const Box& b, const Vector3d& o, const Vector3d& d, double& t_hit, Vector3d& normal) {
  double t_near = -kInf, t_far = kInf;
  int axis = -1;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < b.lo[a] || o[a] > b.hi[a]) return false;
      continue;
    }
    double t1 = (b.lo[a] - o[a]) / d[a], t2 = (b.hi[a] - o[a]) / d[a];
    if (t1 > t2) std::swap(t1, t2);
    if (t1 > t_near) {
      t_near = t1;
      axis = a;
    }
    t_far = std::min(t_far, t2);
  }
  if (axis < 0 || t_near > t_far || t_near <= 1e-9) return false;
  t_hit = t_near;
  normal = Vector3d::Zero();
  normal[axis] = d[axis] > 0 ? -1.0 : 1.0;
  return true;
}

bool inside(const Box& b, const Vector3d& p) {
  return (p.array() > b.lo.array()).all() && (p.array() < b.hi.array()).all();
}

double checker(const Vector3d& p, const Vector3d& n, double scale) {
  int axis = 0;
  n.cwiseAbs().maxCoeff(&axis);
  const double u = p[(axis + 1) % 3] / scale, v = p[(axis + 2) % 3] / scale;
  const auto parity = static_cast<long long>(std::floor(u)) + static_cast<long long>(std::floor(v));
  return (parity & 1) ? 1.0 : 0.55;
}

}  // namespace

std::optional<RayHit> cast_ray(const Scene& scene, const Vector3d& o, const Vector3d& d) {
  std::optional<RayHit> best;
  // Room interior: exit through the nearest wall.
  double t_room = kInf;
  int axis = -1;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) continue;
    const double t = d[a] > 0 ? (scene.room[a] - o[a]) / d[a] : -o[a] / d[a];
    if (t < t_room) {
      t_room = t;
      axis = a;
    }
  }
  if (axis >= 0 && t_room > 0) {
    Vector3d n = Vector3d::Zero();
    n[axis] = d[axis] > 0 ? -1.0 : 1.0;
    const bool floor = axis == 1 && d[axis] < 0, ceiling = axis == 1 && d[axis] > 0;
    best = RayHit{t_room, n, floor ? scene.floor_albedo : (ceiling ? scene.ceiling_albedo : scene.wall_albedo),
                  floor ? scene.floor_texture : scene.wall_texture};
  }
  for (const auto& obj : scene.objects) {
    double t;
    Vector3d n;
    if (intersect_box(obj.box(), o, d, t, n) && (!best || t < best->t)) {
      best = RayHit{t, n, obj.albedo, obj.texture_scale};
    }
  }
  return best;
}

void check_pose(const Scene& scene, const CameraPose& pose) {
  const Box room{Vector3d::Zero(), scene.room};
  if (!inside(room, pose.position)) throw std::invalid_argument("camera is outside the room");
  for (const auto& obj : scene.objects) {
    if (inside(obj.box(), pose.position)) throw std::invalid_argument("camera is inside an object");
  }
}

Sample render(const Scene& scene, const CameraIntrinsics& cam, const CameraPose& pose, const DepthRange& range) {
  check_pose(scene, pose);
  const auto h = static_cast<std::size_t>(cam.h), w = static_cast<std::size_t>(cam.w);
  GridF rgb(h, w, 3), depth(h, w, 1);
  const double ambient = 0.35;
  for (std::size_t j = 0; j < h; ++j) {
    for (std::size_t i = 0; i < w; ++i) {
      // z component 1 makes the ray parameter equal to Z-depth.
      const Vector3d dc((static_cast<double>(i) - cam.cx) / cam.f, (static_cast<double>(j) - cam.cy) / cam.f, 1.0);
      const Vector3d dw = pose.rotation * dc;
      const auto hit = cast_ray(scene, pose.position, dw);
      if (!hit) continue;
      depth.at(j, i) = static_cast<float>(hit->t);
      const Vector3d p = pose.position + hit->t * dw;
      const double shade = ambient + (1.0 - ambient) * std::max(0.0, -hit->normal.dot(scene.light));
      const double tex = checker(p, hit->normal, hit->texture_scale);
      for (int k = 0; k < 3; ++k) {
        rgb.at(j, i, static_cast<std::size_t>(k)) = static_cast<float>(std::clamp(hit->albedo[k] * shade * tex, 0.0, 1.0));
      }
    }
  }
  Sample s;
  s.rgb = std::move(rgb);
  s.depth = make_depth_map(std::move(depth), cam, range);
  s.cam = cam;
  s.pose = pose;
  s.scene_seed = scene.seed;
  s.provenance = Provenance::Rendered;
  return s;
}

Sample derive_view(const Sample& sample, const CropWindow& win, double rx, double ry) {
  const int sw = sample.cam.w, sh = sample.cam.h;
  if (win.w < 1 || win.h < 1) throw std::invalid_argument("derive_view: empty crop window");
  if (win.x0 < 0 || win.y0 < 0 || win.x0 + win.w > sw || win.y0 + win.h > sh) {
    throw std::invalid_argument("derive_view: crop window outside the source sensor");
  }
  const CameraIntrinsics cropped = crop_intrinsics(sample.cam, win.x0, win.y0, win.w, win.h);
  const CameraIntrinsics cam = resize_intrinsics(cropped, rx, ry).cam;
  const auto h = static_cast<std::size_t>(cam.h), w = static_cast<std::size_t>(cam.w);

  Sample out;
  out.rgb = GridF(h, w, 3);
  out.depth.values = GridF(h, w, 1);
  out.depth.mask = Mask(h, w, false);
  out.depth.cam = cam;
  out.cam = cam;
  out.pose = sample.pose;
  out.scene_seed = sample.scene_seed;
  out.provenance = Provenance::Derived;

  const double xmax = win.w - 1, ymax = win.h - 1;
  for (std::size_t j = 0; j < h; ++j) {
    const double yc = static_cast<double>(j) / ry;
    for (std::size_t i = 0; i < w; ++i) {
      const double xc = static_cast<double>(i) / rx;
      const double x = win.x0 + std::min(xc, xmax), y = win.y0 + std::min(yc, ymax);
      for (std::size_t k = 0; k < 3; ++k) out.rgb.at(j, i, k) = sample_bilinear(sample.rgb, x, y, k);
      if (xc > xmax + 1e-9 || yc > ymax + 1e-9) continue;

      const auto x0 = static_cast<std::size_t>(std::floor(x)), y0 = static_cast<std::size_t>(std::floor(y));
      const double ax = x - static_cast<double>(x0), ay = y - static_cast<double>(y0);
      double sum = 0, lo = std::numeric_limits<double>::infinity(), hi = 0;
      bool ok = true;
      for (int dy = 0; dy < 2 && ok; ++dy) {
        for (int dx = 0; dx < 2 && ok; ++dx) {
          const double wt = (dx ? ax : 1 - ax) * (dy ? ay : 1 - ay);
          if (wt == 0.0) continue;
          const std::size_t yy = y0 + static_cast<std::size_t>(dy), xx = x0 + static_cast<std::size_t>(dx);
          if (!sample.depth.mask(yy, xx)) {
            ok = false;
            break;
          }
          const double d = sample.depth.values.at(yy, xx);
          sum += wt * d;
          lo = std::min(lo, d);
          hi = std::max(hi, d);
        }
      }
      if (!ok || hi > 1.1 * lo) continue;
      out.depth.values.at(j, i) = static_cast<float>(sum);
      out.depth.mask.set(j, i, true);
    }
  }
  return out;
}

double distance_to_surfaces(const Scene& scene, const Vector3d& p) {
  auto box_surface_distance = [&](const Box& b) {
    const Vector3d outside = (b.lo - p).cwiseMax(p - b.hi).cwiseMax(0.0);
    if (outside.squaredNorm() > 0) return outside.norm();
    return ((p - b.lo).cwiseMin(b.hi - p)).minCoeff();
  };
  double best = box_surface_distance({Vector3d::Zero(), scene.room});
  for (const auto& o : scene.objects) best = std::min(best, box_surface_distance(o.box()));
  return best;
}

}  // namespace camconv::synth
