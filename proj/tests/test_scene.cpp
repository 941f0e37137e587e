#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "camconv/rng.hpp"
#include "camconv/scene.hpp"
#include "oracles.hpp"

using namespace camconv;
using namespace camconv::synth;

namespace {

Scene empty_room() {
  Scene s;
  s.room = {6, 3, 6};
  s.floor_albedo = s.wall_albedo = s.ceiling_albedo = {0.7, 0.7, 0.7};
  s.light = Eigen::Vector3d(0.3, -1, 0.2).normalized();
  s.free_center = {3, 3};
  return s;
}

double surface_distance_oracle(const Scene& s, const Eigen::Vector3d& p) {
  double best = oracle::box_surface_distance(p, Eigen::Vector3d::Zero(), s.room);
  for (const auto& o : s.objects) {
    best = std::min(best, oracle::box_surface_distance(p, o.center - o.size / 2, o.center + o.size / 2));
  }
  return best;
}

Eigen::Vector3d world_point(const Sample& s, std::size_t j, std::size_t i) {
  const Eigen::Vector3d pc = backproject(s.cam, static_cast<double>(i), static_cast<double>(j), s.depth.values.at(j, i, 0));
  return s.pose.rotation * pc + s.pose.position;
}

}  // namespace

TEST(GenerateScene, Deterministic) {
  const Scene a = generate_scene(42), b = generate_scene(42);
  EXPECT_EQ(a.room, b.room);
  ASSERT_EQ(a.objects.size(), b.objects.size());
  for (std::size_t k = 0; k < a.objects.size(); ++k) {
    EXPECT_EQ(a.objects[k].center, b.objects[k].center);
    EXPECT_EQ(a.objects[k].kind, b.objects[k].kind);
  }
}

TEST(GenerateScene, SeedsDiffer) {
  const Scene a = generate_scene(0), b = generate_scene(1);
  bool differ = a.objects.size() != b.objects.size() || a.room != b.room;
  for (std::size_t k = 0; !differ && k < a.objects.size(); ++k) differ = a.objects[k].center != b.objects[k].center;
  EXPECT_TRUE(differ);
}

TEST(GenerateScene, Invariants) {
  const auto& catalog = object_catalog();
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Scene s = generate_scene(seed);
    for (int a = 0; a < 3; ++a) {
      EXPECT_GE(s.room[a], 3.0);
      EXPECT_LE(s.room[a], 8.0);
    }
    EXPECT_GE(s.objects.size(), 4u);
    EXPECT_LE(s.objects.size(), 10u);
    for (const auto& o : s.objects) {
      const auto b = o.box();
      EXPECT_TRUE((b.lo.array() >= -1e-12).all() && (b.hi.array() <= s.room.array() + 1e-12).all()) << seed;
      const auto it = std::find_if(catalog.begin(), catalog.end(), [&](const auto& c) { return c.kind == o.kind; });
      ASSERT_NE(it, catalog.end());
      EXPECT_EQ(o.size, Eigen::Vector3d(it->width, it->height, it->depth));
      EXPECT_EQ(o.texture_scale, it->texture_scale);
      // the camera cylinder stays free
      const double dx = std::max({b.lo.x() - s.free_center.x(), 0.0, s.free_center.x() - b.hi.x()});
      const double dz = std::max({b.lo.z() - s.free_center.y(), 0.0, s.free_center.y() - b.hi.z()});
      EXPECT_GE(std::hypot(dx, dz), s.free_radius - 1e-9) << seed;
    }
    EXPECT_NO_THROW(check_pose(s, sample_pose(s, seed)));
  }
}

TEST(Catalog, ChairExtents) {
  const auto& catalog = object_catalog();
  const auto chair = std::find_if(catalog.begin(), catalog.end(), [](const auto& c) { return c.kind == "chair"; });
  ASSERT_NE(chair, catalog.end());
  EXPECT_EQ(chair->width, 0.5);
  EXPECT_EQ(chair->depth, 0.5);
  EXPECT_EQ(chair->height, 1.0);
}

TEST(Render, FrontoParallelWall) {
  const Scene s = empty_room();
  const auto pose = make_pose({3, 1.5, 4}, 0, 0, 0);
  const Sample r = render(s, make_intrinsics(40, 8, 6, 16, 12), pose);
  for (std::size_t p = 0; p < 16 * 12; ++p) {
    ASSERT_TRUE(r.depth.mask.bits[p]);
    EXPECT_NEAR(r.depth.values[p], 2.0f, 1e-6);
  }
  for (float v : r.rgb.values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Render, PoseErrors) {
  Scene s = empty_room();
  EXPECT_THROW(render(s, make_intrinsics(10, 4, 4, 8, 8), make_pose({-1, 1, 1}, 0, 0, 0)), std::invalid_argument);
  SceneObject crate{"crate", {3, 0.2, 3}, {0.4, 0.4, 0.4}, {0.5, 0.5, 0.5}, 0.1};
  s.objects.push_back(crate);
  EXPECT_THROW(render(s, make_intrinsics(10, 4, 4, 8, 8), make_pose({3, 0.2, 3}, 0, 0, 0)), std::invalid_argument);
}

TEST(Render, PixelsLandOnSurfaces) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Scene s = generate_scene(seed);
    const Sample r = render(s, make_intrinsics(20, 16.5, 11, 32, 24), sample_pose(s, seed));
    for (std::size_t j = 0; j < 24; ++j)
      for (std::size_t i = 0; i < 32; ++i) {
        if (!r.depth.mask(j, i)) continue;
        EXPECT_LT(surface_distance_oracle(s, world_point(r, j, i)), 1e-6) << seed << " " << j << " " << i;
      }
  }
}

TEST(Render, LongerFocalSeesAStrictSubset) {
  const Scene s = generate_scene(3);
  const auto pose = sample_pose(s, 3);
  const auto wide = make_intrinsics(20, 16, 12, 32, 24), narrow = make_intrinsics(40, 16, 12, 32, 24);
  const Sample n = render(s, narrow, pose);
  for (std::size_t j = 0; j < 24; ++j)
    for (std::size_t i = 0; i < 32; ++i) {
      const Eigen::Vector2d q = project(wide, backproject(narrow, i, j, 1.0));
      EXPECT_TRUE(q.x() >= 0 && q.x() <= 31 && q.y() >= 0 && q.y() <= 23);
    }
  const Eigen::Vector2d corner = project(narrow, backproject(wide, 0, 0, 1.0));
  EXPECT_TRUE(corner.x() < 0 || corner.y() < 0);
  EXPECT_GT(n.depth.mask.count(), 0u);
}

TEST(Render, SameContentThroughDifferentCameras) {
  // A crop of the sensor shares rays exactly with the full camera.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scene s = generate_scene(seed);
    const auto pose = sample_pose(s, seed);
    const auto full = make_intrinsics(25, 20, 15, 40, 30);
    const auto part = crop_intrinsics(full, 7, 5, 20, 16);
    const Sample a = render(s, full, pose), b = render(s, part, pose);
    for (std::size_t j = 0; j < 16; ++j)
      for (std::size_t i = 0; i < 20; ++i) {
        ASSERT_EQ(a.depth.mask(j + 5, i + 7), b.depth.mask(j, i));
        if (b.depth.mask(j, i)) EXPECT_NEAR(a.depth.values.at(j + 5, i + 7, 0), b.depth.values.at(j, i, 0), 1e-6);
      }
  }
}

TEST(Render, DepthWithinValidityBounds) {
  const Scene s = generate_scene(8);
  const DepthRange range{0.5, 3.0};
  const Sample r = render(s, make_intrinsics(20, 16, 12, 32, 24), sample_pose(s, 8), range);
  for (std::size_t p = 0; p < r.depth.values.size(); ++p) {
    if (!r.depth.mask.bits[p]) continue;
    EXPECT_GE(r.depth.values[p], 0.5f);
    EXPECT_LE(r.depth.values[p], 3.0f);
  }
}

TEST(DeriveView, IdentityIsBitIdentical) {
  const Scene s = generate_scene(5);
  const Sample r = render(s, make_intrinsics(20, 16, 12, 32, 24), sample_pose(s, 5));
  const Sample d = derive_view(r, {0, 0, 32, 24}, 1.0, 1.0);
  EXPECT_EQ(d.rgb, r.rgb);
  EXPECT_EQ(d.depth.mask.bits, r.depth.mask.bits);
  for (std::size_t p = 0; p < r.depth.values.size(); ++p) {
    if (r.depth.mask.bits[p]) EXPECT_EQ(d.depth.values[p], r.depth.values[p]);
  }
  EXPECT_EQ(d.cam, r.cam);
  EXPECT_EQ(d.provenance, Provenance::Derived);
}

TEST(DeriveView, CenteredCropPutsPrincipalPointAtCenter) {
  const Scene s = generate_scene(6);
  const Sample r = render(s, make_intrinsics(20, 16, 12, 32, 24), sample_pose(s, 6));
  const Sample d = derive_view(r, {8, 6, 16, 12}, 1.0, 1.0);
  EXPECT_EQ(d.cam.cx, 8);
  EXPECT_EQ(d.cam.cy, 6);
}

TEST(DeriveView, Errors) {
  const Scene s = generate_scene(6);
  const Sample r = render(s, make_intrinsics(20, 16, 12, 32, 24), sample_pose(s, 6));
  EXPECT_THROW(derive_view(r, {30, 0, 8, 8}, 1, 1), std::invalid_argument);
  EXPECT_THROW(derive_view(r, {0, 0, 0, 8}, 1, 1), std::invalid_argument);
  EXPECT_THROW(derive_view(r, {0, 0, 8, 8}, 0.01, 0.01), std::invalid_argument);
}

TEST(DeriveView, MatchesReRender) {
  Rng rng(77);
  std::vector<double> errors;
  for (int t = 0; t < 20; ++t) {
    const std::uint64_t seed = 100 + t;
    const Scene s = generate_scene(seed);
    const auto pose = sample_pose(s, seed);
    const Sample r = render(s, make_intrinsics(48, 32, 24, 64, 48), pose);
    const CropWindow win{static_cast<int>(rng.uniform_int(0, 16)), static_cast<int>(rng.uniform_int(0, 12)), 48, 36};
    const double scale = rng.uniform(0.5, 1.0);
    const Sample d = derive_view(r, win, scale, scale);
    const Sample direct = render(s, d.cam, pose);
    for (std::size_t p = 0; p < d.depth.values.size(); ++p) {
      if (!d.depth.mask.bits[p] || !direct.depth.mask.bits[p]) continue;
      errors.push_back(std::abs(d.depth.values[p] - direct.depth.values[p]) / direct.depth.values[p]);
    }
  }
  ASSERT_GT(errors.size(), 1000u);
  std::sort(errors.begin(), errors.end());
  EXPECT_LE(errors[errors.size() * 95 / 100], 0.02);
}

TEST(Distance, MatchesOracle) {
  Rng rng(9);
  const Scene s = generate_scene(9);
  for (int t = 0; t < 500; ++t) {
    const Eigen::Vector3d p(rng.uniform(0, s.room.x()), rng.uniform(0, s.room.y()), rng.uniform(0, s.room.z()));
    EXPECT_NEAR(distance_to_surfaces(s, p), surface_distance_oracle(s, p), 1e-12);
  }
}
