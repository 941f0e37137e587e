#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "camconv/camera.hpp"
#include "camconv/depth_map.hpp"
#include "camconv/rng.hpp"

using namespace camconv;

namespace {

InverseDepthMap constant_inverse(const CameraIntrinsics& cam, float v) {
  return {GridF(static_cast<std::size_t>(cam.h), static_cast<std::size_t>(cam.w), 1, v),
          Mask(static_cast<std::size_t>(cam.h), static_cast<std::size_t>(cam.w), true), cam, std::nullopt};
}

}  // namespace

TEST(MakeIntrinsics, MatchesPresets) {
  EXPECT_EQ(make_intrinsics(72, 128, 96, 256, 192), camera_preset("s1_f72").intrinsics);
  EXPECT_EQ(make_intrinsics(100, 64, 48, 128, 96), camera_preset("s4_fn").intrinsics);
  EXPECT_EQ(camera_preset("s1·f72").intrinsics, camera_preset("s1_f72").intrinsics);
}

TEST(MakeIntrinsics, DegenerateOneByOneIsLegal) {
  const auto c = make_intrinsics(1, 0, 0, 1, 1);
  EXPECT_EQ(c.w, 1);
  EXPECT_EQ(c.h, 1);
}

TEST(MakeIntrinsics, RejectsInvalidValues) {
  EXPECT_THROW(make_intrinsics(0, 0, 0, 4, 4), std::invalid_argument);
  EXPECT_THROW(make_intrinsics(-3, 0, 0, 4, 4), std::invalid_argument);
  EXPECT_THROW(make_intrinsics(10, 0, 0, 0, 4), std::invalid_argument);
  EXPECT_THROW(make_intrinsics(10, 0, 0, 4, -1), std::invalid_argument);
  EXPECT_THROW(make_intrinsics(10, NAN, 0, 4, 4), std::invalid_argument);
  EXPECT_THROW(make_intrinsics(INFINITY, 0, 0, 4, 4), std::invalid_argument);
}

TEST(MakeIntrinsics, PrincipalPointMayLeaveTheSensor) {
  EXPECT_NO_THROW(make_intrinsics(50, -40, 300, 100, 80));
}

TEST(Presets, TableCoversEverySensorAndFocal) {
  const auto& table = preset_table();
  EXPECT_EQ(table.size(), sensor_presets().size() * focal_presets().size());
  std::set<std::string> names;
  for (const auto& p : table) {
    EXPECT_TRUE(names.insert(p.name).second) << p.name;
    EXPECT_DOUBLE_EQ(p.intrinsics.cx, p.intrinsics.w / 2.0);
    EXPECT_DOUBLE_EQ(p.intrinsics.cy, p.intrinsics.h / 2.0);
  }
  const std::pair<const char*, std::pair<int, int>> sensors[] = {{"s1", {256, 192}}, {"s2", {192, 256}},
                                                                 {"s3", {224, 224}}, {"s4", {128, 96}},
                                                                 {"s5", {320, 320}}, {"sS", {256, 192}},
                                                                 {"sK", {384, 128}}};
  for (const auto& [name, wh] : sensors) {
    EXPECT_EQ(sensor_preset(name).w, wh.first) << name;
    EXPECT_EQ(sensor_preset(name).h, wh.second) << name;
  }
  EXPECT_EQ(focal_preset("f72").f, 72);
  EXPECT_EQ(focal_preset("f128").f, 128);
  EXPECT_EQ(focal_preset("f64").f, 64);
  EXPECT_EQ(focal_preset("fn").f, 100);
  EXPECT_THROW(camera_preset("s9_f72"), std::invalid_argument);
}

TEST(CropIntrinsics, ShiftsPrincipalPoint) {
  const auto c = make_intrinsics(100, 128, 96, 256, 192);
  EXPECT_EQ(crop_intrinsics(c, 10, 20, 100, 80), make_intrinsics(100, 118, 76, 100, 80));
  EXPECT_EQ(crop_intrinsics(c, 0, 0, 256, 192), c);
  const auto at_pp = crop_intrinsics(c, c.cx, c.cy, 50, 50);
  EXPECT_EQ(at_pp.cx, 0);
  EXPECT_EQ(at_pp.cy, 0);
  EXPECT_THROW(crop_intrinsics(c, 0, 0, 0, 10), std::invalid_argument);
}

TEST(CropIntrinsics, Composes) {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const auto c = make_intrinsics(rng.uniform(20, 200), rng.uniform(0, 300), rng.uniform(0, 300), 300, 300);
    const double ax = std::floor(rng.uniform(0, 50)), ay = std::floor(rng.uniform(0, 50));
    const double bx = std::floor(rng.uniform(0, 50)), by = std::floor(rng.uniform(0, 50));
    const auto two = crop_intrinsics(crop_intrinsics(c, ax, ay, 200, 200), bx, by, 100, 120);
    const auto one = crop_intrinsics(c, ax + bx, ay + by, 100, 120);
    // subtraction order differs, so allow an ulp
    EXPECT_DOUBLE_EQ(two.cx, one.cx);
    EXPECT_DOUBLE_EQ(two.cy, one.cy);
    EXPECT_EQ(two.f, one.f);
    EXPECT_EQ(two.w, one.w);
    EXPECT_EQ(two.h, one.h);
  }
}

TEST(ResizeIntrinsics, UniformScale) {
  const auto c = make_intrinsics(100, 118, 76, 100, 80);
  const auto r = resize_intrinsics(c, 0.5, 0.5);
  EXPECT_EQ(r.cam, make_intrinsics(50, 59, 38, 50, 40));
  EXPECT_EQ(r.f_avg, 50);
  EXPECT_FALSE(r.approximate);
  EXPECT_EQ(resize_intrinsics(c, 1, 1).cam, c);
}

TEST(ResizeIntrinsics, AnisotropicUsesAverageFocal) {
  const auto r = resize_intrinsics(make_intrinsics(100, 50, 40, 100, 80), 0.5, 1.0);
  EXPECT_EQ(r.f_avg, 75);
  EXPECT_EQ(r.cam.f, 75);
  EXPECT_TRUE(r.approximate);
  EXPECT_EQ(r.cam.w, 50);
  EXPECT_EQ(r.cam.h, 80);
}

TEST(ResizeIntrinsics, RoundsHalfAwayFromZeroAndRejectsEmpty) {
  EXPECT_EQ(resize_intrinsics(make_intrinsics(10, 0, 0, 5, 3), 0.5, 0.5).cam.w, 3);  // 2.5 -> 3
  EXPECT_EQ(resize_intrinsics(make_intrinsics(10, 0, 0, 5, 3), 0.5, 0.5).cam.h, 2);  // 1.5 -> 2
  EXPECT_THROW(resize_intrinsics(make_intrinsics(10, 0, 0, 4, 4), 0.1, 1.0), std::invalid_argument);
  EXPECT_THROW(resize_intrinsics(make_intrinsics(10, 0, 0, 4, 4), -1.0, 1.0), std::invalid_argument);
}

TEST(Backproject, Examples) {
  const auto c = make_intrinsics(72, 128, 96, 256, 192);
  EXPECT_EQ(backproject(c, 128, 96, 2), Eigen::Vector3d(0, 0, 2));
  const auto p = backproject(c, 128 + 72, 96, 1);
  EXPECT_DOUBLE_EQ(p.x(), 1.0);
  EXPECT_DOUBLE_EQ(p.z(), 1.0);
}

TEST(Backproject, ProjectRoundTrip) {
  Rng rng(11);
  for (int t = 0; t < 1000; ++t) {
    const auto c = make_intrinsics(rng.uniform(10, 300), rng.uniform(-50, 350), rng.uniform(-50, 350), 320, 320);
    const double i = rng.uniform(0, 319), j = rng.uniform(0, 319), d = rng.uniform(0.1, 100);
    const Eigen::Vector2d q = project(c, backproject(c, i, j, d));
    EXPECT_NEAR(q.x(), i, 1e-9);
    EXPECT_NEAR(q.y(), j, 1e-9);
  }
}

TEST(CameraConsistency, CropAndResizeAgreeOnProjection) {
  Rng rng(12);
  for (int t = 0; t < 200; ++t) {
    const auto c = make_intrinsics(rng.uniform(40, 150), rng.uniform(100, 150), rng.uniform(80, 110), 256, 192);
    const Eigen::Vector3d X(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(1, 6));
    const double x0 = std::floor(rng.uniform(0, 60)), y0 = std::floor(rng.uniform(0, 40));
    const double r = rng.uniform(0.3, 1.5);
    const Eigen::Vector2d p = project(c, X);
    // crop then resize
    const auto a = resize_intrinsics(crop_intrinsics(c, x0, y0, 128, 96), r, r).cam;
    const Eigen::Vector2d pa = project(a, X);
    EXPECT_NEAR(pa.x(), (p.x() - x0) * r, 0.5);
    EXPECT_NEAR(pa.y(), (p.y() - y0) * r, 0.5);
    // resize then crop with the window scaled accordingly
    const auto b = crop_intrinsics(resize_intrinsics(c, r, r).cam, x0 * r, y0 * r, 128, 96);
    const Eigen::Vector2d pb = project(b, X);
    EXPECT_NEAR(pb.x(), pa.x(), 1e-9);
    EXPECT_NEAR(pb.y(), pa.y(), 1e-9);
  }
}

TEST(FieldOfView, ShrinksWithFocal) {
  EXPECT_GT(horizontal_fov(camera_preset("s1_f64").intrinsics), horizontal_fov(camera_preset("s1_f128").intrinsics));
  EXPECT_NEAR(horizontal_fov(make_intrinsics(1, 1, 1, 3, 3)), M_PI / 2, 1e-12);
}

TEST(Sidecar, JsonRoundTrip) {
  const auto c = make_intrinsics(72.5, 128.25, 96, 256, 192);
  const auto j = intrinsics_to_json(c);
  EXPECT_TRUE(j.at("focal_normalized_to").is_null());
  const auto back = intrinsics_from_json(j);
  EXPECT_EQ(back.cam, c);
  EXPECT_FALSE(back.focal_normalized_to.has_value());
  EXPECT_EQ(*intrinsics_from_json(intrinsics_to_json(c, 100.0)).focal_normalized_to, 100.0);
  EXPECT_THROW(intrinsics_from_json(nlohmann::json{{"f", 1}}), std::invalid_argument);
}

TEST(FocalNormalization, Examples) {
  const auto cam = make_intrinsics(64, 4, 4, 8, 8);
  const auto n = normalize_inverse_depth(constant_inverse(cam, 0.5f), {100});
  for (float v : n.values.values()) EXPECT_FLOAT_EQ(v, 0.32f);
  EXPECT_EQ(*n.focal_normalized_to, 100);
  const auto d = denormalize_inverse_depth(n, {100});
  for (float v : d.values.values()) EXPECT_EQ(v, 0.5f);
  EXPECT_FALSE(d.focal_normalized_to.has_value());

  const auto cam_n = make_intrinsics(100, 4, 4, 8, 8);
  const auto id = normalize_inverse_depth(constant_inverse(cam_n, 0.37f), {100});
  for (float v : id.values.values()) EXPECT_EQ(v, 0.37f);
}

TEST(FocalNormalization, Errors) {
  const auto cam = make_intrinsics(64, 4, 4, 8, 8);
  const auto n = normalize_inverse_depth(constant_inverse(cam, 0.5f), {100});
  EXPECT_THROW(normalize_inverse_depth(n, {100}), std::invalid_argument);
  EXPECT_THROW(denormalize_inverse_depth(constant_inverse(cam, 0.5f), {100}), std::invalid_argument);
  EXPECT_THROW(denormalize_inverse_depth(n, {50}), std::invalid_argument);
  EXPECT_THROW(normalize_inverse_depth(constant_inverse(cam, 0.5f), {0}), std::invalid_argument);
}

TEST(FocalNormalization, MaskedPixelsUntouched) {
  const auto cam = make_intrinsics(64, 2, 2, 4, 4);
  auto xi = constant_inverse(cam, 0.5f);
  xi.mask.set(1, 1, false);
  xi.values.at(1, 1, 0) = 123.0f;
  const auto n = normalize_inverse_depth(xi, {100});
  EXPECT_EQ(n.values.at(1, 1, 0), 123.0f);
  EXPECT_FALSE(n.mask(1, 1));
}
