#pragma once

#include <cmath>
#include <cstddef>
#include <utility>

#include "camconv/camera.hpp"
#include "camconv/grid.hpp"

namespace camconv {

// Channel order of a ChannelStack. Networks depend on it.
enum MapChannel : std::size_t { kCcX = 0, kCcY, kFovX, kFovY, kNcX, kNcY, kNumMapChannels };

// The six per-pixel camera maps at a feature resolution, stored interleaved as
// an (h, w, 6) grid in MapChannel order.
struct ChannelStack {
  GridD channels;
  CameraIntrinsics source_cam;

  std::size_t h() const { return channels.h(); }
  std::size_t w() const { return channels.w(); }
  GridD channel(MapChannel ch) const;
};

// cc_x[j, i] = i - cx for i in 0..w-1, cc_y[j, i] = j - cy for j in 0..h-1.
std::pair<GridD, GridD> make_cc(const CameraIntrinsics& cam);
// fov = atan(cc / f), radians.
std::pair<GridD, GridD> make_fov(const CameraIntrinsics& cam);
// Linear ramps from -1 to 1 across each axis; 0 on a unit-length axis.
std::pair<GridD, GridD> make_nc(std::size_t h, std::size_t w);

// Bilinear sample at continuous position (x, y), clamped to the grid.
template <typename T>
T sample_bilinear(const Grid<T>& g, double x, double y, std::size_t k = 0) {
  const double xmax = static_cast<double>(g.w() - 1), ymax = static_cast<double>(g.h() - 1);
  x = std::clamp(x, 0.0, xmax);
  y = std::clamp(y, 0.0, ymax);
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const std::size_t x1 = std::min(x0 + 1, g.w() - 1), y1 = std::min(y0 + 1, g.h() - 1);
  const double ax = x - static_cast<double>(x0), ay = y - static_cast<double>(y0);
  const double top = (1.0 - ax) * g.at(y0, x0, k) + ax * g.at(y0, x1, k);
  const double bot = (1.0 - ax) * g.at(y1, x0, k) + ax * g.at(y1, x1, k);
  return static_cast<T>((1.0 - ay) * top + ay * bot);
}

// Source coordinate for target index t under corner alignment: endpoints map to
// endpoints. A single-sample target reads the source center.
double corner_aligned_coord(std::size_t t, std::size_t src, std::size_t dst);

// Corner-aligned bilinear resampling of every channel to (h, w).
template <typename T>
Grid<T> resample_bilinear(const Grid<T>& map, std::size_t h, std::size_t w);

// cc and fov at native sensor resolution resampled to (h, w); nc built at (h, w).
ChannelStack make_stack(const CameraIntrinsics& cam, std::size_t h, std::size_t w);

}  // namespace camconv
