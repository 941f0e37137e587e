#include "camconv/maps.hpp"

#include <stdexcept>

namespace camconv {

GridD ChannelStack::channel(MapChannel ch) const {
  GridD out(h(), w(), 1);
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = channels[p * kNumMapChannels + ch];
  return out;
}

std::pair<GridD, GridD> make_cc(const CameraIntrinsics& cam) {
  const auto h = static_cast<std::size_t>(cam.h), w = static_cast<std::size_t>(cam.w);
  GridD ccx(h, w, 1), ccy(h, w, 1);
  for (std::size_t j = 0; j < h; ++j) {
    for (std::size_t i = 0; i < w; ++i) {
      ccx.at(j, i) = static_cast<double>(i) - cam.cx;
      ccy.at(j, i) = static_cast<double>(j) - cam.cy;
    }
  }
  return {std::move(ccx), std::move(ccy)};
}

std::pair<GridD, GridD> make_fov(const CameraIntrinsics& cam) {
  auto [fx, fy] = make_cc(cam);
  for (auto& v : fx.values()) v = std::atan(v / cam.f);
  for (auto& v : fy.values()) v = std::atan(v / cam.f);
  return {std::move(fx), std::move(fy)};
}

std::pair<GridD, GridD> make_nc(std::size_t h, std::size_t w) {
  if (h < 1 || w < 1) throw std::invalid_argument("make_nc: size must be at least 1x1");
  auto ramp = [](std::size_t t, std::size_t n) {
    return n == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(t) / static_cast<double>(n - 1);
  };
  GridD ncx(h, w, 1), ncy(h, w, 1);
  for (std::size_t j = 0; j < h; ++j) {
    for (std::size_t i = 0; i < w; ++i) {
      ncx.at(j, i) = ramp(i, w);
      ncy.at(j, i) = ramp(j, h);
    }
  }
  return {std::move(ncx), std::move(ncy)};
}

double corner_aligned_coord(std::size_t t, std::size_t src, std::size_t dst) {
  if (dst == 1) return (static_cast<double>(src) - 1.0) / 2.0;
  return static_cast<double>(t) * static_cast<double>(src - 1) / static_cast<double>(dst - 1);
}

template <typename T>
Grid<T> resample_bilinear(const Grid<T>& map, std::size_t h, std::size_t w) {
  if (map.rank() != 3 || map.h() < 1 || map.w() < 1 || h < 1 || w < 1) {
    throw std::invalid_argument("resample_bilinear: sizes must be at least 1x1");
  }
  if (map.h() == h && map.w() == w) return map;
  Grid<T> out(h, w, map.c());
  for (std::size_t j = 0; j < h; ++j) {
    const double y = corner_aligned_coord(j, map.h(), h);
    for (std::size_t i = 0; i < w; ++i) {
      const double x = corner_aligned_coord(i, map.w(), w);
      for (std::size_t k = 0; k < map.c(); ++k) out.at(j, i, k) = sample_bilinear(map, x, y, k);
    }
  }
  return out;
}

template GridF resample_bilinear(const GridF&, std::size_t, std::size_t);
template GridD resample_bilinear(const GridD&, std::size_t, std::size_t);

ChannelStack make_stack(const CameraIntrinsics& cam, std::size_t h, std::size_t w) {
  auto [ccx, ccy] = make_cc(cam);
  auto [fovx, fovy] = make_fov(cam);
  auto [ncx, ncy] = make_nc(h, w);
  const GridD* native[] = {&ccx, &ccy, &fovx, &fovy};
  ChannelStack stack{GridD(h, w, kNumMapChannels), cam};
  for (std::size_t ch = 0; ch < 4; ++ch) {
    const GridD r = resample_bilinear(*native[ch], h, w);
    for (std::size_t p = 0; p < h * w; ++p) stack.channels[p * kNumMapChannels + ch] = r[p];
  }
  for (std::size_t p = 0; p < h * w; ++p) {
    stack.channels[p * kNumMapChannels + kNcX] = ncx[p];
    stack.channels[p * kNumMapChannels + kNcY] = ncy[p];
  }
  return stack;
}

}  // namespace camconv
