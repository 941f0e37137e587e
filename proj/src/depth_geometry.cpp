#include "camconv/depth_geometry.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Geometry>

namespace camconv {

Mask validity_mask(const GridF& depth, const DepthRange& range) {
  Mask m(depth.h(), depth.w(), false);
  for (std::size_t p = 0; p < m.bits.size(); ++p) {
    const double d = depth[p];
    m.bits[p] = std::isfinite(d) && d > 0.0 && d >= range.d_min && d <= range.d_max;
  }
  return m;
}

DepthMap make_depth_map(GridF values, const CameraIntrinsics& cam, const DepthRange& range) {
  DepthMap d;
  d.mask = validity_mask(values, range);
  d.values = std::move(values);
  d.cam = cam;
  return d;
}

namespace {

GridF reciprocal(const GridF& v, const Mask& mask) {
  GridF out = v;
  for (std::size_t p = 0; p < mask.bits.size(); ++p) {
    if (!mask.bits[p]) continue;
    const float x = v[p];
    if (!(std::isfinite(x) && x > 0.0f)) {
      throw std::invalid_argument("non-positive or non-finite value inside the validity mask");
    }
    out[p] = 1.0f / x;
  }
  return out;
}

}  // namespace

InverseDepthMap to_inverse(const DepthMap& d) {
  return InverseDepthMap{reciprocal(d.values, d.mask), d.mask, d.cam, std::nullopt};
}

DepthMap to_depth(const InverseDepthMap& xi) {
  if (xi.focal_normalized_to) throw std::invalid_argument("to_depth expects metric inverse depth");
  return DepthMap{reciprocal(xi.values, xi.mask), xi.mask, xi.cam};
}

template <typename T>
Grid<T> confidence_target(const Grid<T>& xi_pred, const Grid<T>& xi_gt) {
  require_shape(xi_pred.same_shape(xi_gt), "confidence_target " + shape_string(xi_pred.shape()) + " vs " +
                                               shape_string(xi_gt.shape()));
  Grid<T> out(xi_pred.shape());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = std::exp(-std::abs(xi_pred[p] - xi_gt[p]));
  return out;
}

template GridF confidence_target(const GridF&, const GridF&);
template GridD confidence_target(const GridD&, const GridD&);

NormalMap normals_from_depth(const DepthMap& d) {
  const std::size_t h = d.values.h(), w = d.values.w();
  if (d.mask.count() == 0) throw std::invalid_argument("normals_from_depth: all pixels masked");
  NormalMap out{GridF(h, w, 3), Mask(h, w, false)};
  auto point = [&](std::size_t j, std::size_t i) {
    return backproject(d.cam, static_cast<double>(i), static_cast<double>(j), d.values.at(j, i));
  };
  for (std::size_t j = 1; j + 1 < h; ++j) {
    for (std::size_t i = 1; i + 1 < w; ++i) {
      if (!(d.mask(j, i) && d.mask(j, i - 1) && d.mask(j, i + 1) && d.mask(j - 1, i) && d.mask(j + 1, i))) continue;
      const Eigen::Vector3d tx = point(j, i + 1) - point(j, i - 1);
      const Eigen::Vector3d ty = point(j + 1, i) - point(j - 1, i);
      Eigen::Vector3d n = tx.cross(ty);
      const double len = n.norm();
      if (!(len > 0.0) || !std::isfinite(len)) continue;
      n /= len;
      if (n.z() > 0.0) n = -n;
      if (n.z() == 0.0) continue;
      for (int k = 0; k < 3; ++k) out.values.at(j, i, k) = static_cast<float>(n[k]);
      out.mask.set(j, i, true);
    }
  }
  return out;
}

InverseDepthMap pool_inverse_depth(const InverseDepthMap& xi, int factor) {
  if (factor < 1) throw std::invalid_argument("pool factor must be >= 1");
  if (factor == 1) return xi;
  const std::size_t h = xi.values.h(), w = xi.values.w();
  const auto f = static_cast<std::size_t>(factor);
  if (h % f || w % f) throw std::invalid_argument("pool factor must divide the map size");
  const std::size_t ph = h / f, pw = w / f;
  InverseDepthMap out;
  out.values = GridF(ph, pw, 1);
  out.mask = Mask(ph, pw, false);
  out.cam = resize_intrinsics(xi.cam, 1.0 / factor, 1.0 / factor).cam;
  out.focal_normalized_to = xi.focal_normalized_to;
  for (std::size_t j = 0; j < ph; ++j) {
    for (std::size_t i = 0; i < pw; ++i) {
      double sum = 0.0;
      int n = 0;
      for (std::size_t y = j * f; y < (j + 1) * f; ++y) {
        for (std::size_t x = i * f; x < (i + 1) * f; ++x) {
          if (xi.mask(y, x)) {
            sum += xi.values.at(y, x);
            ++n;
          }
        }
      }
      if (n > 0) {
        out.values.at(j, i) = static_cast<float>(sum / n);
        out.mask.set(j, i, true);
      }
    }
  }
  return out;
}

}  // namespace camconv
