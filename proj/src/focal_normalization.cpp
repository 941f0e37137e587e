#include <cmath>
#include <stdexcept>

#include "camconv/depth_map.hpp"

namespace camconv {

namespace {

void check_norm(const FocalNormalization& norm) {
  if (!(std::isfinite(norm.f_n) && norm.f_n > 0.0)) {
    throw std::invalid_argument("focal normalization requires f_n > 0");
  }
}

}  // namespace

double focal_normalization_factor(const CameraIntrinsics& cam, const FocalNormalization& norm) {
  check_norm(norm);
  return cam.f / norm.f_n;
}

InverseDepthMap normalize_inverse_depth(const InverseDepthMap& xi, const FocalNormalization& norm) {
  if (xi.focal_normalized_to) throw std::invalid_argument("inverse depth is already focal-normalized");
  const double s = focal_normalization_factor(xi.cam, norm);
  InverseDepthMap out = xi;
  for (std::size_t p = 0; p < xi.mask.bits.size(); ++p) {
    if (xi.mask.bits[p]) out.values[p] = static_cast<float>(static_cast<double>(xi.values[p]) * s);
  }
  out.focal_normalized_to = norm.f_n;
  return out;
}

InverseDepthMap denormalize_inverse_depth(const InverseDepthMap& xi, const FocalNormalization& norm) {
  if (!xi.focal_normalized_to) throw std::invalid_argument("inverse depth is not focal-normalized");
  if (*xi.focal_normalized_to != norm.f_n) {
    throw std::invalid_argument("inverse depth is normalized to a different focal length");
  }
  // Dividing by the same factor used for normalization keeps the round trip within 1 ulp.
  const double s = focal_normalization_factor(xi.cam, norm);
  InverseDepthMap out = xi;
  for (std::size_t p = 0; p < xi.mask.bits.size(); ++p) {
    if (xi.mask.bits[p]) out.values[p] = static_cast<float>(static_cast<double>(xi.values[p]) / s);
  }
  out.focal_normalized_to.reset();
  return out;
}

}  // namespace camconv
