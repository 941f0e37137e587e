#pragma once

#include <optional>

#include "camconv/camera.hpp"
#include "camconv/grid.hpp"

namespace camconv {

// Validity bounds applied to ground-truth depth, meters.
struct DepthRange {
  double d_min = 0.1;
  double d_max = 100.0;
};

// Metric Z-depth (h, w, 1) with validity mask.
struct DepthMap {
  GridF values;
  Mask mask;
  CameraIntrinsics cam;
};

// Inverse depth (h, w, 1) in 1/m. When focal_normalized_to is set the values
// are scaled to the given default focal length (raw network space).
struct InverseDepthMap {
  GridF values;
  Mask mask;
  CameraIntrinsics cam;
  std::optional<double> focal_normalized_to;
};

struct FocalNormalization {
  double f_n = kDefaultNormalizedFocal;
};

// Scales every valid value by f / f_n. Throws std::invalid_argument if the input
// is already normalized or f_n <= 0.
InverseDepthMap normalize_inverse_depth(const InverseDepthMap& xi, const FocalNormalization& norm);
// Inverse of normalize_inverse_depth. Throws unless the input is tagged with norm.f_n.
InverseDepthMap denormalize_inverse_depth(const InverseDepthMap& xi, const FocalNormalization& norm);

// Scalar forms shared with the network: normalized = metric * factor.
double focal_normalization_factor(const CameraIntrinsics& cam, const FocalNormalization& norm);

}  // namespace camconv
