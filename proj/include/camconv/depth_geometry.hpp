#pragma once

#include "camconv/depth_map.hpp"

namespace camconv {

// Unit normals (h, w, 3), camera-facing (n_z < 0) on valid pixels.
struct NormalMap {
  GridF values;
  Mask mask;
};

// Masks pixels that are non-finite, non-positive or outside range.
Mask validity_mask(const GridF& depth, const DepthRange& range = {});

// Builds a DepthMap from raw values, deriving the mask from range.
DepthMap make_depth_map(GridF values, const CameraIntrinsics& cam, const DepthRange& range = {});

// Elementwise reciprocal on valid pixels; invalid pixels are copied untouched.
// Throws std::invalid_argument on a non-positive or non-finite valid value.
InverseDepthMap to_inverse(const DepthMap& d);
DepthMap to_depth(const InverseDepthMap& xi);

// exp(-|pred - gt|) per element; treated as a constant target by the losses.
template <typename T>
Grid<T> confidence_target(const Grid<T>& xi_pred, const Grid<T>& xi_gt);

// Central differences of backprojected neighbors, crossed and flipped toward the camera.
// Border pixels and pixels with an invalid 4-neighbor are masked. Throws when the
// input mask is empty.
NormalMap normals_from_depth(const DepthMap& d);

// Downsamples by an integer factor, averaging valid inverse depth per block.
// The camera is resized by 1/factor. Blocks without valid pixels are masked.
InverseDepthMap pool_inverse_depth(const InverseDepthMap& xi, int factor);

}  // namespace camconv
