#pragma once

#include <optional>
#include <vector>

#include "camconv/autodiff.hpp"
#include "camconv/grid.hpp"

namespace camconv {

// Weights of the depth, gradient, confidence and normal terms.
struct LossWeights {
  double depth = 150.0;
  double gradient = 100.0;
  double confidence = 50.0;
  double normal = 25.0;
};

// Sum runs over valid pixels; Mean divides that sum by the number of valid terms.
enum class Reduction { Sum, Mean };

inline constexpr int kGradientSpacings[] = {1, 2, 4, 8, 16};
// Lower bound on the |a + b| denominator of the scale-invariant difference.
inline constexpr double kSigEpsilon = 1e-6;

// Scale-invariant finite differences at spacing h: channel 0 pairs (i, i+h) along
// x, channel 1 pairs (j, j+h) along y. A component is valid only when both
// pixels are valid and in bounds.
template <typename T>
struct SigGradient {
  Grid<T> values;  // (h, w, 2)
  Mask valid_x;
  Mask valid_y;
};

template <typename T>
SigGradient<T> sig_operator(const Grid<T>& d, int h, const Mask& mask);

// L1 on inverse depth.
template <typename T>
ad::Var<T> depth_loss(ad::Var<T> pred, const Grid<T>& gt, const Mask& mask, Reduction r = Reduction::Sum);

// Sum over spacings {1,2,4,8,16} of the L2 distance between the sig_operator
// vectors of prediction and target. A pixel contributes when at least one of
// its components is jointly valid; an invalid component contributes zero.
template <typename T>
ad::Var<T> gradient_loss(ad::Var<T> pred, const Grid<T>& gt, const Mask& mask, Reduction r = Reduction::Sum);

// L1 between predicted confidence and a constant target (see confidence_target).
template <typename T>
ad::Var<T> confidence_loss(ad::Var<T> pred, const Grid<T>& target, const Mask& mask,
                           Reduction r = Reduction::Sum);

// Per-pixel L2 distance between 3-vectors.
template <typename T>
ad::Var<T> normal_loss(ad::Var<T> pred, const Grid<T>& gt, const Mask& mask, Reduction r = Reduction::Sum);

// mean(z^2) - mean(z)^2 with z = log(pred) - log(gt). Works on depth or inverse
// depth; the value is identical for both.
template <typename T>
ad::Var<T> eigen_scale_invariant_loss(ad::Var<T> pred, const Grid<T>& gt, const Mask& mask);

// Loss terms of one prediction scale. normal is present only on scales with a normals head.
template <typename T>
struct ScaleLosses {
  ad::Var<T> depth;
  ad::Var<T> gradient;
  ad::Var<T> confidence;
  std::optional<ad::Var<T>> normal;
};

// Weighted sum over terms and scales; every scale has weight one.
template <typename T>
ad::Var<T> total_loss(const std::vector<ScaleLosses<T>>& scales, const LossWeights& weights);

// Non-differentiable forms; each evaluates the op on a constant tape.
template <typename T>
double depth_loss_value(const Grid<T>& pred, const Grid<T>& gt, const Mask& mask, Reduction r = Reduction::Sum);
template <typename T>
double gradient_loss_value(const Grid<T>& pred, const Grid<T>& gt, const Mask& mask, Reduction r = Reduction::Sum);
template <typename T>
double confidence_loss_value(const Grid<T>& pred, const Grid<T>& target, const Mask& mask,
                             Reduction r = Reduction::Sum);
template <typename T>
double normal_loss_value(const Grid<T>& pred, const Grid<T>& gt, const Mask& mask, Reduction r = Reduction::Sum);
template <typename T>
double eigen_scale_invariant_loss_value(const Grid<T>& pred, const Grid<T>& gt, const Mask& mask);

// Scalar form of the weighted combination for one scale.
double total_loss_value(double depth, double gradient, double confidence, double normal, const LossWeights& w);

}  // namespace camconv
