#pragma once

#include <string>
#include <vector>

#include "camconv/autodiff.hpp"

namespace camconv {

// Central-difference checks in double precision over every differentiable
// primitive, every loss and the full network graph (at init and after ten
// training steps).
inline constexpr double kGradTolerance = 1e-4;

struct GradSuiteEntry {
  std::string name;
  ad::GradCheckResult result;
  bool pass = false;
};

// Without full, large inputs are checked on a deterministic subset of elements.
std::vector<GradSuiteEntry> run_gradient_suite(bool full);

}  // namespace camconv
