#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "camda/ad/tensor.hpp"

namespace camda::netzoo {

struct GradCheckOptions {
  double step = 1e-4;          // central-difference step h
  double tolerance = 1e-3;     // max relative error
  std::size_t samples_per_tensor = 0;  // 0 checks every element
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  std::string name;
  double max_relative_error = 0;
  std::size_t elements_checked = 0;
  bool passed = false;
};

/// Compares reverse-mode gradients of `loss` w.r.t. each tensor in `inputs`
/// against central finite differences. Per tensor the error is
/// max|analytic - numeric| / max(max|analytic|, max|numeric|); tensors
/// whose gradients both stay below the roundoff level of the differences,
/// max(1e-8, 1e-12 / h), count as agreeing.
GradCheckResult check_gradients(const std::string& name,
                                const std::function<ad::Tensor<double>()>& loss,
                                const std::vector<ad::Tensor<double>>& inputs,
                                const GradCheckOptions& options = {});

/// Finite-difference checks of every differentiable op and small composites.
std::vector<GradCheckResult> op_gradient_suite(std::uint64_t seed = 0);

/// Whole-network checks: BD, SD, ESD and the nine-block generator on a
/// 1x3x32x32 input, sampling a few entries per parameter tensor. The step
/// is 1e-6 so that perturbations rarely cross a ReLU kink in these deep stacks.
std::vector<GradCheckResult> network_gradient_suite(std::uint64_t seed = 0,
                                                    std::size_t samples_per_tensor = 3);

}  // namespace camda::netzoo
