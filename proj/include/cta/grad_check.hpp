#ifndef CTA_GRAD_CHECK_HPP_
#define CTA_GRAD_CHECK_HPP_

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "cta/parameters.hpp"
#include "cta/tensor.hpp"

namespace cta {

struct GradCheckOptions {
  /// Coordinates whose one-sided slopes differ by more than this (relative)
  /// sit on a non-differentiable point and are excluded.
  double kink_tolerance = 1e-3;
  /// 0 checks every coordinate; otherwise an evenly strided subset per tensor.
  std::size_t max_coords_per_tensor = 0;
};

struct GradCheckCoordinate {
  std::string tensor;
  std::size_t index = 0;
};

struct GradCheckResult {
  /// max |analytic - central| / max(1, |central|) over checked coordinates.
  double max_rel_error = 0.0;
  GradCheckCoordinate worst;
  std::size_t checked = 0;
  std::vector<GradCheckCoordinate> excluded;
};

/// Builds the scalar loss from the current parameter values. Called once
/// under a tape for the analytic gradient and twice per coordinate for the
/// central difference.
using LossBuilder = std::function<Tensor()>;

/// Compares reverse-mode gradients against central differences with step h.
/// Parameter values are restored before returning. Non-finite values during
/// the analytic pass raise NumericError naming the op that produced them.
GradCheckResult grad_check(const LossBuilder& loss, ParameterList params, double h,
                           const GradCheckOptions& options = {});

/// Single-input form: f maps x0 (made a gradient leaf) to a scalar.
GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x0,
                           double h, const GradCheckOptions& options = {});

}  // namespace cta

#endif  // CTA_GRAD_CHECK_HPP_
