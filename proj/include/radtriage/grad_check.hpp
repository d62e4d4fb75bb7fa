#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "radtriage/tensor.hpp"

namespace radtriage {

using GradFn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

struct GradCheckOptions {
  double step = 1e-4;
  /// Checks at most this many coordinates per input (0 = all), chosen by a
  /// fixed-seed draw so repeated runs probe the same coordinates.
  std::size_t max_coords_per_input = 0;
  std::uint64_t seed = 0x5eed;
};

/// Compares reverse-mode gradients of `fn` at `point` against central
/// differences. Non-scalar outputs are reduced with a fixed pseudo-random
/// weighting. Returns max |analytic - numeric| / max(1, |numeric|).
double grad_check(const GradFn& fn, const std::vector<Tensor<double>>& point,
                  const GradCheckOptions& options = {});

}  // namespace radtriage
