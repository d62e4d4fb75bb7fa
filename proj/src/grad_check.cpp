#include "radtriage/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "radtriage/errors.hpp"
#include "radtriage/ops.hpp"
#include "radtriage/rng.hpp"

namespace radtriage {
namespace {

double reduce_value(const Tensor<double>& out, const std::vector<double>& weights) {
  double acc = 0.0;
  for (std::size_t i = 0; i < out.numel(); ++i) acc += weights[i] * out[i];
  if (!std::isfinite(acc)) throw NumericError("grad_check: non-finite function value");
  return acc;
}

}  // namespace

double grad_check(const GradFn& fn, const std::vector<Tensor<double>>& point,
                  const GradCheckOptions& options) {
  std::vector<Tensor<double>> inputs;
  inputs.reserve(point.size());
  for (const auto& p : point) {
    auto t = p.detach();
    t.set_requires_grad(true);
    inputs.push_back(t);
  }

  const Tensor<double> out = fn(inputs);
  out.check_finite("grad_check output");
  std::vector<double> weights(out.numel(), 1.0);
  if (out.numel() > 1) {
    RngStream rng(options.seed);
    for (auto& w : weights) w = rng.uniform(0.5, 1.5);
  }
  const Tensor<double> loss = ops::sum(ops::mul(out, Tensor<double>(out.shape(), weights)));
  loss.backward();

  double worst = 0.0;
  RngStream pick(options.seed ^ 0xC0FFEEULL);
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const std::vector<double> analytic = inputs[t].grad();
    for (double g : analytic) {
      if (!std::isfinite(g)) throw NumericError("grad_check: non-finite analytic gradient");
    }
    std::vector<std::size_t> coords(point[t].numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_input > 0 && coords.size() > options.max_coords_per_input) {
      for (std::size_t i = 0; i < options.max_coords_per_input; ++i) {
        std::swap(coords[i], coords[i + pick.below(coords.size() - i)]);
      }
      coords.resize(options.max_coords_per_input);
    }

    for (std::size_t idx : coords) {
      auto eval_at = [&](double delta) {
        std::vector<Tensor<double>> probe;
        probe.reserve(point.size());
        for (std::size_t u = 0; u < point.size(); ++u) probe.push_back(point[u].detach());
        probe[t].mutable_data()[idx] += delta;
        return reduce_value(fn(probe), weights);
      };
      const double numeric = (eval_at(options.step) - eval_at(-options.step)) / (2.0 * options.step);
      const double err = std::abs(analytic[idx] - numeric) / std::max(1.0, std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace radtriage
