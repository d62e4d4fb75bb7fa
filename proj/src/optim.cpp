#include "radtriage/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "radtriage/errors.hpp"

namespace radtriage {

Tier ParamPartition::tier_of(const std::string& name) const {
  auto has = [&name](const std::vector<std::string>& v) { return std::find(v.begin(), v.end(), name) != v.end(); };
  if (has(encoder_tier)) return Tier::encoder;
  if (has(head_tier)) return Tier::head;
  return Tier::frozen;
}

ParamPartition select_trainable(const ModelConfig& cfg, std::size_t unfreeze_k) {
  const std::size_t layers = cfg.encoder.num_layers;
  if (unfreeze_k > layers) {
    throw ConfigError("unfreeze depth K=" + std::to_string(unfreeze_k) + " exceeds " +
                      std::to_string(layers) + " encoder layers");
  }
  const std::size_t first_trainable = layers - unfreeze_k;
  ParamPartition part;
  for (const auto& spec : model_parameter_specs(cfg)) {
    if (spec.name.rfind("head.", 0) == 0) {
      part.head_tier.push_back(spec.name);
      continue;
    }
    const std::string prefix = "encoder.layers.";
    if (spec.name.rfind(prefix, 0) == 0) {
      const std::size_t layer = std::stoul(spec.name.substr(prefix.size()));
      (layer >= first_trainable ? part.encoder_tier : part.frozen).push_back(spec.name);
      continue;
    }
    part.frozen.push_back(spec.name);
  }
  return part;
}

void apply_partition(ModelParams<float>& params, const ModelConfig& cfg, const ParamPartition& part) {
  for (auto& nt : params.named(cfg)) {
    nt.tensor->zero_grad();
    nt.tensor->set_requires_grad(part.tier_of(nt.name) != Tier::frozen);
  }
}

double schedule_factor(std::size_t step, std::size_t total_steps, std::size_t warmup_steps) {
  if (step < warmup_steps) return static_cast<double>(step) / static_cast<double>(warmup_steps);
  if (total_steps <= warmup_steps) return 1.0;
  const double progress = static_cast<double>(std::min(step, total_steps) - warmup_steps) /
                          static_cast<double>(total_steps - warmup_steps);
  return std::max(0.0, 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
}

double lr_at(std::size_t step, std::size_t total_steps, std::size_t warmup_steps, double peak) {
  return peak * schedule_factor(step, total_steps, warmup_steps);
}

void adamw_step(std::span<const NamedTensor<float>> params, OptimizerState& state, double lr,
                const AdamWHyper& hyper) {
  if (lr < 0.0) throw ParameterError("adamw_step: negative learning rate");
  if (state.step == 0) throw ParameterError("adamw_step: call OptimizerState::advance() first");
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(hyper.beta1, t);
  const double bc2 = 1.0 - std::pow(hyper.beta2, t);
  for (const auto& nt : params) {
    Tensor<float>& p = *nt.tensor;
    const std::size_t n = p.numel();
    auto& mom = state.moments[nt.name];
    if (mom.m.empty()) {
      mom.m.assign(n, 0.0f);
      mom.v.assign(n, 0.0f);
    }
    if (mom.m.size() != n) throw DimensionError("adamw_step: moment shape mismatch for " + nt.name);
    const std::vector<float> g = p.grad();
    for (float gi : g) {
      if (!std::isfinite(gi)) throw NumericError("non-finite gradient in " + nt.name);
    }
    const bool decay = nt.kind == ParamKind::weight || nt.kind == ParamKind::embedding;
    auto w = p.mutable_data();
    for (std::size_t i = 0; i < n; ++i) {
      double pi = w[i];
      if (decay) pi -= lr * hyper.weight_decay * pi;
      const double m = hyper.beta1 * mom.m[i] + (1.0 - hyper.beta1) * g[i];
      const double v = hyper.beta2 * mom.v[i] + (1.0 - hyper.beta2) * static_cast<double>(g[i]) * g[i];
      mom.m[i] = static_cast<float>(m);
      mom.v[i] = static_cast<float>(v);
      pi -= lr * (m / bc1) / (std::sqrt(v / bc2) + hyper.eps);
      w[i] = static_cast<float>(pi);
    }
  }
}

}  // namespace radtriage
