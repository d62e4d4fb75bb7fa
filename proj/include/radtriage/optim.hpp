#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "radtriage/model.hpp"

namespace radtriage {

enum class Tier { frozen, encoder, head };

/// Parameter names split by learning-rate tier. Together the three lists
/// cover every model tensor exactly once.
struct ParamPartition {
  std::vector<std::string> frozen;
  std::vector<std::string> encoder_tier;
  std::vector<std::string> head_tier;

  Tier tier_of(const std::string& name) const;
};

/// Stem (patch projection, positional table), final norm and layers
/// [0, L-K) frozen; layers [L-K, L) in the encoder tier; head in the head tier.
/// ConfigError if K > L.
ParamPartition select_trainable(const ModelConfig& cfg, std::size_t unfreeze_k);

/// Sets requires_grad on every tensor according to its tier.
void apply_partition(ModelParams<float>& params, const ModelConfig& cfg, const ParamPartition& part);

/// Shape of the schedule in [0, 1]: linear warmup to 1, then half-cosine to 0.
double schedule_factor(std::size_t step, std::size_t total_steps, std::size_t warmup_steps);

/// peak * schedule_factor(step, total_steps, warmup_steps).
double lr_at(std::size_t step, std::size_t total_steps, std::size_t warmup_steps, double peak);

struct AdamWHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct Moments {
  std::vector<float> m;
  std::vector<float> v;
};

struct OptimizerState {
  std::uint64_t step = 0;  // completed advance() calls; the bias-correction exponent
  std::map<std::string, Moments> moments;

  void advance() { ++step; }
};

/// One AdamW update for the given tensors, reading each tensor's accumulated
/// gradient (missing gradient = zero). Decay is decoupled and applied only to
/// weight/embedding tensors. The caller advances `state` once per iteration.
/// NumericError naming the parameter on a non-finite gradient.
void adamw_step(std::span<const NamedTensor<float>> params, OptimizerState& state, double lr,
                const AdamWHyper& hyper);

}  // namespace radtriage
