#pragma once

#include <string>
#include <utility>
#include <vector>

#include "radtriage/encoder.hpp"
#include "radtriage/head.hpp"

namespace radtriage {

struct ModelConfig {
  EncoderConfig encoder;
  HeadConfig head;

  void validate() const {
    encoder.validate();
    head.validate();
  }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Encoder specs followed by head specs; this order is the canonical tensor
/// order for checkpoints and optimizer state.
std::vector<ParamSpec> model_parameter_specs(const ModelConfig& cfg);

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T>* tensor;
  ParamKind kind;
};

template <typename T>
struct ModelParams {
  EncoderParams<T> encoder;
  HeadParams<T> head;

  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed);
  static ModelParams zeros(const ModelConfig& cfg);

  std::vector<NamedTensor<T>> named(const ModelConfig& cfg);
  /// Deep copy of every tensor value.
  ModelParams clone() const;
};

/// Full single-view forward pass returning the pre-sigmoid logit [1].
template <typename T>
Tensor<T> model_logit(const Tensor<T>& image, const ModelParams<T>& params, const ModelConfig& cfg,
                      Mode mode, RngStream& rng);

/// Eval-mode abnormality probability for one preprocessed view.
template <typename T>
double predict_view(const Tensor<T>& image, const ModelParams<T>& params, const ModelConfig& cfg);

}  // namespace radtriage
