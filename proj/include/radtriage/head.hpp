#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "radtriage/encoder.hpp"
#include "radtriage/ops.hpp"
#include "radtriage/tensor.hpp"

namespace radtriage {

/// Widths and dropout rates of the pooled-embedding classifier.
struct HeadConfig {
  std::size_t hidden1 = 512;
  std::size_t hidden2 = 128;
  double dropout1 = 0.30;
  double dropout2 = 0.20;

  void validate() const;
  friend bool operator==(const HeadConfig&, const HeadConfig&) = default;
};

std::vector<ParamSpec> head_parameter_specs(std::size_t embed_dim, const HeadConfig& cfg);

template <typename T>
struct HeadParams {
  Tensor<T> fc1_weight, fc1_bias;  // [hidden1, D]
  Tensor<T> fc2_weight, fc2_bias;  // [hidden2, hidden1]
  Tensor<T> fc3_weight, fc3_bias;  // [1, hidden2]
  double dropout1 = 0.30;
  double dropout2 = 0.20;

  static HeadParams zeros(std::size_t embed_dim, const HeadConfig& cfg);
  static HeadParams init(std::size_t embed_dim, const HeadConfig& cfg, RngStream& rng);

  std::size_t embed_dim() const { return fc1_weight.dim(1); }
  std::vector<Tensor<T>*> tensors();
  std::vector<const Tensor<T>*> tensors() const;
};

/// Folds a per-feature standardization of the input, (z - mean) / std, into
/// fc1 so the first layer sees centred, unit-scale features. Shapes are
/// unchanged. ParameterError on a width mismatch or std <= 0.
template <typename T>
void fold_input_standardization(HeadParams<T>& params, std::span<const double> mean, std::span<const double> std);

/// Pre-sigmoid output: fc3(drop(relu(fc2(drop(relu(fc1(z))))))), shape [1].
template <typename T>
Tensor<T> head_logit(const Tensor<T>& z, const HeadParams<T>& params, Mode mode, RngStream& rng);

/// sigmoid(head_logit(...)), shape [1].
template <typename T>
Tensor<T> head_forward(const Tensor<T>& z, const HeadParams<T>& params, Mode mode, RngStream& rng);

inline constexpr double kProbClamp = 1e-7;

/// -[w*y*log p + (1-y)*log(1-p)] with p clamped to [1e-7, 1-1e-7]. `p` has one
/// element; label must be 0 or 1.
template <typename T>
Tensor<T> bce_loss(const Tensor<T>& p, int label, double pos_weight = 1.0);

/// The same objective evaluated from the logit without forming p, so the
/// gradient does not vanish when the sigmoid saturates in 32-bit.
template <typename T>
Tensor<T> bce_with_logit(const Tensor<T>& logit, int label, double pos_weight = 1.0);

}  // namespace radtriage
