#pragma once

#include <cstddef>

#include "radtriage/rng.hpp"
#include "radtriage/tensor.hpp"

namespace radtriage {

enum class Mode { train, eval };

inline constexpr double kLayerNormEps = 1e-6;

namespace ops {

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T s);
template <typename T> Tensor<T> sum(const Tensor<T>& a);

/// c[i,j] = sum_t a[i,t] * b[t,j]
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// y = x W^T + b with W stored [out, in]. `x` may be [in] or [N, in].
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

/// Normalizes each last-axis slice with biased variance.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     double eps = kLayerNormEps);

template <typename T> Tensor<T> gelu_tanh(const Tensor<T>& x);
template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);

/// Inverted dropout. Eval mode returns `x` itself.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, Mode mode, RngStream& rng);

/// Row mean of an [N, D] tensor, giving [D].
template <typename T> Tensor<T> mean_rows(const Tensor<T>& x);

/// Scaled dot-product attention over pre-projected q, k, v [N, D] split into
/// `heads` column blocks. No masking.
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, std::size_t heads);

template <typename T>
struct AttentionWeights {
  Tensor<T> q_weight, q_bias;
  Tensor<T> k_weight, k_bias;
  Tensor<T> v_weight, v_bias;
  Tensor<T> out_weight, out_bias;
};

template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& x, const AttentionWeights<T>& w, std::size_t heads);

}  // namespace ops
}  // namespace radtriage
