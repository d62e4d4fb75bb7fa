#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "radtriage/ops.hpp"
#include "radtriage/rng.hpp"
#include "radtriage/tensor.hpp"

namespace radtriage {

/// Architecture of the vision tower. Square inputs only.
struct EncoderConfig {
  std::size_t image_size = 896;
  std::size_t patch_size = 14;
  std::size_t embed_dim = 1152;
  std::size_t num_layers = 27;
  std::size_t num_heads = 16;
  std::size_t ffn_hidden = 4304;
  std::size_t max_positions = 4096;

  std::size_t grid() const { return image_size / patch_size; }
  std::size_t token_count() const { return grid() * grid(); }
  std::size_t patch_dim() const { return 3 * patch_size * patch_size; }

  /// Throws ConfigError on the first violated invariant.
  void validate() const;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// 896px input, 14px patches, 1152 wide, 27 blocks, 4304 FFN, 4096 positions.
EncoderConfig paper_preset();
/// 56px input, 14px patches (16 tokens), 48 wide, 4 blocks, 4 heads, 180 FFN.
EncoderConfig tiny_preset();
/// "paper" or "tiny"; ConfigError otherwise.
EncoderConfig preset_by_name(const std::string& name);

enum class ParamKind { weight, bias, norm_gamma, norm_beta, embedding };

struct ParamSpec {
  std::string name;
  Shape shape;
  ParamKind kind;
};

/// Every encoder parameter in canonical order. Pure shape arithmetic: nothing
/// is allocated, so this is safe to call on the full-size preset.
std::vector<ParamSpec> encoder_parameter_specs(const EncoderConfig& cfg);
/// Closed-form parameter count.
std::size_t encoder_parameter_count(const EncoderConfig& cfg);

template <typename T>
struct EncoderLayerParams {
  Tensor<T> ln1_gamma, ln1_beta;
  ops::AttentionWeights<T> attn;
  Tensor<T> ln2_gamma, ln2_beta;
  Tensor<T> fc1_weight, fc1_bias;  // [ffn_hidden, D], [ffn_hidden]
  Tensor<T> fc2_weight, fc2_bias;  // [D, ffn_hidden], [D]
};

template <typename T>
struct EncoderParams {
  Tensor<T> patch_weight;  // [D, 3*P*P]
  Tensor<T> patch_bias;    // [D]
  Tensor<T> pos_table;     // [max_positions, D]
  std::vector<EncoderLayerParams<T>> layers;
  Tensor<T> final_gamma, final_beta;

  /// Weights truncated-normal(0.02), biases zero, norms gamma=1 beta=0.
  static EncoderParams init(const EncoderConfig& cfg, RngStream& rng);
  /// All tensors zero except norm gammas (one).
  static EncoderParams zeros(const EncoderConfig& cfg);

  /// Pointers to every tensor, in the order of encoder_parameter_specs().
  std::vector<Tensor<T>*> tensors();
  std::vector<const Tensor<T>*> tensors() const;
};

/// [3, H, W] -> [N, 3*P*P]; patches row-major, each flattened channel, row, column.
template <typename T>
Tensor<T> patchify(const Tensor<T>& image, std::size_t patch_size);

/// Strided patch projection (kernel = stride = P) as patchify + linear.
template <typename T>
Tensor<T> patchify_project(const Tensor<T>& image, const EncoderParams<T>& params,
                           const EncoderConfig& cfg);

/// Adds the first N rows of the positional table.
template <typename T>
Tensor<T> add_positional(const Tensor<T>& tokens, const Tensor<T>& pos_table);

/// Pre-norm block: u = x + attn(ln1(x)); out = u + fc2(gelu(fc1(ln2(u)))).
template <typename T>
Tensor<T> encoder_layer_forward(const Tensor<T>& tokens, const EncoderLayerParams<T>& layer,
                                std::size_t num_heads, Mode mode = Mode::eval);

/// patchify_project -> add_positional -> layers -> final layer norm.
template <typename T>
Tensor<T> encode(const Tensor<T>& image, const EncoderParams<T>& params, const EncoderConfig& cfg,
                 Mode mode = Mode::eval);

template <typename T>
Tensor<T> mean_pool(const Tensor<T>& tokens);

}  // namespace radtriage
