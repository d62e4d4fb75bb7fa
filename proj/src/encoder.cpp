#include "radtriage/encoder.hpp"

#include "radtriage/errors.hpp"

namespace radtriage {

void EncoderConfig::validate() const {
  if (image_size == 0 || patch_size == 0 || embed_dim == 0 || num_heads == 0 || ffn_hidden == 0 ||
      max_positions == 0) {
    throw ConfigError("encoder config: all extents must be positive");
  }
  if (image_size % patch_size != 0) {
    throw ConfigError("encoder config: image_size " + std::to_string(image_size) +
                      " not divisible by patch_size " + std::to_string(patch_size));
  }
  if (token_count() > max_positions) {
    throw ConfigError("encoder config: " + std::to_string(token_count()) +
                      " tokens exceed max_positions " + std::to_string(max_positions));
  }
  if (embed_dim % num_heads != 0) {
    throw ConfigError("encoder config: embed_dim " + std::to_string(embed_dim) +
                      " not divisible by num_heads " + std::to_string(num_heads));
  }
}

EncoderConfig paper_preset() { return EncoderConfig{}; }

EncoderConfig tiny_preset() {
  EncoderConfig cfg;
  cfg.image_size = 56;
  cfg.patch_size = 14;
  cfg.embed_dim = 48;
  cfg.num_layers = 4;
  cfg.num_heads = 4;
  cfg.ffn_hidden = 180;
  cfg.max_positions = 64;
  return cfg;
}

EncoderConfig preset_by_name(const std::string& name) {
  if (name == "paper") return paper_preset();
  if (name == "tiny") return tiny_preset();
  throw ConfigError("unknown preset '" + name + "' (expected paper or tiny)");
}

std::vector<ParamSpec> encoder_parameter_specs(const EncoderConfig& cfg) {
  const std::size_t d = cfg.embed_dim, f = cfg.ffn_hidden;
  std::vector<ParamSpec> specs;
  specs.push_back({"encoder.patch_proj.weight", {d, cfg.patch_dim()}, ParamKind::weight});
  specs.push_back({"encoder.patch_proj.bias", {d}, ParamKind::bias});
  specs.push_back({"encoder.pos_table", {cfg.max_positions, d}, ParamKind::embedding});
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const std::string p = "encoder.layers." + std::to_string(l) + ".";
    specs.push_back({p + "ln1.gamma", {d}, ParamKind::norm_gamma});
    specs.push_back({p + "ln1.beta", {d}, ParamKind::norm_beta});
    for (const char* proj : {"q_proj", "k_proj", "v_proj", "out_proj"}) {
      specs.push_back({p + "attn." + proj + ".weight", {d, d}, ParamKind::weight});
      specs.push_back({p + "attn." + proj + ".bias", {d}, ParamKind::bias});
    }
    specs.push_back({p + "ln2.gamma", {d}, ParamKind::norm_gamma});
    specs.push_back({p + "ln2.beta", {d}, ParamKind::norm_beta});
    specs.push_back({p + "ffn.fc1.weight", {f, d}, ParamKind::weight});
    specs.push_back({p + "ffn.fc1.bias", {f}, ParamKind::bias});
    specs.push_back({p + "ffn.fc2.weight", {d, f}, ParamKind::weight});
    specs.push_back({p + "ffn.fc2.bias", {d}, ParamKind::bias});
  }
  specs.push_back({"encoder.final_ln.gamma", {d}, ParamKind::norm_gamma});
  specs.push_back({"encoder.final_ln.beta", {d}, ParamKind::norm_beta});
  return specs;
}

std::size_t encoder_parameter_count(const EncoderConfig& cfg) {
  const std::size_t d = cfg.embed_dim, f = cfg.ffn_hidden;
  const std::size_t stem = d * cfg.patch_dim() + d + cfg.max_positions * d;
  const std::size_t per_layer = 4 * d      // two layer norms
                                + 4 * (d * d + d)  // q, k, v, out
                                + (f * d + f) + (d * f + d);
  return stem + cfg.num_layers * per_layer + 2 * d;
}

template <typename T>
std::vector<Tensor<T>*> EncoderParams<T>::tensors() {
  std::vector<Tensor<T>*> out{&patch_weight, &patch_bias, &pos_table};
  for (auto& l : layers) {
    out.insert(out.end(), {&l.ln1_gamma, &l.ln1_beta, &l.attn.q_weight, &l.attn.q_bias,
                           &l.attn.k_weight, &l.attn.k_bias, &l.attn.v_weight, &l.attn.v_bias,
                           &l.attn.out_weight, &l.attn.out_bias, &l.ln2_gamma, &l.ln2_beta,
                           &l.fc1_weight, &l.fc1_bias, &l.fc2_weight, &l.fc2_bias});
  }
  out.push_back(&final_gamma);
  out.push_back(&final_beta);
  return out;
}

template <typename T>
std::vector<const Tensor<T>*> EncoderParams<T>::tensors() const {
  auto mut = const_cast<EncoderParams*>(this)->tensors();
  return {mut.begin(), mut.end()};
}

template <typename T>
EncoderParams<T> EncoderParams<T>::zeros(const EncoderConfig& cfg) {
  cfg.validate();
  EncoderParams p;
  p.layers.resize(cfg.num_layers);
  const auto specs = encoder_parameter_specs(cfg);
  const auto slots = p.tensors();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const T fill = specs[i].kind == ParamKind::norm_gamma ? T(1) : T(0);
    *slots[i] = Tensor<T>(specs[i].shape, fill);
  }
  return p;
}

template <typename T>
EncoderParams<T> EncoderParams<T>::init(const EncoderConfig& cfg, RngStream& rng) {
  EncoderParams p = zeros(cfg);
  const auto specs = encoder_parameter_specs(cfg);
  const auto slots = p.tensors();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].kind != ParamKind::weight && specs[i].kind != ParamKind::embedding) continue;
    for (auto& v : slots[i]->mutable_data()) v = static_cast<T>(rng.truncated_normal(0.02));
  }
  return p;
}

template <typename T>
Tensor<T> patchify(const Tensor<T>& image, std::size_t patch_size) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw DimensionError("patchify: expected [3, H, W], got " + shape_str(image.shape()));
  }
  const std::size_t h = image.dim(1), w = image.dim(2), p = patch_size;
  if (p == 0 || h % p != 0 || w % p != 0) {
    throw DimensionError("patchify: " + std::to_string(h) + "x" + std::to_string(w) +
                         " not divisible by patch " + std::to_string(p));
  }
  const std::size_t gh = h / p, gw = w / p, pd = 3 * p * p;
  // src[k] is the image offset feeding patch element k.
  std::vector<std::size_t> src(gh * gw * pd);
  std::size_t k = 0;
  for (std::size_t py = 0; py < gh; ++py)
    for (std::size_t px = 0; px < gw; ++px)
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < p; ++y)
          for (std::size_t x = 0; x < p; ++x)
            src[k++] = (c * h + py * p + y) * w + px * p + x;
  const auto iv = image.data();
  std::vector<T> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = iv[src[i]];
  return make_result<T>(Shape{gh * gw, pd}, std::move(out), {image},
                        [src = std::move(src)](TensorNode<T>& node) {
    auto& g = node.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < src.size(); ++i) g[src[i]] += node.grad[i];
  });
}

template <typename T>
Tensor<T> patchify_project(const Tensor<T>& image, const EncoderParams<T>& params,
                           const EncoderConfig& cfg) {
  if (image.rank() != 3 || image.dim(1) != cfg.image_size || image.dim(2) != cfg.image_size) {
    throw DimensionError("patchify_project: image " + shape_str(image.shape()) +
                         " does not match configured size " + std::to_string(cfg.image_size));
  }
  return ops::linear(patchify(image, cfg.patch_size), params.patch_weight, params.patch_bias);
}

template <typename T>
Tensor<T> add_positional(const Tensor<T>& tokens, const Tensor<T>& pos_table) {
  if (tokens.rank() != 2 || pos_table.rank() != 2 || tokens.dim(1) != pos_table.dim(1)) {
    throw DimensionError("add_positional: tokens " + shape_str(tokens.shape()) +
                         " incompatible with table " + shape_str(pos_table.shape()));
  }
  const std::size_t n = tokens.dim(0);
  if (n > pos_table.dim(0)) {
    throw CapacityError("add_positional: " + std::to_string(n) + " tokens exceed " +
                        std::to_string(pos_table.dim(0)) + " positions");
  }
  const std::size_t count = tokens.numel();
  std::vector<T> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = tokens[i] + pos_table[i];
  return make_result<T>(tokens.shape(), std::move(out), {tokens, pos_table},
                        [count](TensorNode<T>& node) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (!node.parents[p]->requires_grad) continue;
      auto& g = node.parents[p]->ensure_grad();
      for (std::size_t i = 0; i < count; ++i) g[i] += node.grad[i];
    }
  });
}

template <typename T>
Tensor<T> encoder_layer_forward(const Tensor<T>& tokens, const EncoderLayerParams<T>& layer,
                                std::size_t num_heads, Mode) {
  const auto attn = ops::multi_head_attention(
      ops::layer_norm(tokens, layer.ln1_gamma, layer.ln1_beta), layer.attn, num_heads);
  const auto u = ops::add(tokens, attn);
  const auto hidden = ops::gelu_tanh(
      ops::linear(ops::layer_norm(u, layer.ln2_gamma, layer.ln2_beta), layer.fc1_weight, layer.fc1_bias));
  return ops::add(u, ops::linear(hidden, layer.fc2_weight, layer.fc2_bias));
}

template <typename T>
Tensor<T> encode(const Tensor<T>& image, const EncoderParams<T>& params, const EncoderConfig& cfg,
                 Mode mode) {
  if (params.layers.size() != cfg.num_layers) {
    throw ConfigError("encode: parameter set has " + std::to_string(params.layers.size()) +
                      " layers, config expects " + std::to_string(cfg.num_layers));
  }
  auto x = add_positional(patchify_project(image, params, cfg), params.pos_table);
  for (const auto& layer : params.layers) x = encoder_layer_forward(x, layer, cfg.num_heads, mode);
  return ops::layer_norm(x, params.final_gamma, params.final_beta);
}

template <typename T>
Tensor<T> mean_pool(const Tensor<T>& tokens) {
  return ops::mean_rows(tokens);
}

#define RADTRIAGE_INSTANTIATE_ENCODER(T)                                                       \
  template struct EncoderParams<T>;                                                            \
  template Tensor<T> patchify(const Tensor<T>&, std::size_t);                                  \
  template Tensor<T> patchify_project(const Tensor<T>&, const EncoderParams<T>&,               \
                                      const EncoderConfig&);                                   \
  template Tensor<T> add_positional(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> encoder_layer_forward(const Tensor<T>&, const EncoderLayerParams<T>&,     \
                                           std::size_t, Mode);                                 \
  template Tensor<T> encode(const Tensor<T>&, const EncoderParams<T>&, const EncoderConfig&,   \
                            Mode);                                                             \
  template Tensor<T> mean_pool(const Tensor<T>&);

RADTRIAGE_INSTANTIATE_ENCODER(float)
RADTRIAGE_INSTANTIATE_ENCODER(double)

#undef RADTRIAGE_INSTANTIATE_ENCODER

}  // namespace radtriage
