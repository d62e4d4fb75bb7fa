#include "radtriage/model.hpp"

#include "radtriage/errors.hpp"

namespace radtriage {

std::vector<ParamSpec> model_parameter_specs(const ModelConfig& cfg) {
  auto specs = encoder_parameter_specs(cfg.encoder);
  auto head = head_parameter_specs(cfg.encoder.embed_dim, cfg.head);
  specs.insert(specs.end(), head.begin(), head.end());
  return specs;
}

template <typename T>
ModelParams<T> ModelParams<T>::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  RngStream enc_rng = RngStream::substream(seed, 1);
  RngStream head_rng = RngStream::substream(seed, 2);
  return {EncoderParams<T>::init(cfg.encoder, enc_rng),
          HeadParams<T>::init(cfg.encoder.embed_dim, cfg.head, head_rng)};
}

template <typename T>
ModelParams<T> ModelParams<T>::zeros(const ModelConfig& cfg) {
  cfg.validate();
  return {EncoderParams<T>::zeros(cfg.encoder), HeadParams<T>::zeros(cfg.encoder.embed_dim, cfg.head)};
}

template <typename T>
std::vector<NamedTensor<T>> ModelParams<T>::named(const ModelConfig& cfg) {
  const auto specs = model_parameter_specs(cfg);
  auto slots = encoder.tensors();
  auto head_slots = head.tensors();
  slots.insert(slots.end(), head_slots.begin(), head_slots.end());
  if (slots.size() != specs.size()) {
    throw ConfigError("parameter set does not match model config (" + std::to_string(slots.size()) +
                      " tensors, expected " + std::to_string(specs.size()) + ")");
  }
  std::vector<NamedTensor<T>> out;
  out.reserve(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (!slots[i]->defined() || slots[i]->shape() != specs[i].shape) {
      throw ConfigError("parameter " + specs[i].name + " has wrong shape");
    }
    out.push_back({specs[i].name, slots[i], specs[i].kind});
  }
  return out;
}

template <typename T>
ModelParams<T> ModelParams<T>::clone() const {
  ModelParams copy = *this;
  for (auto* t : copy.encoder.tensors()) *t = t->clone();
  for (auto* t : copy.head.tensors()) *t = t->clone();
  return copy;
}

template <typename T>
Tensor<T> model_logit(const Tensor<T>& image, const ModelParams<T>& params, const ModelConfig& cfg,
                      Mode mode, RngStream& rng) {
  const auto z = mean_pool(encode(image, params.encoder, cfg.encoder, mode));
  return head_logit(z, params.head, mode, rng);
}

template <typename T>
double predict_view(const Tensor<T>& image, const ModelParams<T>& params, const ModelConfig& cfg) {
  RngStream unused;
  const auto z = mean_pool(encode(image, params.encoder, cfg.encoder, Mode::eval));
  return static_cast<double>(head_forward(z, params.head, Mode::eval, unused).item());
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template Tensor<float> model_logit(const Tensor<float>&, const ModelParams<float>&, const ModelConfig&,
                                   Mode, RngStream&);
template Tensor<double> model_logit(const Tensor<double>&, const ModelParams<double>&,
                                    const ModelConfig&, Mode, RngStream&);
template double predict_view(const Tensor<float>&, const ModelParams<float>&, const ModelConfig&);
template double predict_view(const Tensor<double>&, const ModelParams<double>&, const ModelConfig&);

}  // namespace radtriage
