#include "radtriage/head.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "radtriage/errors.hpp"

namespace radtriage {

void HeadConfig::validate() const {
  if (hidden1 == 0 || hidden2 == 0) throw ConfigError("head config: widths must be positive");
  if (!(dropout1 >= 0.0 && dropout1 < 1.0) || !(dropout2 >= 0.0 && dropout2 < 1.0)) {
    throw ConfigError("head config: dropout rates must lie in [0, 1)");
  }
}

std::vector<ParamSpec> head_parameter_specs(std::size_t embed_dim, const HeadConfig& cfg) {
  return {
      {"head.fc1.weight", {cfg.hidden1, embed_dim}, ParamKind::weight},
      {"head.fc1.bias", {cfg.hidden1}, ParamKind::bias},
      {"head.fc2.weight", {cfg.hidden2, cfg.hidden1}, ParamKind::weight},
      {"head.fc2.bias", {cfg.hidden2}, ParamKind::bias},
      {"head.fc3.weight", {1, cfg.hidden2}, ParamKind::weight},
      {"head.fc3.bias", {1}, ParamKind::bias},
  };
}

template <typename T>
std::vector<Tensor<T>*> HeadParams<T>::tensors() {
  return {&fc1_weight, &fc1_bias, &fc2_weight, &fc2_bias, &fc3_weight, &fc3_bias};
}

template <typename T>
std::vector<const Tensor<T>*> HeadParams<T>::tensors() const {
  return {&fc1_weight, &fc1_bias, &fc2_weight, &fc2_bias, &fc3_weight, &fc3_bias};
}

template <typename T>
HeadParams<T> HeadParams<T>::zeros(std::size_t embed_dim, const HeadConfig& cfg) {
  cfg.validate();
  HeadParams p;
  p.dropout1 = cfg.dropout1;
  p.dropout2 = cfg.dropout2;
  const auto specs = head_parameter_specs(embed_dim, cfg);
  const auto slots = p.tensors();
  for (std::size_t i = 0; i < specs.size(); ++i) *slots[i] = Tensor<T>(specs[i].shape);
  return p;
}

template <typename T>
HeadParams<T> HeadParams<T>::init(std::size_t embed_dim, const HeadConfig& cfg, RngStream& rng) {
  HeadParams p = zeros(embed_dim, cfg);
  // He-style scaling for the ReLU stack.
  for (Tensor<T>* w : {&p.fc1_weight, &p.fc2_weight, &p.fc3_weight}) {
    const double std = std::sqrt(2.0 / static_cast<double>(w->dim(1)));
    for (auto& v : w->mutable_data()) v = static_cast<T>(rng.truncated_normal(std));
  }
  return p;
}

template <typename T>
void fold_input_standardization(HeadParams<T>& params, std::span<const double> mean, std::span<const double> std) {
  const std::size_t d = params.embed_dim();
  if (mean.size() != d || std.size() != d) throw ParameterError("fold_input_standardization: width mismatch");
  for (double s : std) {
    if (!(s > 0.0)) throw ParameterError("fold_input_standardization: std must be positive");
  }
  auto w = params.fc1_weight.mutable_data();
  auto b = params.fc1_bias.mutable_data();
  const std::size_t rows = params.fc1_weight.dim(0);
  for (std::size_t o = 0; o < rows; ++o) {
    double shift = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double scaled = static_cast<double>(w[o * d + i]) / std[i];
      w[o * d + i] = static_cast<T>(scaled);
      shift += scaled * mean[i];
    }
    b[o] = static_cast<T>(static_cast<double>(b[o]) - shift);
  }
}

template <typename T>
Tensor<T> head_logit(const Tensor<T>& z, const HeadParams<T>& params, Mode mode, RngStream& rng) {
  if (z.rank() != 1 || z.dim(0) != params.embed_dim()) {
    throw ConfigError("head: embedding " + shape_str(z.shape()) + " does not match head input width " +
                      std::to_string(params.embed_dim()));
  }
  z.check_finite("head input");
  auto h = ops::dropout(ops::relu(ops::linear(z, params.fc1_weight, params.fc1_bias)),
                        params.dropout1, mode, rng);
  h = ops::dropout(ops::relu(ops::linear(h, params.fc2_weight, params.fc2_bias)), params.dropout2,
                   mode, rng);
  return ops::linear(h, params.fc3_weight, params.fc3_bias);
}

template <typename T>
Tensor<T> head_forward(const Tensor<T>& z, const HeadParams<T>& params, Mode mode, RngStream& rng) {
  const auto p = ops::sigmoid(head_logit(z, params, mode, rng));
  // A saturated sigmoid rounds to exactly 0 or 1; keep the probability in
  // the open interval and pass the gradient straight through.
  const T lo = std::numeric_limits<T>::denorm_min();
  const T hi = std::nextafter(T(1), T(0));
  const T v = std::clamp(p[0], lo, hi);
  if (v == p[0]) return p;
  return make_result<T>(Shape{1}, {v}, {p}, [](TensorNode<T>& out) {
    out.parents[0]->ensure_grad()[0] += out.grad[0];
  });
}

namespace {
void check_label(int label) {
  if (label != 0 && label != 1) throw LabelError("label must be 0 or 1, got " + std::to_string(label));
}
}  // namespace

template <typename T>
Tensor<T> bce_loss(const Tensor<T>& p, int label, double pos_weight) {
  check_label(label);
  if (p.numel() != 1) throw DimensionError("bce_loss: expects a single probability");
  const double pc = std::clamp(static_cast<double>(p[0]), kProbClamp, 1.0 - kProbClamp);
  const double y = label;
  const double loss = -(pos_weight * y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
  // d/dp evaluated at the clamped point; the clamp itself is passed straight through.
  const double dldp = -(pos_weight * y / pc) + (1.0 - y) / (1.0 - pc);
  return make_result<T>(Shape{1}, {static_cast<T>(loss)}, {p}, [dldp](TensorNode<T>& out) {
    out.parents[0]->ensure_grad()[0] += out.grad[0] * static_cast<T>(dldp);
  });
}

template <typename T>
Tensor<T> bce_with_logit(const Tensor<T>& logit, int label, double pos_weight) {
  check_label(label);
  if (logit.numel() != 1) throw DimensionError("bce_with_logit: expects a single logit");
  const double z = logit[0];
  if (!std::isfinite(z)) throw NumericError("bce_with_logit: non-finite logit");
  // log(1 + e^x) without overflow
  auto softplus = [](double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); };
  const double y = label;
  const double loss = pos_weight * y * softplus(-z) + (1.0 - y) * softplus(z);
  const double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  const double dldz = pos_weight * y * (p - 1.0) + (1.0 - y) * p;
  return make_result<T>(Shape{1}, {static_cast<T>(loss)}, {logit}, [dldz](TensorNode<T>& out) {
    out.parents[0]->ensure_grad()[0] += out.grad[0] * static_cast<T>(dldz);
  });
}

#define RADTRIAGE_INSTANTIATE_HEAD(T)                                                     \
  template struct HeadParams<T>;                                                          \
  template void fold_input_standardization(HeadParams<T>&, std::span<const double>, std::span<const double>); \
  template Tensor<T> head_logit(const Tensor<T>&, const HeadParams<T>&, Mode, RngStream&); \
  template Tensor<T> head_forward(const Tensor<T>&, const HeadParams<T>&, Mode, RngStream&); \
  template Tensor<T> bce_loss(const Tensor<T>&, int, double);                             \
  template Tensor<T> bce_with_logit(const Tensor<T>&, int, double);

RADTRIAGE_INSTANTIATE_HEAD(float)
RADTRIAGE_INSTANTIATE_HEAD(double)

#undef RADTRIAGE_INSTANTIATE_HEAD

}  // namespace radtriage
