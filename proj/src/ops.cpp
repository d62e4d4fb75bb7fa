#include "radtriage/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "radtriage/errors.hpp"

namespace radtriage::ops {
namespace {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

template <typename T>
bool wants(const TensorNode<T>& out, std::size_t i) {
  return out.parents[i]->requires_grad;
}

template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary(const Tensor<T>& x, Fwd fwd, Deriv deriv) {
  const auto in = x.data();
  std::vector<T> y(in.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = fwd(in[i]);
  return make_result<T>(x.shape(), std::move(y), {x}, [deriv](TensorNode<T>& out) {
    const auto& xv = out.parents[0]->value;
    auto& g = out.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i] * deriv(xv[i], out.value[i]);
  });
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] + b[i];
  return make_result<T>(a.shape(), std::move(y), {a, b}, [](TensorNode<T>& out) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (!wants(out, p)) continue;
      auto& g = out.parents[p]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * b[i];
  return make_result<T>(a.shape(), std::move(y), {a, b}, [](TensorNode<T>& out) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (!wants(out, p)) continue;
      const auto& other = out.parents[1 - p]->value;
      auto& g = out.parents[p]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i] * other[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  std::vector<T> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * s;
  return make_result<T>(a.shape(), std::move(y), {a}, [s](TensorNode<T>& out) {
    auto& g = out.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i] * s;
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T acc = T(0);
  for (T v : a.data()) acc += v;
  return make_result<T>(Shape{1}, {acc}, {a}, [](TensorNode<T>& out) {
    auto& g = out.parents[0]->ensure_grad();
    for (auto& gi : g) gi += out.grad[0];
  });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  a.check_finite("matmul lhs");
  b.check_finite("matmul rhs");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const auto av = a.data();
  const auto bv = b.data();
  std::vector<T> c(m * n, T(0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      const T s = av[i * k + t];
      const T* brow = &bv[t * n];
      T* crow = &c[i * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += s * brow[j];
    }
  }
  return make_result<T>(Shape{m, n}, std::move(c), {a, b}, [m, k, n](TensorNode<T>& out) {
    const auto& av = out.parents[0]->value;
    const auto& bv = out.parents[1]->value;
    const auto& dc = out.grad;
    if (wants(out, 0)) {
      auto& da = out.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t t = 0; t < k; ++t) {
          T acc = T(0);
          for (std::size_t j = 0; j < n; ++j) acc += dc[i * n + j] * bv[t * n + j];
          da[i * k + t] += acc;
        }
    }
    if (wants(out, 1)) {
      auto& db = out.parents[1]->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t t = 0; t < k; ++t) {
          const T s = av[i * k + t];
          for (std::size_t j = 0; j < n; ++j) db[t * n + j] += s * dc[i * n + j];
        }
    }
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (weight.rank() != 2 || bias.rank() != 1 || bias.dim(0) != weight.dim(0)) {
    throw DimensionError("linear: bad parameter shapes " + shape_str(weight.shape()) + ", " +
                         shape_str(bias.shape()));
  }
  const std::size_t out_f = weight.dim(0), in_f = weight.dim(1);
  if ((x.rank() != 1 && x.rank() != 2) || x.shape().back() != in_f) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
  }
  x.check_finite("linear input");
  weight.check_finite("linear weight");
  const std::size_t rows = x.rank() == 2 ? x.dim(0) : 1;
  const auto xv = x.data();
  const auto wv = weight.data();
  const auto bv = bias.data();
  std::vector<T> y(rows * out_f);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = &xv[r * in_f];
    for (std::size_t o = 0; o < out_f; ++o) {
      const T* wr = &wv[o * in_f];
      T acc = T(0);
      for (std::size_t i = 0; i < in_f; ++i) acc += xr[i] * wr[i];
      y[r * out_f + o] = acc + bv[o];
    }
  }
  Shape shape = x.rank() == 2 ? Shape{rows, out_f} : Shape{out_f};
  return make_result<T>(std::move(shape), std::move(y), {x, weight, bias},
                        [rows, in_f, out_f](TensorNode<T>& out) {
    const auto& xv = out.parents[0]->value;
    const auto& wv = out.parents[1]->value;
    const auto& dy = out.grad;
    if (wants(out, 0)) {
      auto& dx = out.parents[0]->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t o = 0; o < out_f; ++o) {
          const T g = dy[r * out_f + o];
          if (g == T(0)) continue;
          const T* wr = &wv[o * in_f];
          T* dxr = &dx[r * in_f];
          for (std::size_t i = 0; i < in_f; ++i) dxr[i] += g * wr[i];
        }
    }
    if (wants(out, 1)) {
      auto& dw = out.parents[1]->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t o = 0; o < out_f; ++o) {
          const T g = dy[r * out_f + o];
          if (g == T(0)) continue;
          const T* xr = &xv[r * in_f];
          T* dwr = &dw[o * in_f];
          for (std::size_t i = 0; i < in_f; ++i) dwr[i] += g * xr[i];
        }
    }
    if (wants(out, 2)) {
      auto& db = out.parents[2]->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t o = 0; o < out_f; ++o) db[o] += dy[r * out_f + o];
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, double eps) {
  if (x.rank() == 0) throw DimensionError("layer_norm: scalar input");
  const std::size_t d = x.shape().back();
  if (d == 0) throw DimensionError("layer_norm: empty normalized axis");
  if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
    throw DimensionError("layer_norm: gamma/beta must be [" + std::to_string(d) + "]");
  }
  if (!(eps > 0)) throw ParameterError("layer_norm: eps must be positive");
  const std::size_t rows = x.numel() / d;
  const auto xv = x.data();
  const auto gv = gamma.data();
  const auto bv = beta.data();
  std::vector<T> y(x.numel());
  std::vector<T> xhat(x.numel());
  std::vector<T> rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = &xv[r * d];
    double mean = 0.0;
    for (std::size_t i = 0; i < d; ++i) mean += xr[i];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double c = xr[i] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double rs = 1.0 / std::sqrt(var + eps);
    rstd[r] = static_cast<T>(rs);
    for (std::size_t i = 0; i < d; ++i) {
      const T h = static_cast<T>((xr[i] - mean) * rs);
      xhat[r * d + i] = h;
      y[r * d + i] = gv[i] * h + bv[i];
    }
  }
  return make_result<T>(x.shape(), std::move(y), {x, gamma, beta},
                        [rows, d, xhat = std::move(xhat), rstd = std::move(rstd)](TensorNode<T>& out) {
    const auto& gv = out.parents[1]->value;
    const auto& dy = out.grad;
    if (wants(out, 0)) {
      auto& dx = out.parents[0]->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        double mean_g = 0.0, mean_gh = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          const double g = dy[r * d + i] * gv[i];
          mean_g += g;
          mean_gh += g * xhat[r * d + i];
        }
        mean_g /= static_cast<double>(d);
        mean_gh /= static_cast<double>(d);
        for (std::size_t i = 0; i < d; ++i) {
          const double g = dy[r * d + i] * gv[i];
          dx[r * d + i] += static_cast<T>(rstd[r] * (g - mean_g - xhat[r * d + i] * mean_gh));
        }
      }
    }
    if (wants(out, 1)) {
      auto& dg = out.parents[1]->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < d; ++i) dg[i] += dy[r * d + i] * xhat[r * d + i];
    }
    if (wants(out, 2)) {
      auto& db = out.parents[2]->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < d; ++i) db[i] += dy[r * d + i];
    }
  });
}

template <typename T>
Tensor<T> gelu_tanh(const Tensor<T>& x) {
  constexpr T c = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  constexpr T a = static_cast<T>(0.044715);
  return unary(
      x,
      [](T v) { return T(0.5) * v * (T(1) + std::tanh(c * (v + a * v * v * v))); },
      [](T v, T) {
        const T t = std::tanh(c * (v + a * v * v * v));
        return T(0.5) * (T(1) + t) + T(0.5) * v * (T(1) - t * t) * c * (T(1) + T(3) * a * v * v);
      });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary(
      x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(
      x,
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " invalid for shape " +
                         shape_str(x.shape()));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const std::size_t len = x.dim(axis);
  const auto xv = x.data();
  std::vector<T> y(x.numel());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      T mx = xv[base];
      for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, xv[base + j * inner]);
      T z = T(0);
      for (std::size_t j = 0; j < len; ++j) {
        const T e = std::exp(xv[base + j * inner] - mx);
        y[base + j * inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < len; ++j) y[base + j * inner] /= z;
    }
  return make_result<T>(x.shape(), std::move(y), {x}, [outer, inner, len](TensorNode<T>& out) {
    auto& dx = out.parents[0]->ensure_grad();
    const auto& y = out.value;
    const auto& dy = out.grad;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * len * inner + in;
        T dot = T(0);
        for (std::size_t j = 0; j < len; ++j) dot += dy[base + j * inner] * y[base + j * inner];
        for (std::size_t j = 0; j < len; ++j) {
          const std::size_t idx = base + j * inner;
          dx[idx] += y[idx] * (dy[idx] - dot);
        }
      }
  });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, Mode mode, RngStream& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ParameterError("dropout: rate must lie in [0, 1)");
  if (mode == Mode::eval || p == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  std::vector<T> mask(x.numel());
  for (auto& m : mask) m = rng.uniform() >= p ? keep_scale : T(0);
  std::vector<T> y(x.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] * mask[i];
  return make_result<T>(x.shape(), std::move(y), {x}, [mask = std::move(mask)](TensorNode<T>& out) {
    auto& g = out.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i] * mask[i];
  });
}

template <typename T>
Tensor<T> mean_rows(const Tensor<T>& x) {
  if (x.rank() != 2) throw DimensionError("mean_rows: expected [N, D], got " + shape_str(x.shape()));
  const std::size_t n = x.dim(0), d = x.dim(1);
  const auto xv = x.data();
  std::vector<T> z(d, T(0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) z[j] += xv[i * d + j];
  const T inv = T(1) / static_cast<T>(n);
  for (auto& v : z) v *= inv;
  return make_result<T>(Shape{d}, std::move(z), {x}, [n, d, inv](TensorNode<T>& out) {
    auto& g = out.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) g[i * d + j] += out.grad[j] * inv;
  });
}

template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, std::size_t heads) {
  if (q.rank() != 2 || q.shape() != k.shape() || q.shape() != v.shape()) {
    throw DimensionError("attention: q, k, v must share an [N, D] shape");
  }
  const std::size_t n = q.dim(0), d = q.dim(1);
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("attention: width " + std::to_string(d) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  const std::size_t dh = d / heads;
  const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  const auto qv = q.data();
  const auto kv = k.data();
  const auto vv = v.data();

  // probs[h][i*n + j]
  std::vector<T> probs(heads * n * n);
  std::vector<T> y(n * d, T(0));
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    T* ph = &probs[h * n * n];
    for (std::size_t i = 0; i < n; ++i) {
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        T s = T(0);
        for (std::size_t c = 0; c < dh; ++c) s += qv[i * d + off + c] * kv[j * d + off + c];
        s *= inv_sqrt;
        ph[i * n + j] = s;
        mx = std::max(mx, s);
      }
      T z = T(0);
      for (std::size_t j = 0; j < n; ++j) {
        ph[i * n + j] = std::exp(ph[i * n + j] - mx);
        z += ph[i * n + j];
      }
      for (std::size_t j = 0; j < n; ++j) ph[i * n + j] /= z;
      for (std::size_t j = 0; j < n; ++j) {
        const T a = ph[i * n + j];
        for (std::size_t c = 0; c < dh; ++c) y[i * d + off + c] += a * vv[j * d + off + c];
      }
    }
  }
  return make_result<T>(q.shape(), std::move(y), {q, k, v},
                        [n, d, heads, dh, inv_sqrt, probs = std::move(probs)](TensorNode<T>& out) {
    const auto& qv = out.parents[0]->value;
    const auto& kv = out.parents[1]->value;
    const auto& vv = out.parents[2]->value;
    const auto& dy = out.grad;
    const bool gq = wants(out, 0), gk = wants(out, 1), gv = wants(out, 2);
    std::vector<T>* dq = gq ? &out.parents[0]->ensure_grad() : nullptr;
    std::vector<T>* dk = gk ? &out.parents[1]->ensure_grad() : nullptr;
    std::vector<T>* dv = gv ? &out.parents[2]->ensure_grad() : nullptr;
    std::vector<T> ds(n * n);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * dh;
      const T* ph = &probs[h * n * n];
      for (std::size_t i = 0; i < n; ++i) {
        // dA[i,j] = dy_i . v_j ; dS = A * (dA - sum_j dA*A)
        T dot = T(0);
        for (std::size_t j = 0; j < n; ++j) {
          T da = T(0);
          for (std::size_t c = 0; c < dh; ++c) da += dy[i * d + off + c] * vv[j * d + off + c];
          ds[i * n + j] = da;
          dot += da * ph[i * n + j];
        }
        for (std::size_t j = 0; j < n; ++j) ds[i * n + j] = ph[i * n + j] * (ds[i * n + j] - dot);
      }
      if (gv) {
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            const T a = ph[i * n + j];
            for (std::size_t c = 0; c < dh; ++c) (*dv)[j * d + off + c] += a * dy[i * d + off + c];
          }
      }
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const T s = ds[i * n + j] * inv_sqrt;
          if (gq)
            for (std::size_t c = 0; c < dh; ++c) (*dq)[i * d + off + c] += s * kv[j * d + off + c];
          if (gk)
            for (std::size_t c = 0; c < dh; ++c) (*dk)[j * d + off + c] += s * qv[i * d + off + c];
        }
    }
  });
}

template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& x, const AttentionWeights<T>& w, std::size_t heads) {
  if (x.rank() != 2) throw DimensionError("multi_head_attention: expected [N, D] tokens");
  const std::size_t d = x.dim(1);
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("multi_head_attention: width " + std::to_string(d) +
                      " not divisible by " + std::to_string(heads) + " heads");
  }
  for (const Tensor<T>* wt : {&w.q_weight, &w.k_weight, &w.v_weight, &w.out_weight}) {
    if (wt->shape() != Shape{d, d}) {
      throw DimensionError("multi_head_attention: projections must map D->D, got " +
                           shape_str(wt->shape()));
    }
  }
  const auto q = linear(x, w.q_weight, w.q_bias);
  const auto k = linear(x, w.k_weight, w.k_bias);
  const auto v = linear(x, w.v_weight, w.v_bias);
  return linear(attention(q, k, v, heads), w.out_weight, w.out_bias);
}

#define RADTRIAGE_INSTANTIATE_OPS(T)                                                        \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> scale(const Tensor<T>&, T);                                            \
  template Tensor<T> sum(const Tensor<T>&);                                                 \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);          \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double); \
  template Tensor<T> gelu_tanh(const Tensor<T>&);                                           \
  template Tensor<T> relu(const Tensor<T>&);                                                \
  template Tensor<T> sigmoid(const Tensor<T>&);                                             \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                \
  template Tensor<T> dropout(const Tensor<T>&, double, Mode, RngStream&);                   \
  template Tensor<T> mean_rows(const Tensor<T>&);                                           \
  template Tensor<T> attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t); \
  template Tensor<T> multi_head_attention(const Tensor<T>&, const AttentionWeights<T>&, std::size_t);

RADTRIAGE_INSTANTIATE_OPS(float)
RADTRIAGE_INSTANTIATE_OPS(double)

#undef RADTRIAGE_INSTANTIATE_OPS

}  // namespace radtriage::ops
