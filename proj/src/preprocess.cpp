#include "radtriage/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "radtriage/errors.hpp"
#include "radtriage/log.hpp"

namespace radtriage {

Tensor<float> replicate_channels(const RawRadiograph& img) {
  if (img.height == 0 || img.width == 0 || img.pixels.size() != img.height * img.width) {
    throw InputError("replicate_channels: malformed radiograph " + img.source);
  }
  const std::size_t plane = img.pixels.size();
  std::vector<float> out(3 * plane);
  for (std::size_t c = 0; c < 3; ++c) std::copy(img.pixels.begin(), img.pixels.end(), out.begin() + c * plane);
  return Tensor<float>(Shape{3, img.height, img.width}, std::move(out));
}

Tensor<float> resize_bilinear(const Tensor<float>& img, std::size_t target) {
  if (img.rank() != 3) throw DimensionError("resize_bilinear: expected [C, H, W]");
  if (target == 0) throw ParameterError("resize_bilinear: target size must be positive");
  const std::size_t ch = img.dim(0), h0 = img.dim(1), w0 = img.dim(2);
  if (h0 == target && w0 == target) return img.detach();

  struct Tap {
    std::size_t lo, hi;
    double frac;
  };
  auto taps = [target](std::size_t in) {
    std::vector<Tap> out(target);
    const double scale = static_cast<double>(in) / static_cast<double>(target);
    for (std::size_t i = 0; i < target; ++i) {
      double s = (static_cast<double>(i) + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(in - 1));
      const auto lo = static_cast<std::size_t>(std::floor(s));
      out[i] = {lo, std::min(lo + 1, in - 1), s - static_cast<double>(lo)};
    }
    return out;
  };
  const auto ty = taps(h0);
  const auto tx = taps(w0);
  const auto src = img.data();
  std::vector<float> out(ch * target * target);
  for (std::size_t c = 0; c < ch; ++c) {
    const float* plane = &src[c * h0 * w0];
    for (std::size_t y = 0; y < target; ++y) {
      const float* r0 = plane + ty[y].lo * w0;
      const float* r1 = plane + ty[y].hi * w0;
      for (std::size_t x = 0; x < target; ++x) {
        const Tap& t = tx[x];
        const double top = r0[t.lo] + t.frac * (static_cast<double>(r0[t.hi]) - r0[t.lo]);
        const double bot = r1[t.lo] + t.frac * (static_cast<double>(r1[t.hi]) - r1[t.lo]);
        out[(c * target + y) * target + x] = static_cast<float>(top + ty[y].frac * (bot - top));
      }
    }
  }
  return Tensor<float>(Shape{ch, target, target}, std::move(out));
}

Tensor<float> normalize(const Tensor<float>& img, double mean, double std) {
  if (!(std > 0.0)) throw ParameterError("normalize: std must be positive");
  std::vector<float> out(img.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>((static_cast<double>(img[i]) - mean) / std);
  }
  return Tensor<float>(img.shape(), std::move(out));
}

AugmentDraw draw_augmentation(const AugmentConfig& cfg, RngStream& rng) {
  AugmentDraw d;
  d.flip = rng.uniform() < cfg.flip_probability;
  d.angle_deg = rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg);
  return d;
}

Tensor<float> apply_augmentation(const Tensor<float>& img, const AugmentDraw& draw) {
  if (img.rank() != 3) throw DimensionError("augment: expected [C, H, W]");
  const std::size_t ch = img.dim(0), h = img.dim(1), w = img.dim(2);
  std::vector<float> src(img.data().begin(), img.data().end());
  if (draw.flip) {
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t y = 0; y < h; ++y) {
        float* row = &src[(c * h + y) * w];
        std::reverse(row, row + w);
      }
  }
  if (draw.angle_deg == 0.0) return Tensor<float>(img.shape(), std::move(src));

  const double theta = draw.angle_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double cy = (static_cast<double>(h) - 1.0) / 2.0;
  const double cx = (static_cast<double>(w) - 1.0) / 2.0;
  std::vector<float> out(src.size(), 0.0f);
  auto sample = [&](const float* plane, long yy, long xx) -> double {
    if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(w)) return 0.0;
    return plane[static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xx)];
  };
  for (std::size_t c = 0; c < ch; ++c) {
    const float* plane = &src[c * h * w];
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        // inverse-map the output pixel into the source
        const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
        const double sx = cs * dx + sn * dy + cx;
        const double sy = -sn * dx + cs * dy + cy;
        const double fx = std::floor(sx), fy = std::floor(sy);
        const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
        const double ax = sx - fx, ay = sy - fy;
        const double top = sample(plane, y0, x0) + ax * (sample(plane, y0, x0 + 1) - sample(plane, y0, x0));
        const double bot =
            sample(plane, y0 + 1, x0) + ax * (sample(plane, y0 + 1, x0 + 1) - sample(plane, y0 + 1, x0));
        out[(c * h + y) * w + x] = static_cast<float>(top + ay * (bot - top));
      }
  }
  return Tensor<float>(img.shape(), std::move(out));
}

Tensor<float> augment(const Tensor<float>& img, const AugmentConfig& cfg, RngStream& rng) {
  return apply_augmentation(img, draw_augmentation(cfg, rng));
}

Tensor<float> resized_view(const RawRadiograph& img, std::size_t image_size) {
  const bool tiny = img.height == 1 && img.width == 1;
  const bool blank = std::all_of(img.pixels.begin(), img.pixels.end(), [](float v) { return v == 0.0f; });
  if (tiny || blank) {
    log::warn("degenerate radiograph (" + std::string(tiny ? "1x1" : "all zero") + "): " + img.source);
  }
  return resize_bilinear(replicate_channels(img), image_size);
}

PreprocessedImage finish_preprocess(const Tensor<float>& resized, const PreprocessConfig& cfg,
                                    Mode mode, RngStream* rng) {
  Tensor<float> x = resized;
  if (mode == Mode::train && cfg.augment.enabled) {
    if (rng == nullptr) throw ParameterError("preprocess: training-mode augmentation needs an rng");
    x = augment(x, cfg.augment, *rng);
  }
  return {normalize(x, cfg.norm.mean, cfg.norm.std), cfg.norm};
}

PreprocessedImage preprocess(const RawRadiograph& img, const PreprocessConfig& cfg, Mode mode,
                             RngStream* rng) {
  return finish_preprocess(resized_view(img, cfg.image_size), cfg, mode, rng);
}

}  // namespace radtriage
