#pragma once

#include <cstddef>

#include "radtriage/image_io.hpp"
#include "radtriage/ops.hpp"
#include "radtriage/rng.hpp"
#include "radtriage/tensor.hpp"

namespace radtriage {

struct NormalizationRecord {
  double mean = 0.5;
  double std = 0.5;
  friend bool operator==(const NormalizationRecord&, const NormalizationRecord&) = default;
};

struct AugmentConfig {
  bool enabled = true;
  double flip_probability = 0.5;
  double max_rotation_deg = 10.0;
  friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;
};

struct PreprocessConfig {
  std::size_t image_size = 896;
  NormalizationRecord norm;
  AugmentConfig augment;
  friend bool operator==(const PreprocessConfig&, const PreprocessConfig&) = default;
};

struct PreprocessedImage {
  Tensor<float> tensor;  // [3, S, S]
  NormalizationRecord norm;
};

/// [H0, W0] gray -> [3, H0, W0] with identical channels.
Tensor<float> replicate_channels(const RawRadiograph& img);

/// Half-pixel-centre bilinear resize of a [C, H0, W0] tensor to [C, S, S],
/// sampling at (i + 0.5) * scale - 0.5 and clamping at the edges.
Tensor<float> resize_bilinear(const Tensor<float>& img, std::size_t target);

/// (x - mean) / std. ParameterError unless std > 0.
Tensor<float> normalize(const Tensor<float>& img, double mean, double std);

struct AugmentDraw {
  bool flip = false;
  double angle_deg = 0.0;
};

/// Always consumes exactly two draws so replay positions stay aligned.
AugmentDraw draw_augmentation(const AugmentConfig& cfg, RngStream& rng);

/// Horizontal flip (if drawn) then rotation about the image centre with
/// bilinear resampling and zero fill.
Tensor<float> apply_augmentation(const Tensor<float>& img, const AugmentDraw& draw);

Tensor<float> augment(const Tensor<float>& img, const AugmentConfig& cfg, RngStream& rng);

/// replicate -> resize -> (train and enabled: augment) -> normalize.
/// Augmentation runs before normalization so zero fill means black.
PreprocessedImage preprocess(const RawRadiograph& img, const PreprocessConfig& cfg, Mode mode,
                             RngStream* rng = nullptr);

/// The part of preprocess() that does not depend on randomness; callers that
/// revisit an image every epoch cache this and finish with finish_preprocess().
Tensor<float> resized_view(const RawRadiograph& img, std::size_t image_size);
PreprocessedImage finish_preprocess(const Tensor<float>& resized, const PreprocessConfig& cfg,
                                    Mode mode, RngStream* rng);

}  // namespace radtriage
