#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "radtriage/dataset.hpp"
#include "radtriage/model.hpp"
#include "radtriage/preprocess.hpp"

namespace radtriage {

struct TrainConfig {
  std::size_t unfreeze_k = 2;
  double lr_encoder = 1e-4;
  double lr_head = 1e-3;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  double warmup_fraction = 0.05;
  std::uint64_t seed = 0;
  double pos_weight = 1.0;
  /// Before the first update, fold the training-set mean and spread of the
  /// pooled embedding into the head's first layer (seeded init only).
  bool head_calibration = true;

  void validate(std::size_t num_layers) const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Everything one command needs. Presets expand to the exact encoder configs;
/// explicit "encoder" fields in a config file override the preset.
struct RunConfig {
  std::string preset = "tiny";
  ModelConfig model{tiny_preset(), HeadConfig{}};
  TrainConfig train;
  PreprocessConfig preprocess{tiny_preset().image_size, {}, {}};
  std::string dataset_root;
  SplitSpec split;
  std::string out_dir = "out";

  /// Resets model.encoder (and preprocess.image_size) to the named preset.
  void apply_preset(const std::string& name);
  /// ConfigError naming the offending field. With `require_dataset`, the
  /// dataset root must exist.
  void validate(bool require_dataset) const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Starts from the preset named in `j` (default tiny) and overrides every
/// field present. Unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace radtriage
