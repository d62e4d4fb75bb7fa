#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "radtriage/config.hpp"
#include "radtriage/model.hpp"
#include "radtriage/optim.hpp"
#include "radtriage/rng.hpp"

namespace radtriage {

inline constexpr char kCheckpointMagic[9] = "RADTRNG1";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig config;
  ModelParams<float> params;
  std::optional<OptimizerState> optimizer;
  RngStream rng;
  std::map<std::string, double> metrics;
};

/// Layout: 8-byte magic, u64 little-endian manifest length, JSON manifest
/// (version, config, rng, metrics, optimizer step, tensor table with name,
/// dtype, shape, byte offset and byte length), then little-endian f32 blobs
/// in table order. Offsets are relative to the start of the blob section.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// FormatError on bad magic, version, or tensor table; IoError if unreadable.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Parsed manifest only (for inspection).
nlohmann::json read_checkpoint_manifest(const std::filesystem::path& path);

}  // namespace radtriage
