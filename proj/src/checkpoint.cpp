#include "radtriage/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>

#include "radtriage/errors.hpp"

namespace radtriage {

using nlohmann::json;

namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void put_f32(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

float get_f32(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

struct Blob {
  std::string name;
  Shape shape;
  const std::vector<float>* values = nullptr;
  std::span<const float> view;
};

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Parsed {
  json manifest;
  const unsigned char* blobs = nullptr;
  std::size_t blob_bytes = 0;
};

Parsed parse(const std::string& bytes, const std::filesystem::path& path) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    throw FormatError("not a checkpoint (bad magic): " + path.string());
  }
  const auto* base = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint64_t len = get_u64(base + 8);
  if (len > bytes.size() - 16) throw FormatError("truncated checkpoint manifest: " + path.string());
  Parsed p;
  try {
    p.manifest = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));
  } catch (const json::exception& e) {
    throw FormatError("corrupt checkpoint manifest: " + std::string(e.what()));
  }
  if (!p.manifest.contains("version") || p.manifest["version"] != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version in " + path.string());
  }
  p.blobs = base + 16 + len;
  p.blob_bytes = bytes.size() - 16 - len;
  return p;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const ModelConfig& mcfg = ckpt.config.model;
  auto params = ckpt.params;  // shares storage; named() needs a mutable object
  std::vector<Blob> blobs;
  for (const auto& nt : params.named(mcfg)) {
    blobs.push_back({nt.name, nt.tensor->shape(), nullptr, nt.tensor->data()});
  }
  json opt = nullptr;
  if (ckpt.optimizer) {
    opt = json{{"step", ckpt.optimizer->step}};
    for (const auto& [name, mom] : ckpt.optimizer->moments) {
      blobs.push_back({"opt.m." + name, Shape{mom.m.size()}, &mom.m, {}});
      blobs.push_back({"opt.v." + name, Shape{mom.v.size()}, &mom.v, {}});
    }
  }

  json table = json::array();
  std::uint64_t offset = 0;
  for (auto& b : blobs) {
    if (b.values) b.view = *b.values;
    const std::uint64_t length = b.view.size() * 4;
    table.push_back({{"name", b.name}, {"dtype", "f32"}, {"shape", b.shape}, {"offset", offset}, {"length", length}});
    offset += length;
  }
  const json manifest{
      {"version", kCheckpointVersion},
      {"config", to_json(ckpt.config)},
      {"rng", {{"seed", ckpt.rng.seed()}, {"counter", ckpt.rng.counter()}}},
      {"metrics", ckpt.metrics},
      {"optimizer", opt},
      {"tensors", table},
  };
  const std::string text = manifest.dump();

  std::string out(kCheckpointMagic, 8);
  put_u64(out, text.size());
  out += text;
  out.reserve(out.size() + offset);
  for (const auto& b : blobs)
    for (float f : b.view) put_f32(out, f);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("failed writing checkpoint " + path.string());
}

nlohmann::json read_checkpoint_manifest(const std::filesystem::path& path) {
  return parse(read_all(path), path).manifest;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_all(path);
  const Parsed p = parse(bytes, path);
  const json& m = p.manifest;

  Checkpoint ck;
  try {
    ck.config = run_config_from_json(m.at("config"));
    ck.rng = RngStream(m.at("rng").at("seed").get<std::uint64_t>(), m.at("rng").at("counter").get<std::uint64_t>());
    ck.metrics = m.at("metrics").get<std::map<std::string, double>>();
  } catch (const json::exception& e) {
    throw FormatError("checkpoint manifest missing fields: " + std::string(e.what()));
  } catch (const ConfigError& e) {
    throw FormatError("checkpoint config invalid: " + std::string(e.what()));
  }
  ck.params = ModelParams<float>::zeros(ck.config.model);
  auto named = ck.params.named(ck.config.model);
  if (!m.at("optimizer").is_null()) {
    ck.optimizer = OptimizerState{};
    ck.optimizer->step = m["optimizer"].at("step").get<std::uint64_t>();
  }

  std::size_t filled = 0;
  for (const auto& entry : m.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<Shape>();
    const auto offset = entry.at("offset").get<std::uint64_t>();
    const auto length = entry.at("length").get<std::uint64_t>();
    if (entry.at("dtype") != "f32" || length != shape_numel(shape) * 4 || offset > p.blob_bytes ||
        length > p.blob_bytes - offset) {
      throw FormatError("bad tensor table entry for " + name);
    }
    std::vector<float> values(length / 4);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = get_f32(p.blobs + offset + 4 * i);

    if (name.rfind("opt.", 0) == 0) {
      if (!ck.optimizer || name.size() < 7) throw FormatError("unexpected optimizer tensor " + name);
      auto& mom = ck.optimizer->moments[name.substr(6)];
      (name[4] == 'm' ? mom.m : mom.v) = std::move(values);
      continue;
    }
    auto it = std::find_if(named.begin(), named.end(), [&](const auto& nt) { return nt.name == name; });
    if (it == named.end()) throw FormatError("unknown tensor " + name);
    if (it->tensor->shape() != shape) throw FormatError("shape mismatch for tensor " + name);
    std::copy(values.begin(), values.end(), it->tensor->mutable_data().begin());
    ++filled;
  }
  if (filled != named.size()) throw FormatError("checkpoint is missing model tensors");
  return ck;
}

}  // namespace radtriage
