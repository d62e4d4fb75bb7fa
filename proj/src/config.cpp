#include "radtriage/config.hpp"

#include <fstream>
#include <set>

#include "radtriage/errors.hpp"

namespace radtriage {

using nlohmann::json;

void TrainConfig::validate(std::size_t num_layers) const {
  if (unfreeze_k > num_layers) {
    throw ConfigError("train.unfreeze_k: " + std::to_string(unfreeze_k) + " exceeds " +
                      std::to_string(num_layers) + " encoder layers");
  }
  if (!(lr_encoder > 0.0)) throw ConfigError("train.lr_encoder: must be positive");
  if (!(lr_head >= lr_encoder)) throw ConfigError("train.lr_head: must be >= lr_encoder");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay: must be nonnegative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("train.beta1/beta2: must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("train.eps: must be positive");
  if (batch_size == 0) throw ConfigError("train.batch_size: must be positive");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw ConfigError("train.warmup_fraction: must lie in [0, 1)");
  }
  if (!(pos_weight > 0.0)) throw ConfigError("train.pos_weight: must be positive");
}

void RunConfig::apply_preset(const std::string& name) {
  model.encoder = preset_by_name(name);
  preset = name;
  preprocess.image_size = model.encoder.image_size;
}

void RunConfig::validate(bool require_dataset) const {
  try {
    model.encoder.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("encoder: ") + e.what());
  }
  model.head.validate();
  train.validate(model.encoder.num_layers);
  if (preprocess.image_size != model.encoder.image_size) {
    throw ConfigError("preprocess.image_size must equal encoder.image_size");
  }
  if (!(preprocess.norm.std > 0.0)) throw ConfigError("preprocess.std: must be positive");
  try {
    split.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("split: ") + e.what());
  }
  if (require_dataset) {
    std::error_code ec;
    if (dataset_root.empty() || !std::filesystem::is_directory(dataset_root, ec)) {
      throw ConfigError("dataset_root: directory '" + dataset_root + "' does not exist");
    }
  }
}

json to_json(const RunConfig& c) {
  const auto& e = c.model.encoder;
  const auto& h = c.model.head;
  const auto& t = c.train;
  const auto& p = c.preprocess;
  return json{
      {"preset", c.preset},
      {"encoder",
       {{"image_size", e.image_size}, {"patch_size", e.patch_size}, {"embed_dim", e.embed_dim},
        {"num_layers", e.num_layers}, {"num_heads", e.num_heads}, {"ffn_hidden", e.ffn_hidden},
        {"max_positions", e.max_positions}}},
      {"head", {{"hidden1", h.hidden1}, {"hidden2", h.hidden2}, {"dropout1", h.dropout1}, {"dropout2", h.dropout2}}},
      {"train",
       {{"unfreeze_k", t.unfreeze_k}, {"lr_encoder", t.lr_encoder}, {"lr_head", t.lr_head},
        {"weight_decay", t.weight_decay}, {"beta1", t.beta1}, {"beta2", t.beta2}, {"eps", t.eps},
        {"epochs", t.epochs}, {"batch_size", t.batch_size}, {"warmup_fraction", t.warmup_fraction},
        {"seed", t.seed}, {"pos_weight", t.pos_weight},
        {"head_calibration", t.head_calibration}}},
      {"preprocess",
       {{"mean", p.norm.mean}, {"std", p.norm.std}, {"augment", p.augment.enabled},
        {"flip_probability", p.augment.flip_probability}, {"max_rotation_deg", p.augment.max_rotation_deg}}},
      {"dataset_root", c.dataset_root},
      {"split", {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}, {"seed", c.split.seed}}},
      {"out", c.out_dir},
  };
}

namespace {

void reject_unknown(const json& j, const std::string& block, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(block + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.count(key)) throw ConfigError((block.empty() ? "" : block + ".") + key + ": unknown field");
  }
}

template <typename V>
void read(const json& j, const std::string& block, const char* key, V& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception& e) {
    throw ConfigError((block.empty() ? std::string(key) : block + "." + key) + ": " + e.what());
  }
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  reject_unknown(j, "", {"preset", "encoder", "head", "train", "preprocess", "dataset_root", "split", "out"});
  RunConfig c;
  std::string preset = "tiny";
  read(j, "", "preset", preset);
  c.apply_preset(preset);

  if (j.contains("encoder")) {
    const auto& e = j["encoder"];
    reject_unknown(e, "encoder", {"image_size", "patch_size", "embed_dim", "num_layers", "num_heads",
                                  "ffn_hidden", "max_positions"});
    auto& m = c.model.encoder;
    read(e, "encoder", "image_size", m.image_size);
    read(e, "encoder", "patch_size", m.patch_size);
    read(e, "encoder", "embed_dim", m.embed_dim);
    read(e, "encoder", "num_layers", m.num_layers);
    read(e, "encoder", "num_heads", m.num_heads);
    read(e, "encoder", "ffn_hidden", m.ffn_hidden);
    read(e, "encoder", "max_positions", m.max_positions);
    c.preprocess.image_size = m.image_size;
  }
  if (j.contains("head")) {
    const auto& h = j["head"];
    reject_unknown(h, "head", {"hidden1", "hidden2", "dropout1", "dropout2"});
    read(h, "head", "hidden1", c.model.head.hidden1);
    read(h, "head", "hidden2", c.model.head.hidden2);
    read(h, "head", "dropout1", c.model.head.dropout1);
    read(h, "head", "dropout2", c.model.head.dropout2);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    reject_unknown(t, "train", {"unfreeze_k", "lr_encoder", "lr_head", "weight_decay", "beta1", "beta2", "eps",
                                "epochs", "batch_size", "warmup_fraction", "seed", "pos_weight",
                                "head_calibration"});
    auto& tc = c.train;
    read(t, "train", "unfreeze_k", tc.unfreeze_k);
    read(t, "train", "lr_encoder", tc.lr_encoder);
    read(t, "train", "lr_head", tc.lr_head);
    read(t, "train", "weight_decay", tc.weight_decay);
    read(t, "train", "beta1", tc.beta1);
    read(t, "train", "beta2", tc.beta2);
    read(t, "train", "eps", tc.eps);
    read(t, "train", "epochs", tc.epochs);
    read(t, "train", "batch_size", tc.batch_size);
    read(t, "train", "warmup_fraction", tc.warmup_fraction);
    read(t, "train", "seed", tc.seed);
    read(t, "train", "pos_weight", tc.pos_weight);
    read(t, "train", "head_calibration", tc.head_calibration);
  }
  if (j.contains("preprocess")) {
    const auto& p = j["preprocess"];
    reject_unknown(p, "preprocess", {"mean", "std", "augment", "flip_probability", "max_rotation_deg"});
    read(p, "preprocess", "mean", c.preprocess.norm.mean);
    read(p, "preprocess", "std", c.preprocess.norm.std);
    read(p, "preprocess", "augment", c.preprocess.augment.enabled);
    read(p, "preprocess", "flip_probability", c.preprocess.augment.flip_probability);
    read(p, "preprocess", "max_rotation_deg", c.preprocess.augment.max_rotation_deg);
  }
  read(j, "", "dataset_root", c.dataset_root);
  if (j.contains("split")) {
    const auto& s = j["split"];
    reject_unknown(s, "split", {"train", "val", "test", "seed"});
    read(s, "split", "train", c.split.train);
    read(s, "split", "val", c.split.val);
    read(s, "split", "test", c.split.test);
    read(s, "split", "seed", c.split.seed);
  }
  read(j, "", "out", c.out_dir);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace radtriage
