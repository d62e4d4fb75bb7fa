#include "radtriage/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "radtriage/checkpoint.hpp"
#include "radtriage/config.hpp"
#include "radtriage/errors.hpp"
#include "radtriage/log.hpp"
#include "radtriage/trainer.hpp"

namespace fs = std::filesystem;

namespace radtriage {

std::string shape_audit(const ModelConfig& cfg) {
  cfg.validate();
  const auto& e = cfg.encoder;
  std::ostringstream out;
  out << "input 3x" << e.image_size << "x" << e.image_size << ", patch " << e.patch_size << " -> grid "
      << e.grid() << "x" << e.grid() << " = " << e.token_count() << " tokens\n";
  out << "patch projection Conv2d(3, " << e.embed_dim << ", kernel=" << e.patch_size << ", stride=" << e.patch_size
      << ")\n";
  out << "encoder: " << e.num_layers << " layers, width " << e.embed_dim << ", " << e.num_heads << " heads, FFN "
      << e.embed_dim << "->" << e.ffn_hidden << "->" << e.embed_dim << "\n";
  out << "head: " << e.embed_dim << "->" << cfg.head.hidden1 << "->" << cfg.head.hidden2 << "->1\n";
  std::size_t total = 0;
  for (const auto& spec : model_parameter_specs(cfg)) {
    const auto n = shape_numel(spec.shape);
    total += n;
    out << spec.name << " " << shape_str(spec.shape) << " " << n << "\n";
  }
  out << "encoder parameters " << encoder_parameter_count(e) << "\n";
  out << "total parameters " << total << "\n";
  return out.str();
}

namespace {

struct SharedFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string preset;

  void add(CLI::App* app) {
    app->add_option("--config", config, "JSON run configuration");
    app->add_option("--seed", seed, "training seed");
    app->add_option("--out", out, "output directory");
    app->add_option("--preset", preset, "encoder preset")->check(CLI::IsMember({"paper", "tiny"}));
  }

  RunConfig resolve() const {
    RunConfig cfg = config.empty() ? RunConfig{} : load_run_config(config);
    if (!preset.empty()) cfg.apply_preset(preset);
    if (seed) cfg.train.seed = *seed;
    if (!out.empty()) cfg.out_dir = out;
    return cfg;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("failed writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

const std::vector<StudyRecord>& pick_split(const DatasetSplits& s, const std::string& name) {
  if (name == "train") return s.train;
  if (name == "val") return s.val;
  return s.test;
}

void write_report_files(const fs::path& dir, const std::string& stem, const std::vector<Prediction>& preds,
                        const MetricsReport& report) {
  write_text(dir / (stem + "_report.csv"), render_report_csv(report));
  write_text(dir / (stem + "_report.txt"), render_report_table(report));
  write_text(dir / (stem + "_predictions.csv"), render_predictions_csv(preds));
}

std::vector<Prediction> rethreshold(std::vector<Prediction> preds, double threshold) {
  for (auto& p : preds) p.verdict = p.probability >= threshold ? 1 : 0;
  return preds;
}

int cmd_synth(const SynthConfig& sc, const std::string& out_dir, std::ostream& out) {
  const auto result = synth_generate(sc, out_dir);
  const auto abnormal = std::count_if(result.records.begin(), result.records.end(),
                                      [](const StudyRecord& r) { return r.label == 1; });
  out << "patients " << sc.patients << ", studies " << result.records.size() << ", abnormal " << abnormal
      << ", images " << result.images << "\n";
  out << "manifest " << result.manifest.string() << "\n";
  return kExitOk;
}

struct TrainFlags {
  std::optional<std::size_t> unfreeze_k;
  std::optional<std::size_t> epochs;
  std::string data;
  std::string init;
  bool dry_run = false;
};

int cmd_train(const SharedFlags& shared, const TrainFlags& tf, std::ostream& out) {
  RunConfig cfg = shared.resolve();
  if (tf.unfreeze_k) cfg.train.unfreeze_k = *tf.unfreeze_k;
  if (tf.epochs) cfg.train.epochs = *tf.epochs;
  if (!tf.data.empty()) cfg.dataset_root = tf.data;
  if (tf.dry_run) {
    cfg.validate(false);
    out << shape_audit(cfg.model);
    const auto part = select_trainable(cfg.model, cfg.train.unfreeze_k);
    out << "K=" << cfg.train.unfreeze_k << ": " << part.frozen.size() << " frozen, " << part.encoder_tier.size()
        << " encoder-tier, " << part.head_tier.size() << " head-tier tensors\n";
    return kExitOk;
  }
  cfg.validate(true);

  std::optional<Checkpoint> pretrained;
  if (!tf.init.empty()) {
    pretrained = load_checkpoint(tf.init);
    if (pretrained->config.model != cfg.model) throw ConfigError("init: checkpoint model config differs from run");
  }
  const auto splits = load_dataset(cfg.dataset_root, cfg.split);
  log::info("split: " + std::to_string(splits.train.size()) + " train, " + std::to_string(splits.val.size()) +
            " val, " + std::to_string(splits.test.size()) + " test studies");
  const auto train_split = prepare_split(splits.train, cfg.preprocess.image_size);
  const auto val_split = prepare_split(splits.val, cfg.preprocess.image_size);

  const fs::path dir = cfg.out_dir;
  ensure_dir(dir);
  std::ofstream log_file(dir / "train_log.csv", std::ios::binary);
  if (!log_file) throw IoError("cannot write " + (dir / "train_log.csv").string());
  log_file << kEpochLogHeader << "\n";
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochLog& e) { log_file << e.csv() << "\n" << std::flush; };
  if (pretrained) hooks.init = &pretrained->params;
  auto result = train(cfg, train_split, val_split, hooks);

  save_checkpoint(result.best, dir / "best.ckpt");
  const double threshold = result.best.metrics.at("threshold");
  const auto preds = predict_split(val_split, result.best.params, cfg, threshold);
  write_report_files(dir, "val", preds, build_report(preds, threshold));
  write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");

  const auto& best = result.best.metrics;
  out << "best epoch " << static_cast<std::size_t>(best.at("epoch")) << ", val_auroc "
      << (best.count("val_auroc") ? std::to_string(best.at("val_auroc")) : "NA") << ", threshold " << threshold
      << "\n";
  out << "checkpoint " << (dir / "best.ckpt").string() << "\n";
  return kExitOk;
}

struct EvalFlags {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  std::optional<double> threshold;
};

int cmd_eval(const SharedFlags& shared, const EvalFlags& ef, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(ef.checkpoint);
  RunConfig cfg = ckpt.config;
  if (!ef.data.empty()) cfg.dataset_root = ef.data;
  if (!shared.out.empty()) cfg.out_dir = shared.out;
  cfg.validate(true);

  const auto splits = load_dataset(cfg.dataset_root, cfg.split);
  const auto& records = pick_split(splits, ef.split);
  if (records.empty()) throw InputError("split '" + ef.split + "' holds no studies");

  double threshold = 0.5;
  if (ef.threshold) {
    threshold = *ef.threshold;
  } else {
    const auto val = predict_split(prepare_split(splits.val, cfg.preprocess.image_size), ckpt.params, cfg);
    const auto summary = summarize_validation(val);
    if (summary.auroc) {
      threshold = summary.threshold;
    } else if (auto it = ckpt.metrics.find("threshold"); it != ckpt.metrics.end()) {
      log::warn("validation split has one class; using the checkpoint threshold");
      threshold = it->second;
    }
  }
  const auto preds =
      rethreshold(predict_split(prepare_split(records, cfg.preprocess.image_size), ckpt.params, cfg), threshold);
  const auto report = build_report(preds, threshold);
  ensure_dir(cfg.out_dir);
  write_report_files(cfg.out_dir, ef.split, preds, report);
  out << render_report_table(report);
  return kExitOk;
}

int cmd_predict(const std::string& checkpoint, const std::vector<std::string>& paths, bool study,
                std::ostream& out, std::ostream& err) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  std::vector<double> probs;
  bool failed = false;
  char buf[64];
  for (const auto& path : paths) {
    try {
      const auto x = preprocess(read_png(path), ckpt.config.preprocess, Mode::eval).tensor;
      const double p = predict_view(x, ckpt.params, ckpt.config.model);
      probs.push_back(p);
      std::snprintf(buf, sizeof buf, "%.9f", p);
      out << path << "," << buf << "\n";
    } catch (const Error& e) {
      err << "error," << path << "," << e.what() << "\n";
      failed = true;
    }
  }
  if (study && !probs.empty()) {
    std::snprintf(buf, sizeof buf, "%.9f", aggregate_study(probs));
    out << "study," << buf << "\n";
  }
  return failed ? kExitData : kExitOk;
}

int cmd_inspect(const SharedFlags& shared, const std::string& checkpoint, std::ostream& out) {
  if (checkpoint.empty()) {
    const RunConfig cfg = shared.resolve();
    out << shape_audit(cfg.model);
    return kExitOk;
  }
  const auto manifest = read_checkpoint_manifest(checkpoint);
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  out << "version " << manifest.at("version").get<int>() << "\n";
  out << "preset " << ckpt.config.preset << "\n";
  out << "tensors " << manifest.at("tensors").size() << "\n";
  std::size_t count = 0;
  for (const auto& t : manifest.at("tensors")) count += t.at("length").get<std::size_t>() / 4;
  out << "parameters " << count << "\n";
  out << "optimizer " << (ckpt.optimizer ? "step " + std::to_string(ckpt.optimizer->step) : std::string("none"))
      << "\n";
  for (const auto& [k, v] : ckpt.metrics) out << "metric " << k << " " << v << "\n";
  out << "config " << to_json(ckpt.config).dump() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"radiograph abnormality triage"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  SharedFlags shared;

  auto* synth = app.add_subcommand("synth", "generate a synthetic radiograph corpus");
  shared.add(synth);
  SynthConfig sc;
  synth->add_option("--patients", sc.patients);
  synth->add_option("--studies", sc.studies_per_patient, "studies per patient");
  synth->add_option("--views", sc.views_per_study, "views per study");
  synth->add_option("--image-size", sc.image_size);
  synth->add_option("--abnormal-fraction", sc.abnormal_fraction)->check(CLI::Range(0.0, 1.0));
  synth->add_flag("--cycle-anatomies", sc.cycle_anatomies, "spread patients over all seven anatomies");

  auto* train_cmd = app.add_subcommand("train", "fine-tune the classifier");
  shared.add(train_cmd);
  TrainFlags tf;
  train_cmd->add_option("--unfreeze-k", tf.unfreeze_k, "number of final encoder blocks to train");
  train_cmd->add_option("--epochs", tf.epochs);
  train_cmd->add_option("--data", tf.data, "dataset root");
  train_cmd->add_option("--init", tf.init, "checkpoint with starting weights");
  train_cmd->add_flag("--dry-run", tf.dry_run, "print the parameter audit and exit");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  shared.add(eval_cmd);
  EvalFlags ef;
  eval_cmd->add_option("--checkpoint", ef.checkpoint)->required();
  eval_cmd->add_option("--data", ef.data, "dataset root");
  eval_cmd->add_option("--split", ef.split)->check(CLI::IsMember({"train", "val", "test"}));
  eval_cmd->add_option("--threshold", ef.threshold, "fixed threshold instead of validation selection");

  auto* predict_cmd = app.add_subcommand("predict", "score individual images");
  shared.add(predict_cmd);
  std::string predict_ckpt;
  std::vector<std::string> paths;
  bool study = false;
  predict_cmd->add_option("--checkpoint", predict_ckpt)->required();
  predict_cmd->add_option("paths", paths)->required();
  predict_cmd->add_flag("--study", study, "also print the aggregated study probability");

  auto* inspect_cmd = app.add_subcommand("inspect", "describe a checkpoint or preset");
  shared.add(inspect_cmd);
  std::string inspect_ckpt;
  inspect_cmd->add_option("--checkpoint", inspect_ckpt);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }
  if (verbose) log::set_level(log::Level::debug);

  try {
    if (*synth) {
      if (shared.seed) sc.seed = *shared.seed;
      return cmd_synth(sc, shared.out.empty() ? "data" : shared.out, out);
    }
    if (*train_cmd) return cmd_train(shared, tf, out);
    if (*eval_cmd) return cmd_eval(shared, ef, out);
    if (*predict_cmd) return cmd_predict(predict_ckpt, paths, study, out, err);
    if (*inspect_cmd) return cmd_inspect(shared, inspect_ckpt, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    err << "format error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace radtriage
