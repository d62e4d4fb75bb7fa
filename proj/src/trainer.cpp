#include "radtriage/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "radtriage/errors.hpp"
#include "radtriage/log.hpp"
#include "radtriage/optim.hpp"

namespace radtriage {

namespace {
// stream keys, so augmentation and dropout never share draws
constexpr std::uint64_t kShuffleKey = 0x5a0ff1e;
constexpr std::uint64_t kAugmentKey = 0xa06;
constexpr std::uint64_t kDropoutKey = 0xd809;
}  // namespace

PreparedSplit prepare_split(const std::vector<StudyRecord>& records, std::size_t image_size) {
  PreparedSplit split;
  split.groups = group_views(records);
  for (std::size_t g = 0; g < split.groups.size(); ++g) {
    for (const auto& path : split.groups[g].views) {
      split.views.push_back(resized_view(read_png(path), image_size));
      split.view_group.push_back(g);
    }
  }
  return split;
}

std::vector<Prediction> predict_split(const PreparedSplit& split, const ModelParams<float>& params,
                                      const RunConfig& cfg, double threshold) {
  std::vector<std::vector<double>> probs(split.groups.size());
  for (std::size_t i = 0; i < split.views.size(); ++i) {
    const auto x = finish_preprocess(split.views[i], cfg.preprocess, Mode::eval, nullptr).tensor;
    probs[split.view_group[i]].push_back(predict_view(x, params, cfg.model));
  }
  std::vector<Prediction> out;
  out.reserve(split.groups.size());
  for (std::size_t g = 0; g < split.groups.size(); ++g) {
    out.push_back(make_prediction(split.groups[g].key, std::move(probs[g]), split.groups[g].label, threshold));
  }
  return out;
}

ValidationSummary summarize_validation(const std::vector<Prediction>& predictions) {
  ValidationSummary s;
  if (predictions.empty()) return s;
  std::vector<double> probs;
  std::vector<int> labels;
  for (const auto& p : predictions) {
    probs.push_back(p.probability);
    labels.push_back(p.label);
  }
  try {
    s.auroc = auroc(probs, labels);
    s.threshold = select_threshold(probs, labels).threshold;
  } catch (const UndefinedMetricError&) {
    s.auroc.reset();
  }
  s.f1 = confusion_and_point_metrics(probs, labels, s.threshold).f1;
  return s;
}

std::string EpochLog::csv() const {
  char buf[256];
  const std::string auc = val_auroc ? [&] {
    char b[32];
    std::snprintf(b, sizeof b, "%.6f", *val_auroc);
    return std::string(b);
  }() : std::string("NA");
  std::snprintf(buf, sizeof buf, "%zu,%.6f,%s,%.6f,%.6g,%.6g", epoch, train_loss, auc.c_str(), val_f1, lr_head,
                lr_encoder);
  return buf;
}

void calibrate_head(ModelParams<float>& params, const RunConfig& cfg, const PreparedSplit& split) {
  const std::size_t d = cfg.model.encoder.embed_dim;
  std::vector<double> sum(d, 0.0), sq(d, 0.0);
  for (const auto& view : split.views) {
    const auto x = finish_preprocess(view, cfg.preprocess, Mode::eval, nullptr).tensor;
    const auto z = mean_pool(encode(x, params.encoder, cfg.model.encoder, Mode::eval));
    for (std::size_t i = 0; i < d; ++i) {
      sum[i] += z[i];
      sq[i] += static_cast<double>(z[i]) * z[i];
    }
  }
  const auto n = static_cast<double>(split.views.size());
  std::vector<double> mean(d), std(d);
  for (std::size_t i = 0; i < d; ++i) {
    mean[i] = sum[i] / n;
    std[i] = std::sqrt(std::max(sq[i] / n - mean[i] * mean[i], 0.0)) + 1e-6;
  }
  fold_input_standardization(params.head, mean, std);
}

std::size_t total_updates(const TrainConfig& t, std::size_t train_views) {
  return t.epochs * ((train_views + t.batch_size - 1) / t.batch_size);
}

std::size_t warmup_updates(const TrainConfig& t, std::size_t total) {
  const auto w = static_cast<std::size_t>(std::floor(t.warmup_fraction * static_cast<double>(total)));
  return total == 0 ? 0 : std::min(w, total - 1);
}

TrainResult train(const RunConfig& cfg, const PreparedSplit& train_split, const PreparedSplit& val_split,
                  const TrainHooks& hooks) {
  cfg.validate(false);
  const auto& t = cfg.train;
  if (train_split.views.empty()) throw InputError("train: training split has no views");
  for (const auto& v : train_split.views) {
    if (v.dim(1) != cfg.model.encoder.image_size) throw DimensionError("train: cached view has wrong size");
  }

  TrainResult result;
  ModelParams<float> params = hooks.init ? hooks.init->clone() : ModelParams<float>::init(cfg.model, t.seed);
  if (!hooks.init && t.head_calibration) calibrate_head(params, cfg, train_split);
  const auto partition = select_trainable(cfg.model, t.unfreeze_k);
  apply_partition(params, cfg.model, partition);
  result.initial = params.clone();

  std::vector<NamedTensor<float>> encoder_tier, head_tier;
  for (auto& nt : params.named(cfg.model)) {
    const Tier tier = partition.tier_of(nt.name);
    if (tier == Tier::encoder) encoder_tier.push_back(nt);
    if (tier == Tier::head) head_tier.push_back(nt);
  }
  const AdamWHyper hyper{t.beta1, t.beta2, t.eps, t.weight_decay};
  OptimizerState opt;

  const std::size_t n = train_split.views.size();
  const std::size_t total = total_updates(t, n);
  const std::size_t warmup = warmup_updates(t, total);
  log::info("training " + std::to_string(n) + " views, " + std::to_string(total) + " updates (" +
            std::to_string(warmup) + " warmup), K=" + std::to_string(t.unfreeze_k));

  double best_auroc = -std::numeric_limits<double>::infinity();
  bool have_best = false;
  std::size_t update = 0;

  for (std::size_t epoch = 1; epoch <= t.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream shuffle = RngStream::substream(t.seed ^ kShuffleKey, epoch);
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[shuffle.below(i + 1)]);

    EpochLog entry;
    entry.epoch = epoch;
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += t.batch_size) {
      const std::size_t end = std::min(n, start + t.batch_size);
      const float inv_batch = 1.0f / static_cast<float>(end - start);
      for (std::size_t pos = start; pos < end; ++pos) {
        const std::size_t idx = order[pos];
        RngStream aug = RngStream::substream(t.seed ^ kAugmentKey, epoch, idx);
        RngStream drop = RngStream::substream(t.seed ^ kDropoutKey, epoch, idx);
        const auto x = finish_preprocess(train_split.views[idx], cfg.preprocess, Mode::train, &aug).tensor;
        const int label = train_split.groups[train_split.view_group[idx]].label;
        const auto loss = bce_with_logit(model_logit(x, params, cfg.model, Mode::train, drop), label, t.pos_weight);
        const double value = static_cast<double>(loss.item());
        if (!std::isfinite(value)) {
          throw NumericError("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", update " +
                             std::to_string(update + 1));
        }
        loss_sum += value;
        ops::scale(loss, inv_batch).backward();
      }
      opt.advance();
      ++update;
      entry.lr_encoder = lr_at(update, total, warmup, t.lr_encoder);
      entry.lr_head = lr_at(update, total, warmup, t.lr_head);
      adamw_step(encoder_tier, opt, entry.lr_encoder, hyper);
      adamw_step(head_tier, opt, entry.lr_head, hyper);
      for (auto& nt : encoder_tier) nt.tensor->zero_grad();
      for (auto& nt : head_tier) nt.tensor->zero_grad();
    }
    entry.train_loss = loss_sum / static_cast<double>(n);

    const auto summary = summarize_validation(predict_split(val_split, params, cfg));
    entry.val_auroc = summary.auroc;
    entry.val_f1 = summary.f1;
    result.log.push_back(entry);
    log::info("epoch " + entry.csv());
    if (hooks.on_epoch) hooks.on_epoch(entry);

    const double score = summary.auroc.value_or(-std::numeric_limits<double>::infinity());
    if (!have_best || score > best_auroc) {
      have_best = true;
      best_auroc = score;
      result.best.config = cfg;
      result.best.params = params.clone();
      result.best.optimizer = opt;
      result.best.rng = RngStream(t.seed, epoch);
      result.best.metrics = {{"epoch", static_cast<double>(epoch)},
                             {"threshold", summary.threshold},
                             {"train_loss", entry.train_loss},
                             {"val_f1", summary.f1}};
      if (summary.auroc) result.best.metrics["val_auroc"] = *summary.auroc;
    }
  }
  result.final_params = params.clone();
  return result;
}

}  // namespace radtriage
