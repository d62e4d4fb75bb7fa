#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "radtriage/checkpoint.hpp"
#include "radtriage/config.hpp"
#include "radtriage/dataset.hpp"
#include "radtriage/evaluation.hpp"

namespace radtriage {

/// Decoded, resized (not yet normalized) views of one split, grouped by study.
struct PreparedSplit {
  std::vector<ViewGroup> groups;
  std::vector<Tensor<float>> views;     // [3, S, S] in [0, 1]
  std::vector<std::size_t> view_group;  // index into groups
};

PreparedSplit prepare_split(const std::vector<StudyRecord>& records, std::size_t image_size);

/// Eval-mode probability per view, aggregated per study. Verdicts use `threshold`.
std::vector<Prediction> predict_split(const PreparedSplit& split, const ModelParams<float>& params,
                                      const RunConfig& cfg, double threshold = 0.5);

struct ValidationSummary {
  std::optional<double> auroc;  // empty when the split holds one class
  double threshold = 0.5;
  double f1 = 0.0;
};

/// AUROC, Youden threshold and F1 at that threshold over study-level predictions.
ValidationSummary summarize_validation(const std::vector<Prediction>& predictions);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> val_auroc;
  double val_f1 = 0.0;
  double lr_head = 0.0;     // rate of the epoch's last update
  double lr_encoder = 0.0;

  /// `epoch,train_loss,val_auroc,val_f1,lr_head,lr_encoder`; undefined AUROC as NA.
  std::string csv() const;
};

inline constexpr const char* kEpochLogHeader = "epoch,train_loss,val_auroc,val_f1,lr_head,lr_encoder";

struct TrainResult {
  Checkpoint best;                 // highest validation AUROC (first epoch on ties)
  ModelParams<float> initial;      // parameters before the first update
  ModelParams<float> final_params;
  std::vector<EpochLog> log;
};

struct TrainHooks {
  std::function<void(const EpochLog&)> on_epoch;
  /// Starting weights (e.g. a pretrained encoder); default is seeded init.
  const ModelParams<float>* init = nullptr;
};

/// Standardizes the head input using eval-mode pooled embeddings of `split`
/// under the current encoder (see fold_input_standardization).
void calibrate_head(ModelParams<float>& params, const RunConfig& cfg, const PreparedSplit& split);

/// Deterministic selective-unfreezing loop. Update k (0-based) uses
/// lr_at(k + 1, total, warmup, peak) per tier. The batch gradient is the mean
/// of per-view losses; the last partial batch is kept. NumericError if the
/// loss becomes non-finite.
TrainResult train(const RunConfig& cfg, const PreparedSplit& train_split, const PreparedSplit& val_split,
                  const TrainHooks& hooks = {});

/// Number of optimizer updates and warmup updates for a given training set size.
std::size_t total_updates(const TrainConfig& t, std::size_t train_views);
std::size_t warmup_updates(const TrainConfig& t, std::size_t total);

}  // namespace radtriage
