#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <vector>

#include <json.hpp>

#include "mmbs/corpus.hpp"
#include "mmbs/model.hpp"
#include "mmbs/positives.hpp"
#include "mmbs/selection.hpp"

namespace mmbs {

struct TrainConfig {
  Strategy strategy = Strategy::SR;
  double alpha = 1.0;  // weight of the contrastive term
  double beta = 0.4;   // initial unbiased-answer proportion
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  // Draw a fresh permutation for Shuffling positives every epoch; otherwise
  // each sample keeps one permutation for the whole run.
  bool shuffle_per_epoch = true;
  EntropyBase entropy_base = EntropyBase::Natural;

  std::size_t d_emb = 32;
  std::size_t d_text = 32;
  std::size_t d_vis = 32;
  std::size_t d_joint = 32;
  double init_scale = 1.0;
  std::size_t max_len = 0;  // 0: longest question in the training set

  /// Throws ConfigError.
  void validate() const;
};

nlohmann::ordered_json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EpochStats {
  std::size_t epoch = 0;
  double vqa = 0.0;  // mean over samples
  double cl = 0.0;   // mean over anchors; 0 when alpha == 0
  double total = 0.0;

  bool operator==(const EpochStats&) const = default;
};

struct TrainCounters {
  std::size_t exempt_samples = 0;         // unbiased samples (original question as positive)
  std::size_t constructed_per_epoch = 0;  // Shuffling/Removal positives built each epoch
  std::size_t removal_fallbacks = 0;      // RemovalEmpty replaced by the original, per epoch
  std::size_t vqa_original_terms = 0;     // classification-loss evaluations, all original-form
  std::size_t vqa_positive_terms = 0;     // classification-loss evaluations on positives; stays 0
  std::size_t positive_forwards = 0;
  std::size_t selection_runs = 0;         // unbiased selection is computed once per run
};

struct TrainResult {
  Model model;
  std::vector<EpochStats> history;
  TrainCounters counters;
  std::set<std::int64_t> unbiased;
};

using EpochCallback = std::function<void(const EpochStats&, const Model&)>;

/// Selects unbiased samples once from `train_set`, then runs epochs of
/// shuffled mini-batches (short last batch kept) with one Adam step each.
/// Throws NumericError naming epoch and batch on a non-finite loss.
TrainResult train(const Dataset& train_set, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Run manifest written next to checkpoints.
nlohmann::ordered_json run_manifest(const TrainConfig& cfg, const TrainResult& r, const Dataset& train_set);

}  // namespace mmbs
