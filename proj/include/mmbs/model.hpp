#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mmbs/corpus.hpp"

namespace mmbs {

/// Dense row-major matrix; biases are 1 x n.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::size_t size() const { return data.size(); }

  bool operator==(const Tensor&) const = default;
};

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t max_len = 32;
  std::size_t d_emb = 32;
  std::size_t d_text = 32;
  std::size_t d_v = 16;
  std::size_t d_vis = 32;
  std::size_t d_joint = 64;
  std::size_t n_answers = 0;
  double init_scale = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

nlohmann::ordered_json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Parameters of the toy backbone:
///   h     = mean_j tanh(tok_emb[q_j] + pos_emb[j])      question encoder
///   T     = text_w h + text_b
///   V'    = vis_w v + vis_b                               image encoder
///   joint = tanh(fuse_w [T; V'] + fuse_b)                 fusion F(V, T)
///   logit = clf_w joint + clf_b                           classifier
/// The tanh inside the pooled sum is what makes the encoder order-sensitive.
struct ModelParams {
  Tensor tok_emb, pos_emb;
  Tensor text_w, text_b;
  Tensor vis_w, vis_b;
  Tensor fuse_w, fuse_b;
  Tensor clf_w, clf_b;

  static ModelParams zeros(const ModelConfig& cfg);
  static ModelParams random(const ModelConfig& cfg);

  template <typename F>
  void for_each(F&& f) {
    f("tok_emb", tok_emb);
    f("pos_emb", pos_emb);
    f("text_w", text_w);
    f("text_b", text_b);
    f("vis_w", vis_w);
    f("vis_b", vis_b);
    f("fuse_w", fuse_w);
    f("fuse_b", fuse_b);
    f("clf_w", clf_w);
    f("clf_b", clf_b);
  }
  template <typename F>
  void for_each(F&& f) const {
    const_cast<ModelParams*>(this)->for_each([&](std::string_view name, Tensor& t) { f(name, std::as_const(t)); });
  }

  bool operator==(const ModelParams&) const = default;
};

/// Intermediate values kept for the backward pass.
struct ForwardCache {
  std::vector<std::size_t> ids;
  std::vector<double> pre_pool;  // L x d_emb, tanh(tok + pos)
  std::vector<double> pooled;    // h
  std::vector<double> text;      // T
  std::vector<double> visual_in;
  std::vector<double> visual;    // V'
  std::vector<double> joint;
  std::vector<double> logits;
};

struct Forward {
  std::vector<double> joint;
  std::vector<double> logits;
};

std::vector<double> encode_text(const ModelParams& p, std::span<const std::size_t> ids);
void forward(const ModelParams& p, std::span<const std::size_t> ids, std::span<const double> visual, ForwardCache& cache);
Forward forward(const ModelParams& p, std::span<const std::size_t> ids, std::span<const double> visual);

inline constexpr double kProbEpsilon = 1e-12;

/// Mean over answers of the binary cross entropy between sigmoid(logits) and
/// soft targets, with sigmoid clamped to [eps, 1 - eps].
double vqa_loss(std::span<const double> logits, std::span<const double> targets);
/// Same loss; writes d loss / d logits into `grad`.
double vqa_loss_grad(std::span<const double> logits, std::span<const double> targets, std::span<double> grad);

double cosine(std::span<const double> a, std::span<const double> b);

/// InfoNCE with cosine scores and no temperature, averaged over positives.
/// Throws NumericError on a zero-norm vector.
double contrastive_loss(std::span<const double> anchor, const std::vector<std::vector<double>>& positives,
                        const std::vector<std::vector<double>>& negatives);

inline double total_loss(double vqa, double cl, double alpha) { return vqa + alpha * cl; }

/// One training example: the original question, its visual features, sparse
/// soft targets over the answer vocabulary and the resolved positive
/// questions (all sharing the same visual features).
struct BatchItem {
  std::vector<std::size_t> question;
  std::span<const double> visual;
  std::vector<std::pair<std::size_t, double>> targets;
  std::vector<std::vector<std::size_t>> positives;
};

struct BatchResult {
  double vqa = 0.0;  // mean over the batch
  double cl = 0.0;   // mean over anchors; 0 when alpha == 0
  double total = 0.0;
  ModelParams grad;
  std::size_t vqa_terms = 0;          // questions scored by the classification loss
  std::size_t positive_forwards = 0;  // positive questions run through the encoder
};

/// Loss of a batch, and with `with_grad` its exact gradient w.r.t. every
/// parameter. Negatives of anchor i are the original-form joint embeddings of
/// the other batch items. The contrastive term is skipped entirely when
/// alpha == 0. Throws NumericError naming the tensor on a non-finite gradient.
BatchResult backward(const ModelParams& p, std::span<const BatchItem> batch, double alpha, bool with_grad = true);

/// A trained backbone with the vocabularies it was built for.
class Model {
 public:
  Model() = default;
  Model(ModelConfig cfg, ModelParams params, std::vector<std::string> token_vocab,
        std::vector<std::string> answer_vocab);

  const ModelConfig& config() const { return config_; }
  const ModelParams& params() const { return params_; }
  ModelParams& params() { return params_; }
  const std::vector<std::string>& token_vocab() const { return token_vocab_; }
  const std::vector<std::string>& answer_vocab() const { return answer_vocab_; }

  /// Throws DataError on an unknown token or an over-long question.
  std::vector<std::size_t> token_ids(std::span<const std::string> question) const;
  /// Answer vocabulary index, or -1 when unknown.
  std::ptrdiff_t answer_id(std::string_view answer) const;
  /// Argmax of the logits; ties resolve to the lowest index.
  std::size_t predict(std::span<const std::string> question, std::span<const double> visual) const;

  bool operator==(const Model& o) const {
    return config_ == o.config_ && params_ == o.params_ && token_vocab_ == o.token_vocab_ &&
           answer_vocab_ == o.answer_vocab_;
  }

 private:
  void index();

  ModelConfig config_;
  ModelParams params_;
  std::vector<std::string> token_vocab_;
  std::vector<std::string> answer_vocab_;
  std::unordered_map<std::string, std::size_t> token_lookup_;
  std::unordered_map<std::string, std::size_t> answer_lookup_;
};

/// Versioned binary checkpoint: magic, version, a JSON block (model config,
/// vocabularies, caller metadata), every tensor as little-endian doubles, and
/// a trailing FNV-1a checksum over everything before it.
void save_checkpoint(const Model& m, const nlohmann::ordered_json& meta, const std::filesystem::path& path);

struct Checkpoint {
  Model model;
  nlohmann::ordered_json meta;
};

/// Throws DataError on version mismatch, truncation or checksum failure.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mmbs
