#include "mmbs/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "mmbs/adam.hpp"
#include "mmbs/error.hpp"
#include "mmbs/rng.hpp"

namespace mmbs {

namespace {

// Everything about one training sample that does not change across epochs.
struct Prepared {
  std::vector<std::size_t> ids;
  std::vector<std::size_t> removal_ids;  // empty when removal fell back to the original
  std::vector<std::pair<std::size_t, double>> targets;
  std::vector<QuestionForm> forms;
};

}  // namespace

void TrainConfig::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be non-negative");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0,1]");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0,1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (d_emb == 0 || d_text == 0 || d_vis == 0 || d_joint == 0) throw ConfigError("model widths must be positive");
  if (!(init_scale > 0.0)) throw ConfigError("init_scale must be positive");
}

nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["strategy"] = to_string(c.strategy);
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["adam_eps"] = c.adam_eps;
  j["seed"] = c.seed;
  j["shuffle_per_epoch"] = c.shuffle_per_epoch;
  j["entropy_base"] = c.entropy_base == EntropyBase::Two ? "2" : "e";
  j["d_emb"] = c.d_emb;
  j["d_text"] = c.d_text;
  j["d_vis"] = c.d_vis;
  j["d_joint"] = c.d_joint;
  j["init_scale"] = c.init_scale;
  j["max_len"] = c.max_len;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.strategy = parse_strategy(j.value("strategy", std::string(to_string(c.strategy))));
    c.alpha = j.value("alpha", c.alpha);
    c.beta = j.value("beta", c.beta);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.seed = j.value("seed", c.seed);
    c.shuffle_per_epoch = j.value("shuffle_per_epoch", c.shuffle_per_epoch);
    c.entropy_base = j.value("entropy_base", std::string("e")) == "2" ? EntropyBase::Two : EntropyBase::Natural;
    c.d_emb = j.value("d_emb", c.d_emb);
    c.d_text = j.value("d_text", c.d_text);
    c.d_vis = j.value("d_vis", c.d_vis);
    c.d_joint = j.value("d_joint", c.d_joint);
    c.init_scale = j.value("init_scale", c.init_scale);
    c.max_len = j.value("max_len", c.max_len);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed train config: ") + e.what());
  }
  return c;
}

TrainResult train(const Dataset& train_set, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw DataError("training set is empty");

  TrainResult res;
  const auto stats = compute_stats(compute_frequencies(train_set), cfg.beta, cfg.entropy_base);
  res.unbiased = select_unbiased(train_set, stats);
  ++res.counters.selection_runs;

  std::size_t longest = 0;
  for (const auto& s : train_set.samples()) longest = std::max(longest, s.question.size());
  ModelConfig mc;
  mc.vocab_size = train_set.token_vocab().size();
  mc.max_len = cfg.max_len ? cfg.max_len : longest;
  if (mc.max_len < longest) throw ConfigError("max_len is shorter than the longest training question");
  mc.d_emb = cfg.d_emb;
  mc.d_text = cfg.d_text;
  mc.d_v = train_set.d_v();
  mc.d_vis = cfg.d_vis;
  mc.d_joint = cfg.d_joint;
  mc.n_answers = train_set.answer_vocab().size();
  mc.init_scale = cfg.init_scale;
  mc.seed = cfg.seed;
  res.model = Model(mc, ModelParams::random(mc), train_set.token_vocab(), train_set.answer_vocab());
  const Model& model = res.model;

  const auto& samples = train_set.samples();
  std::vector<Prepared> prep(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    Prepared& p = prep[i];
    p.ids = model.token_ids(s.question);
    for (const auto& a : s.answers) {
      p.targets.emplace_back(static_cast<std::size_t>(model.answer_id(a.text)), a.score);
    }
    const bool exempt = res.unbiased.contains(s.id);
    res.counters.exempt_samples += exempt;
    p.forms = positive_forms(cfg.strategy, s.qtype, exempt);
    for (auto& f : p.forms) {
      if (f != QuestionForm::Removal) {
        res.counters.constructed_per_epoch += f == QuestionForm::Shuffling;
        continue;
      }
      try {
        p.removal_ids = model.token_ids(make_removal(s.question, s.category));
        ++res.counters.constructed_per_epoch;
      } catch (const RemovalEmpty&) {
        f = QuestionForm::Original;
        ++res.counters.removal_fallbacks;
      }
    }
  }

  Adam adam(res.model.params(), {cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps});
  const bool contrast = cfg.alpha != 0.0;
  std::vector<std::size_t> order(samples.size());
  std::vector<BatchItem> batch;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng order_rng = Rng::stream(cfg.seed, {Rng::key("order"), epoch});
    order_rng.shuffle(std::span(order));

    double vqa_sum = 0.0, cl_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        const Prepared& p = prep[i];
        BatchItem item{p.ids, samples[i].visual, p.targets, {}};
        if (contrast) {
          for (QuestionForm f : p.forms) {
            switch (f) {
              case QuestionForm::Original: item.positives.push_back(p.ids); break;
              case QuestionForm::Removal: item.positives.push_back(p.removal_ids); break;
              case QuestionForm::Shuffling: {
                Rng rng = shuffle_stream(cfg.seed, cfg.shuffle_per_epoch ? epoch : 0, samples[i].id);
                item.positives.push_back(make_shuffling(std::span<const std::size_t>(p.ids), rng));
                break;
              }
            }
          }
        }
        batch.push_back(std::move(item));
      }

      BatchResult br;
      try {
        br = backward(res.model.params(), batch, cfg.alpha);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_index) + ": " +
                           e.what());
      }
      res.counters.vqa_original_terms += br.vqa_terms;
      res.counters.positive_forwards += br.positive_forwards;
      const double w = static_cast<double>(batch.size());
      vqa_sum += br.vqa * w;
      cl_sum += br.cl * w;
      adam.step(res.model.params(), br.grad);
    }

    EpochStats es;
    es.epoch = epoch;
    const double n = static_cast<double>(samples.size());
    es.vqa = vqa_sum / n;
    es.cl = cl_sum / n;
    es.total = total_loss(es.vqa, es.cl, cfg.alpha);
    res.history.push_back(es);
    if (on_epoch) on_epoch(es, res.model);
  }
  return res;
}

nlohmann::ordered_json run_manifest(const TrainConfig& cfg, const TrainResult& r, const Dataset& train_set) {
  nlohmann::ordered_json m;
  m["train_config"] = to_json(cfg);
  m["model_config"] = to_json(r.model.config());
  m["data_provenance"] = train_set.provenance();
  m["train_samples"] = train_set.size();
  nlohmann::ordered_json c;
  c["exempt_samples"] = r.counters.exempt_samples;
  c["constructed_positives_per_epoch"] = r.counters.constructed_per_epoch;
  c["removal_fallbacks_per_epoch"] = r.counters.removal_fallbacks;
  c["vqa_original_terms"] = r.counters.vqa_original_terms;
  c["vqa_positive_terms"] = r.counters.vqa_positive_terms;
  c["positive_forwards"] = r.counters.positive_forwards;
  m["counts"] = std::move(c);
  auto hist = nlohmann::ordered_json::array();
  for (const auto& e : r.history) {
    nlohmann::ordered_json h;
    h["epoch"] = e.epoch;
    h["vqa"] = e.vqa;
    h["cl"] = e.cl;
    h["total"] = e.total;
    hist.push_back(std::move(h));
  }
  m["history"] = std::move(hist);
  return m;
}

}  // namespace mmbs
