#include "mmbs/model.hpp"

#include <algorithm>
#include <cmath>

#include "mmbs/error.hpp"
#include "mmbs/rng.hpp"

namespace mmbs {

namespace {

// out = W x + b
void affine(const Tensor& w, const Tensor& b, std::span<const double> x, std::vector<double>& out) {
  out.assign(w.rows, 0.0);
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double* wr = w.data.data() + r * w.cols;
    double acc = b.data[r];
    for (std::size_t c = 0; c < w.cols; ++c) acc += wr[c] * x[c];
    out[r] = acc;
  }
}

// gw += dy x^T, gb += dy, dx = W^T dy (dx optional)
void affine_backward(const Tensor& w, std::span<const double> x, std::span<const double> dy, Tensor& gw, Tensor& gb,
                     std::vector<double>* dx) {
  if (dx) dx->assign(w.cols, 0.0);
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    gb.data[r] += g;
    double* gr = gw.data.data() + r * w.cols;
    const double* wr = w.data.data() + r * w.cols;
    for (std::size_t c = 0; c < w.cols; ++c) gr[c] += g * x[c];
    if (dx) {
      for (std::size_t c = 0; c < w.cols; ++c) (*dx)[c] += g * wr[c];
    }
  }
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// log sigmoid(x) without overflow.
double log_sigmoid(double x) { return -(std::max(-x, 0.0) + std::log1p(std::exp(-std::abs(x)))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

const double kLogEps = std::log(kProbEpsilon);
const double kLogOneMinusEps = std::log1p(-kProbEpsilon);

void check_norm(double n, const char* what) {
  if (!(n > 0.0) || !std::isfinite(n)) throw NumericError(std::string("zero-norm or non-finite ") + what + " embedding");
}

void backprop_encoder(const ModelParams& p, const ForwardCache& c, std::span<const double> d_joint, ModelParams& g) {
  const std::size_t dj = p.fuse_w.rows;
  std::vector<double> dz(dj);
  for (std::size_t i = 0; i < dj; ++i) dz[i] = d_joint[i] * (1.0 - c.joint[i] * c.joint[i]);

  std::vector<double> concat(c.text);
  concat.insert(concat.end(), c.visual.begin(), c.visual.end());
  std::vector<double> d_concat;
  affine_backward(p.fuse_w, concat, dz, g.fuse_w, g.fuse_b, &d_concat);

  const std::size_t dt = c.text.size();
  std::span<const double> d_text(d_concat.data(), dt);
  std::span<const double> d_vis(d_concat.data() + dt, c.visual.size());

  affine_backward(p.vis_w, c.visual_in, d_vis, g.vis_w, g.vis_b, nullptr);
  std::vector<double> d_pooled;
  affine_backward(p.text_w, c.pooled, d_text, g.text_w, g.text_b, &d_pooled);

  const std::size_t d = p.tok_emb.cols;
  const double inv_len = 1.0 / static_cast<double>(c.ids.size());
  for (std::size_t j = 0; j < c.ids.size(); ++j) {
    const double* u = c.pre_pool.data() + j * d;
    auto tok = g.tok_emb.row(c.ids[j]);
    auto pos = g.pos_emb.row(j);
    for (std::size_t k = 0; k < d; ++k) {
      const double du = d_pooled[k] * inv_len * (1.0 - u[k] * u[k]);
      tok[k] += du;
      pos[k] += du;
    }
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size == 0 || max_len == 0 || d_emb == 0 || d_text == 0 || d_v == 0 || d_vis == 0 || d_joint == 0 ||
      n_answers == 0) {
    throw ConfigError("model dimensions must all be at least 1");
  }
  if (!(init_scale > 0.0) || !std::isfinite(init_scale)) throw ConfigError("init_scale must be positive");
}

nlohmann::ordered_json to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["vocab_size"] = c.vocab_size;
  j["max_len"] = c.max_len;
  j["d_emb"] = c.d_emb;
  j["d_text"] = c.d_text;
  j["d_v"] = c.d_v;
  j["d_vis"] = c.d_vis;
  j["d_joint"] = c.d_joint;
  j["n_answers"] = c.n_answers;
  j["init_scale"] = c.init_scale;
  j["seed"] = c.seed;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.max_len = j.at("max_len").get<std::size_t>();
    c.d_emb = j.at("d_emb").get<std::size_t>();
    c.d_text = j.at("d_text").get<std::size_t>();
    c.d_v = j.at("d_v").get<std::size_t>();
    c.d_vis = j.at("d_vis").get<std::size_t>();
    c.d_joint = j.at("d_joint").get<std::size_t>();
    c.n_answers = j.at("n_answers").get<std::size_t>();
    c.init_scale = j.at("init_scale").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model config: ") + e.what());
  }
  return c;
}

ModelParams ModelParams::zeros(const ModelConfig& cfg) {
  cfg.validate();
  ModelParams p;
  p.tok_emb = Tensor(cfg.vocab_size, cfg.d_emb);
  p.pos_emb = Tensor(cfg.max_len, cfg.d_emb);
  p.text_w = Tensor(cfg.d_text, cfg.d_emb);
  p.text_b = Tensor(1, cfg.d_text);
  p.vis_w = Tensor(cfg.d_vis, cfg.d_v);
  p.vis_b = Tensor(1, cfg.d_vis);
  p.fuse_w = Tensor(cfg.d_joint, cfg.d_text + cfg.d_vis);
  p.fuse_b = Tensor(1, cfg.d_joint);
  p.clf_w = Tensor(cfg.n_answers, cfg.d_joint);
  p.clf_b = Tensor(1, cfg.n_answers);
  return p;
}

ModelParams ModelParams::random(const ModelConfig& cfg) {
  ModelParams p = zeros(cfg);
  Rng rng = Rng::stream(cfg.seed, {Rng::key("init")});
  // Embeddings ~ N(0, (scale/2)^2); weights ~ N(0, scale^2 / fan_in); biases 0.
  auto fill = [&](Tensor& t, double stddev) {
    for (auto& v : t.data) v = stddev * rng.normal();
  };
  fill(p.tok_emb, 0.5 * cfg.init_scale);
  fill(p.pos_emb, 0.5 * cfg.init_scale);
  for (Tensor* w : {&p.text_w, &p.vis_w, &p.fuse_w, &p.clf_w}) {
    fill(*w, cfg.init_scale / std::sqrt(static_cast<double>(w->cols)));
  }
  return p;
}

// ---------------------------------------------------------------------------

namespace {

void encode_into(const ModelParams& p, std::span<const std::size_t> ids, ForwardCache& c) {
  const std::size_t d = p.tok_emb.cols;
  if (ids.empty()) throw DataError("empty question");
  if (ids.size() > p.pos_emb.rows) throw DataError("question longer than the position table");
  c.ids.assign(ids.begin(), ids.end());
  c.pre_pool.assign(ids.size() * d, 0.0);
  c.pooled.assign(d, 0.0);
  for (std::size_t j = 0; j < ids.size(); ++j) {
    if (ids[j] >= p.tok_emb.rows) throw DataError("token id out of range");
    auto tok = p.tok_emb.row(ids[j]);
    auto pos = p.pos_emb.row(j);
    double* u = c.pre_pool.data() + j * d;
    for (std::size_t k = 0; k < d; ++k) {
      u[k] = std::tanh(tok[k] + pos[k]);
      c.pooled[k] += u[k];
    }
  }
  const double inv_len = 1.0 / static_cast<double>(ids.size());
  for (auto& v : c.pooled) v *= inv_len;
  affine(p.text_w, p.text_b, c.pooled, c.text);
}

}  // namespace

std::vector<double> encode_text(const ModelParams& p, std::span<const std::size_t> ids) {
  ForwardCache c;
  encode_into(p, ids, c);
  return c.text;
}

void forward(const ModelParams& p, std::span<const std::size_t> ids, std::span<const double> visual, ForwardCache& c) {
  if (visual.size() != p.vis_w.cols) throw DataError("visual feature length does not match the model");
  encode_into(p, ids, c);
  c.visual_in.assign(visual.begin(), visual.end());
  affine(p.vis_w, p.vis_b, visual, c.visual);
  std::vector<double> concat(c.text);
  concat.insert(concat.end(), c.visual.begin(), c.visual.end());
  affine(p.fuse_w, p.fuse_b, concat, c.joint);
  for (auto& v : c.joint) v = std::tanh(v);
  affine(p.clf_w, p.clf_b, c.joint, c.logits);
}

Forward forward(const ModelParams& p, std::span<const std::size_t> ids, std::span<const double> visual) {
  ForwardCache c;
  forward(p, ids, visual, c);
  return {std::move(c.joint), std::move(c.logits)};
}

double vqa_loss(std::span<const double> logits, std::span<const double> targets) {
  std::vector<double> scratch(logits.size());
  return vqa_loss_grad(logits, targets, scratch);
}

double vqa_loss_grad(std::span<const double> logits, std::span<const double> targets, std::span<double> grad) {
  if (logits.size() != targets.size() || grad.size() != logits.size() || logits.empty()) {
    throw DataError("logit/target size mismatch");
  }
  const double inv_n = 1.0 / static_cast<double>(logits.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double x = logits[i];
    const double t = targets[i];
    // log s and log(1 - s) with s clamped to [eps, 1 - eps]; a clamped side
    // contributes no gradient.
    double log_s = log_sigmoid(x);
    double log_1ms = log_sigmoid(-x);
    const double s = sigmoid(x);
    double g = 0.0;
    if (log_s < kLogEps) {
      log_s = kLogEps;
    } else if (log_s > kLogOneMinusEps) {
      log_s = kLogOneMinusEps;
    } else {
      g -= t * (1.0 - s);
    }
    if (log_1ms < kLogEps) {
      log_1ms = kLogEps;
    } else if (log_1ms > kLogOneMinusEps) {
      log_1ms = kLogOneMinusEps;
    } else {
      g += (1.0 - t) * s;
    }
    loss -= t * log_s + (1.0 - t) * log_1ms;
    grad[i] = g * inv_n;
  }
  return loss * inv_n;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a), nb = norm(b);
  check_norm(na, "first");
  check_norm(nb, "second");
  return dot(a, b) / (na * nb);
}

double contrastive_loss(std::span<const double> anchor, const std::vector<std::vector<double>>& positives,
                        const std::vector<std::vector<double>>& negatives) {
  if (positives.empty()) throw DataError("contrastive loss needs at least one positive");
  double neg_sum = 0.0;
  for (const auto& n : negatives) neg_sum += std::exp(cosine(anchor, n));
  double total = 0.0;
  for (const auto& p : positives) {
    const double cp = cosine(anchor, p);
    total += -cp + std::log(std::exp(cp) + neg_sum);
  }
  return total / static_cast<double>(positives.size());
}

BatchResult backward(const ModelParams& p, std::span<const BatchItem> batch, double alpha, bool with_grad) {
  if (batch.empty()) throw DataError("empty batch");
  const std::size_t n = batch.size();
  const std::size_t n_ans = p.clf_w.rows;
  const std::size_t dj = p.fuse_w.rows;
  const double inv_n = 1.0 / static_cast<double>(n);
  const bool contrast = alpha != 0.0;

  BatchResult res;
  if (with_grad) res.grad = ModelParams::zeros({p.tok_emb.rows, p.pos_emb.rows, p.tok_emb.cols, p.text_w.rows,
                                                p.vis_w.cols, p.vis_w.rows, dj, n_ans, 1.0, 0});

  std::vector<ForwardCache> orig(n);
  std::vector<std::vector<ForwardCache>> pos(n);
  std::vector<std::vector<double>> d_orig(n, std::vector<double>(with_grad ? dj : 0, 0.0));
  std::vector<std::vector<std::vector<double>>> d_pos(n);

  std::vector<double> targets(n_ans), g_logits(n_ans), d_joint;
  double vqa_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const BatchItem& item = batch[i];
    forward(p, item.question, item.visual, orig[i]);
    std::fill(targets.begin(), targets.end(), 0.0);
    for (const auto& [a, s] : item.targets) {
      if (a >= n_ans) throw DataError("target answer index out of range");
      targets[a] = s;
    }
    vqa_sum += vqa_loss_grad(orig[i].logits, targets, g_logits);
    ++res.vqa_terms;
    if (with_grad) {
      for (auto& g : g_logits) g *= inv_n;
      affine_backward(p.clf_w, orig[i].joint, g_logits, res.grad.clf_w, res.grad.clf_b, &d_joint);
      for (std::size_t k = 0; k < dj; ++k) d_orig[i][k] += d_joint[k];
    }
    if (contrast) {
      if (item.positives.empty()) throw DataError("batch item without a positive");
      pos[i].resize(item.positives.size());
      d_pos[i].assign(item.positives.size(), std::vector<double>(with_grad ? dj : 0, 0.0));
      for (std::size_t q = 0; q < item.positives.size(); ++q) {
        forward(p, item.positives[q], item.visual, pos[i][q]);
        ++res.positive_forwards;
      }
    }
  }
  res.vqa = vqa_sum * inv_n;

  if (contrast) {
    std::vector<double> a_norm(n);
    for (std::size_t i = 0; i < n; ++i) {
      a_norm[i] = norm(orig[i].joint);
      check_norm(a_norm[i], "anchor");
    }
    // cos between every pair of original-form embeddings
    std::vector<double> cos_aa(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t b = i + 1; b < n; ++b) {
        const double c = dot(orig[i].joint, orig[b].joint) / (a_norm[i] * a_norm[b]);
        cos_aa[i * n + b] = cos_aa[b * n + i] = c;
      }
    }
    double cl_sum = 0.0;
    std::vector<double> d_cos_neg(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& a = orig[i].joint;
      double neg_sum = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        if (b != i) neg_sum += std::exp(cos_aa[i * n + b]);
      }
      const double n_pos = static_cast<double>(pos[i].size());
      const double scale = alpha * inv_n / n_pos;
      std::fill(d_cos_neg.begin(), d_cos_neg.end(), 0.0);
      double term = 0.0;
      for (std::size_t q = 0; q < pos[i].size(); ++q) {
        const auto& pv = pos[i][q].joint;
        const double p_norm = norm(pv);
        check_norm(p_norm, "positive");
        const double cp = dot(a, pv) / (a_norm[i] * p_norm);
        const double ep = std::exp(cp);
        const double z = ep + neg_sum;
        term += -cp + std::log(z);
        if (!with_grad) continue;
        // dL/dcos(a,p) = w_p - 1, dL/dcos(a,n_b) = w_b
        const double dcp = scale * (ep / z - 1.0);
        for (std::size_t b = 0; b < n; ++b) {
          if (b != i) d_cos_neg[b] += scale * std::exp(cos_aa[i * n + b]) / z;
        }
        // d cos(a,x)/da = x/(|a||x|) - cos a/|a|^2 ; symmetric for x
        auto& da = d_orig[i];
        auto& dp = d_pos[i][q];
        for (std::size_t k = 0; k < dj; ++k) {
          da[k] += dcp * (pv[k] / (a_norm[i] * p_norm) - cp * a[k] / (a_norm[i] * a_norm[i]));
          dp[k] += dcp * (a[k] / (a_norm[i] * p_norm) - cp * pv[k] / (p_norm * p_norm));
        }
      }
      cl_sum += term / n_pos;
      if (!with_grad) continue;
      for (std::size_t b = 0; b < n; ++b) {
        if (b == i || d_cos_neg[b] == 0.0) continue;
        const double c = cos_aa[i * n + b];
        const auto& nb = orig[b].joint;
        const double g = d_cos_neg[b];
        auto& da = d_orig[i];
        auto& dn = d_orig[b];
        for (std::size_t k = 0; k < dj; ++k) {
          da[k] += g * (nb[k] / (a_norm[i] * a_norm[b]) - c * a[k] / (a_norm[i] * a_norm[i]));
          dn[k] += g * (a[k] / (a_norm[i] * a_norm[b]) - c * nb[k] / (a_norm[b] * a_norm[b]));
        }
      }
    }
    res.cl = cl_sum * inv_n;
  }
  res.total = total_loss(res.vqa, res.cl, alpha);
  if (!std::isfinite(res.total)) throw NumericError("non-finite batch loss");

  if (with_grad) {
    for (std::size_t i = 0; i < n; ++i) {
      backprop_encoder(p, orig[i], d_orig[i], res.grad);
      if (contrast) {
        for (std::size_t q = 0; q < pos[i].size(); ++q) backprop_encoder(p, pos[i][q], d_pos[i][q], res.grad);
      }
    }
    res.grad.for_each([](std::string_view name, const Tensor& t) {
      for (double v : t.data) {
        if (!std::isfinite(v)) throw NumericError("non-finite gradient in " + std::string(name));
      }
    });
  }
  return res;
}

// ---------------------------------------------------------------------------

Model::Model(ModelConfig cfg, ModelParams params, std::vector<std::string> token_vocab,
             std::vector<std::string> answer_vocab)
    : config_(std::move(cfg)),
      params_(std::move(params)),
      token_vocab_(std::move(token_vocab)),
      answer_vocab_(std::move(answer_vocab)) {
  if (token_vocab_.size() != config_.vocab_size || answer_vocab_.size() != config_.n_answers) {
    throw DataError("vocabulary sizes do not match the model config");
  }
  index();
}

void Model::index() {
  token_lookup_.clear();
  answer_lookup_.clear();
  for (std::size_t i = 0; i < token_vocab_.size(); ++i) token_lookup_.emplace(token_vocab_[i], i);
  for (std::size_t i = 0; i < answer_vocab_.size(); ++i) answer_lookup_.emplace(answer_vocab_[i], i);
}

std::vector<std::size_t> Model::token_ids(std::span<const std::string> question) const {
  if (question.size() > config_.max_len) {
    throw DataError("question of " + std::to_string(question.size()) + " tokens exceeds max_len " +
                    std::to_string(config_.max_len));
  }
  std::vector<std::size_t> ids;
  ids.reserve(question.size());
  for (const auto& t : question) {
    auto it = token_lookup_.find(t);
    if (it == token_lookup_.end()) throw DataError("unknown token '" + t + "'");
    ids.push_back(it->second);
  }
  return ids;
}

std::ptrdiff_t Model::answer_id(std::string_view answer) const {
  auto it = answer_lookup_.find(std::string(answer));
  return it == answer_lookup_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

std::size_t Model::predict(std::span<const std::string> question, std::span<const double> visual) const {
  const auto ids = token_ids(question);
  const Forward f = forward(params_, ids, visual);
  return static_cast<std::size_t>(std::max_element(f.logits.begin(), f.logits.end()) - f.logits.begin());
}

}  // namespace mmbs
