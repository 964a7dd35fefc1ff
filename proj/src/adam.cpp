#include "mmbs/adam.hpp"

#include <cmath>
#include <vector>

namespace mmbs {

namespace {

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  z.for_each([](std::string_view, Tensor& t) { std::fill(t.data.begin(), t.data.end(), 0.0); });
  return z;
}

std::vector<Tensor*> tensors(ModelParams& p) {
  std::vector<Tensor*> out;
  p.for_each([&](std::string_view, Tensor& t) { out.push_back(&t); });
  return out;
}

std::vector<const Tensor*> tensors(const ModelParams& p) {
  std::vector<const Tensor*> out;
  p.for_each([&](std::string_view, const Tensor& t) { out.push_back(&t); });
  return out;
}

}  // namespace

Adam::Adam(const ModelParams& like, AdamConfig cfg) : cfg_(cfg), m_(zeros_like(like)), v_(zeros_like(like)) {}

void Adam::step(ModelParams& params, const ModelParams& grad) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  auto ps = tensors(params);
  auto gs = tensors(grad);
  auto ms = tensors(m_);
  auto vs = tensors(v_);
  for (std::size_t k = 0; k < ps.size(); ++k) {
    auto& p = ps[k]->data;
    const auto& g = gs[k]->data;
    auto& m = ms[k]->data;
    auto& v = vs[k]->data;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }
}

}  // namespace mmbs
