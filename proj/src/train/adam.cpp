#include "kft/train/adam.hpp"

#include <cmath>

#include "kft/common/error.hpp"

namespace kft::train {

AdamStep adam_update(double param, double grad, double m, double v, long t,
                     const AdamConfig& cfg) {
  if (t < 1) fail(Errc::ConfigInvalid, "Adam step counter must be >= 1");
  AdamStep s;
  s.m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
  s.v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad;
  double m_hat = s.m / (1.0 - std::pow(cfg.beta1, static_cast<double>(t)));
  double v_hat = s.v / (1.0 - std::pow(cfg.beta2, static_cast<double>(t)));
  s.param = param - cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps);
  return s;
}

void AdamOptimizer::step(const std::vector<ParamSpan>& spans) {
  ++t_;
  for (const auto& span : spans) {
    if (!span.grad) continue;
    if (span.grad->size() != span.size) {
      fail(Errc::ConfigInvalid, "gradient shape mismatch for " + span.name);
    }
    auto& m = m_[span.name];
    auto& v = v_[span.name];
    if (m.size() != span.size) m.assign(span.size, 0.0);
    if (v.size() != span.size) v.assign(span.size, 0.0);
    for (size_t i = 0; i < span.size; ++i) {
      AdamStep s = adam_update(span.data[i], (*span.grad)[i], m[i], v[i], t_, cfg_);
      span.data[i] = s.param;
      m[i] = s.m;
      v[i] = s.v;
    }
  }
}

void adam_step_model(AdamOptimizer& opt, lm::ModelState& model,
                     const lm::ParamMap& grads) {
  const bool adapter = model.lora.has_value();
  std::vector<ParamSpan> spans;
  for (auto& ref : lm::named_params(model, true)) {
    if (adapter && !ref.is_lora) continue;
    auto it = grads.find(ref.name);
    if (it == grads.end()) continue;
    spans.push_back({ref.name, ref.data->data(), ref.data->size(), &it->second});
  }
  opt.step(spans);
  lm::quantize_to_f32_grid(model);
}

}  // namespace kft::train
