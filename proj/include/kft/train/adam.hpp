#pragma once

#include <map>
#include <string>
#include <vector>

#include "kft/lm/model.hpp"

namespace kft::train {

struct AdamConfig {
  double learning_rate = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamStep {
  double param;
  double m;
  double v;
};

// One bias-corrected Adam update for a single coordinate at step t (1-based).
AdamStep adam_update(double param, double grad, double m, double v, long t,
                     const AdamConfig& cfg);

// Named-array view an optimizer step works over.
struct ParamSpan {
  std::string name;
  double* data = nullptr;
  size_t size = 0;
  const std::vector<double>* grad = nullptr;
};

class AdamOptimizer {
 public:
  explicit AdamOptimizer(AdamConfig cfg) : cfg_(cfg) {}

  void step(const std::vector<ParamSpan>& spans);
  long step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

// Applies grads to the model's trainable parameters (adapter only while one
// is attached) and re-snaps parameters to the float32 grid.
void adam_step_model(AdamOptimizer& opt, lm::ModelState& model,
                     const lm::ParamMap& grads);

}  // namespace kft::train
