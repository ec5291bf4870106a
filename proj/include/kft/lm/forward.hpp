#pragma once

#include <optional>
#include <vector>

#include "kft/lm/model.hpp"

namespace kft::lm {

struct ForwardResult {
  std::vector<double> logits;  // [T][vocab]
  std::vector<double> hidden;  // [T][d_model], final layer-norm output
  int seq_len = 0;
};

struct LayerCache {
  std::vector<double> x_in;
  std::vector<double> ln1_xhat, ln1_rstd;
  std::vector<double> h1;
  std::vector<double> q, k, v;
  std::vector<double> hq, hv;  // [T][rank] adapter bottleneck activations
  std::vector<double> probs;   // [heads][T][T]
  std::vector<double> ctx;
  std::vector<double> x_mid;
  std::vector<double> ln2_xhat, ln2_rstd;
  std::vector<double> h2;
  std::vector<double> ff_pre, ff_act;
};

struct ForwardCache {
  int T = 0;
  std::vector<int> tokens;
  std::vector<LayerCache> layers;
  std::vector<double> x_final;
  std::vector<double> fin_xhat, fin_rstd;
  std::vector<double> hidden;
  std::vector<double> logits;
};

ForwardCache forward_cached(const ModelState& model, const std::vector<int>& tokens);
ForwardResult forward(const ModelState& model, const std::vector<int>& tokens);

// Mean masked next-token NLL: positions i with mask[i] and a successor token
// contribute -log p(token[i+1] | ...). Masked-in final positions (no
// successor) are ignored; EmptyMask if nothing contributes.
double nll_loss(const ModelState& model, const std::vector<int>& tokens,
                const std::vector<bool>& mask);

// Loss plus, when dlogits is non-null, its gradient with respect to logits.
double nll_from_logits(const std::vector<double>& logits, int vocab_size,
                       const std::vector<int>& tokens,
                       const std::vector<bool>& mask,
                       std::vector<double>* dlogits);

// Zero-filled gradient map covering every named parameter (adapter included
// when attached).
ParamMap zero_grads(ModelState& model);

// Accumulates d(objective)/d(params) into grads given d(objective)/d(logits)
// and an optional extra gradient injected at the final layer-norm output.
// While an adapter is attached only adapter entries receive gradient.
void backward(const ModelState& model, const ForwardCache& cache,
              const std::vector<double>& dlogits,
              const std::vector<double>* dhidden_extra, ParamMap& grads);

struct MaskedSeq {
  std::vector<int> tokens;
  std::vector<bool> mask;
};

// Gradient of the batch-mean of per-sequence mean masked NLL.
ParamMap grad(const ModelState& model, const std::vector<MaskedSeq>& batch,
              double* mean_loss = nullptr);

struct GenerationConfig {
  double temperature = 0.7;
  int max_new_tokens = 64;
  std::optional<int> top_k;
  uint64_t seed = 0;
  std::vector<int> stop_tokens;
  bool greedy = false;
};

// Returns prompt + sampled continuation (stop token included when hit).
std::vector<int> generate(const ModelState& model, const std::vector<int>& prompt,
                          const GenerationConfig& gen);

void softmax_row(const double* logits, int n, double* probs_out,
                 double temperature = 1.0);

}  // namespace kft::lm
