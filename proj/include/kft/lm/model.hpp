#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace kft::lm {

struct ModelConfig {
  int vocab_size = 0;
  int d_model = 64;
  int n_heads = 4;
  int n_layers = 4;
  int d_ff = 256;
  int max_seq = 256;
  uint64_t seed = 0;
};

void validate_config(const ModelConfig& cfg);

struct LayerParams {
  std::vector<double> ln1_g, ln1_b;
  std::vector<double> attn_q, attn_k, attn_v, attn_o;  // [d][d] row-major
  std::vector<double> ln2_g, ln2_b;
  std::vector<double> ff_w1, ff_b1;  // [d][d_ff], [d_ff]
  std::vector<double> ff_w2, ff_b2;  // [d_ff][d], [d]
};

struct LoraLayer {
  std::vector<double> q_down, q_up;  // [d][r], [r][d]
  std::vector<double> v_down, v_up;
};

struct LoraAdapter {
  int rank = 4;
  double scaling = 0.5;
  std::vector<LoraLayer> layers;
};

struct ModelState {
  ModelConfig config;
  std::vector<double> tok_emb;  // [V][d]
  std::vector<double> pos_emb;  // [max_seq][d]
  std::vector<LayerParams> layers;
  std::vector<double> final_ln_g, final_ln_b;
  std::vector<double> out_proj;  // [d][V]
  std::optional<LoraAdapter> lora;
};

struct ParamRef {
  std::string name;
  std::vector<double>* data = nullptr;
  std::vector<int> shape;
  bool is_lora = false;
};

// Enumerates every named parameter array in a fixed, stable order.
std::vector<ParamRef> named_params(ModelState& model, bool include_lora = true);

// Gradients and optimizer slots are keyed by the same names.
using ParamMap = std::map<std::string, std::vector<double>>;

long param_count(const ModelState& model, bool include_lora = false);

// Parameters live as doubles but are kept exactly representable in float32 so
// checkpoints round-trip bit-identically. Applied after init and after every
// optimizer step.
void quantize_to_f32_grid(ModelState& model);

// Deterministic init: weights N(0, 0.02^2) on the float32 grid, layer-norm
// gains 1, all biases 0.
ModelState init_model(const ModelConfig& cfg);

ModelState attach_lora(const ModelState& model, int rank, double scaling);
ModelState merge_lora(const ModelState& model);

}  // namespace kft::lm
