#include "kft/lm/model.hpp"

#include "kft/common/error.hpp"
#include "kft/common/rng.hpp"

namespace kft::lm {

void validate_config(const ModelConfig& cfg) {
  if (cfg.vocab_size <= 0 || cfg.d_model <= 0 || cfg.n_heads <= 0 ||
      cfg.n_layers <= 0 || cfg.d_ff <= 0) {
    fail(Errc::ConfigInvalid, "model dimensions must be positive");
  }
  if (cfg.d_model % cfg.n_heads != 0) {
    fail(Errc::ConfigInvalid, "d_model must be divisible by n_heads");
  }
  if (cfg.max_seq < 8) {
    fail(Errc::ConfigInvalid, "max_seq must be at least 8");
  }
}

std::vector<ParamRef> named_params(ModelState& model, bool include_lora) {
  const auto& c = model.config;
  std::vector<ParamRef> refs;
  auto add = [&](const std::string& name, std::vector<double>& v,
                 std::vector<int> shape, bool is_lora = false) {
    refs.push_back({name, &v, std::move(shape), is_lora});
  };
  add("tok_emb", model.tok_emb, {c.vocab_size, c.d_model});
  add("pos_emb", model.pos_emb, {c.max_seq, c.d_model});
  for (int l = 0; l < c.n_layers; ++l) {
    auto& L = model.layers[static_cast<size_t>(l)];
    std::string p = "layers." + std::to_string(l) + ".";
    add(p + "ln1_g", L.ln1_g, {c.d_model});
    add(p + "ln1_b", L.ln1_b, {c.d_model});
    add(p + "attn_q", L.attn_q, {c.d_model, c.d_model});
    add(p + "attn_k", L.attn_k, {c.d_model, c.d_model});
    add(p + "attn_v", L.attn_v, {c.d_model, c.d_model});
    add(p + "attn_o", L.attn_o, {c.d_model, c.d_model});
    add(p + "ln2_g", L.ln2_g, {c.d_model});
    add(p + "ln2_b", L.ln2_b, {c.d_model});
    add(p + "ff_w1", L.ff_w1, {c.d_model, c.d_ff});
    add(p + "ff_b1", L.ff_b1, {c.d_ff});
    add(p + "ff_w2", L.ff_w2, {c.d_ff, c.d_model});
    add(p + "ff_b2", L.ff_b2, {c.d_model});
  }
  add("final_ln_g", model.final_ln_g, {c.d_model});
  add("final_ln_b", model.final_ln_b, {c.d_model});
  add("out_proj", model.out_proj, {c.d_model, c.vocab_size});
  if (include_lora && model.lora.has_value()) {
    int r = model.lora->rank;
    for (int l = 0; l < c.n_layers; ++l) {
      auto& L = model.lora->layers[static_cast<size_t>(l)];
      std::string p = "layers." + std::to_string(l) + ".";
      add(p + "lora_q_down", L.q_down, {c.d_model, r}, true);
      add(p + "lora_q_up", L.q_up, {r, c.d_model}, true);
      add(p + "lora_v_down", L.v_down, {c.d_model, r}, true);
      add(p + "lora_v_up", L.v_up, {r, c.d_model}, true);
    }
  }
  return refs;
}

long param_count(const ModelState& model, bool include_lora) {
  long n = 0;
  auto& mut = const_cast<ModelState&>(model);
  for (const auto& ref : named_params(mut, include_lora)) {
    n += static_cast<long>(ref.data->size());
  }
  return n;
}

void quantize_to_f32_grid(ModelState& model) {
  for (auto& ref : named_params(model, true)) {
    for (double& x : *ref.data) x = static_cast<double>(static_cast<float>(x));
  }
}

ModelState init_model(const ModelConfig& cfg) {
  validate_config(cfg);
  ModelState m;
  m.config = cfg;
  const int d = cfg.d_model;
  m.tok_emb.assign(static_cast<size_t>(cfg.vocab_size) * d, 0.0);
  m.pos_emb.assign(static_cast<size_t>(cfg.max_seq) * d, 0.0);
  m.layers.resize(static_cast<size_t>(cfg.n_layers));
  for (auto& L : m.layers) {
    L.ln1_g.assign(static_cast<size_t>(d), 1.0);
    L.ln1_b.assign(static_cast<size_t>(d), 0.0);
    L.attn_q.assign(static_cast<size_t>(d) * d, 0.0);
    L.attn_k.assign(static_cast<size_t>(d) * d, 0.0);
    L.attn_v.assign(static_cast<size_t>(d) * d, 0.0);
    L.attn_o.assign(static_cast<size_t>(d) * d, 0.0);
    L.ln2_g.assign(static_cast<size_t>(d), 1.0);
    L.ln2_b.assign(static_cast<size_t>(d), 0.0);
    L.ff_w1.assign(static_cast<size_t>(d) * cfg.d_ff, 0.0);
    L.ff_b1.assign(static_cast<size_t>(cfg.d_ff), 0.0);
    L.ff_w2.assign(static_cast<size_t>(cfg.d_ff) * d, 0.0);
    L.ff_b2.assign(static_cast<size_t>(d), 0.0);
  }
  m.final_ln_g.assign(static_cast<size_t>(d), 1.0);
  m.final_ln_b.assign(static_cast<size_t>(d), 0.0);
  m.out_proj.assign(static_cast<size_t>(d) * cfg.vocab_size, 0.0);

  Rng rng(cfg.seed);
  auto fill_normal = [&](std::vector<double>& v) {
    for (double& x : v) x = 0.02 * rng.next_gaussian();
  };
  fill_normal(m.tok_emb);
  fill_normal(m.pos_emb);
  for (auto& L : m.layers) {
    fill_normal(L.attn_q);
    fill_normal(L.attn_k);
    fill_normal(L.attn_v);
    fill_normal(L.attn_o);
    fill_normal(L.ff_w1);
    fill_normal(L.ff_w2);
  }
  fill_normal(m.out_proj);
  quantize_to_f32_grid(m);
  return m;
}

ModelState attach_lora(const ModelState& model, int rank, double scaling) {
  if (rank <= 0 || rank > model.config.d_model) {
    fail(Errc::RankTooLarge, "LoRA rank must be in 1..d_model");
  }
  ModelState out = model;
  LoraAdapter a;
  a.rank = rank;
  a.scaling = scaling;
  a.layers.resize(static_cast<size_t>(model.config.n_layers));
  const int d = model.config.d_model;
  Rng rng(derive_seed(model.config.seed, "lora-init"));
  for (auto& L : a.layers) {
    L.q_down.assign(static_cast<size_t>(d) * rank, 0.0);
    L.q_up.assign(static_cast<size_t>(rank) * d, 0.0);
    L.v_down.assign(static_cast<size_t>(d) * rank, 0.0);
    L.v_up.assign(static_cast<size_t>(rank) * d, 0.0);
    for (double& x : L.q_down) x = 0.02 * rng.next_gaussian();
    for (double& x : L.v_down) x = 0.02 * rng.next_gaussian();
    // up-projections stay zero so the adapter starts as an exact no-op
  }
  out.lora = std::move(a);
  quantize_to_f32_grid(out);
  return out;
}

ModelState merge_lora(const ModelState& model) {
  if (!model.lora.has_value()) return model;
  ModelState out = model;
  const int d = model.config.d_model;
  const int r = model.lora->rank;
  const double s = model.lora->scaling;
  for (int l = 0; l < model.config.n_layers; ++l) {
    const auto& A = model.lora->layers[static_cast<size_t>(l)];
    auto& L = out.layers[static_cast<size_t>(l)];
    // W += s * down @ up, accumulated in double to keep merged logits close
    // to the adapter-attached forward
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        double dq = 0.0, dv = 0.0;
        for (int k = 0; k < r; ++k) {
          dq += A.q_down[static_cast<size_t>(i) * r + k] * A.q_up[static_cast<size_t>(k) * d + j];
          dv += A.v_down[static_cast<size_t>(i) * r + k] * A.v_up[static_cast<size_t>(k) * d + j];
        }
        L.attn_q[static_cast<size_t>(i) * d + j] += s * dq;
        L.attn_v[static_cast<size_t>(i) * d + j] += s * dv;
      }
    }
  }
  out.lora.reset();
  return out;
}

}  // namespace kft::lm
