#include "kft/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "kft/common/error.hpp"
#include "kft/corpus/tokenizer.hpp"

namespace kft::cli {

using nlohmann::json;

namespace {

void require_keys(const json& obj, const std::string& where,
                  const std::set<std::string>& allowed) {
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) {
      fail(Errc::ConfigInvalid, "unknown key \"" + key + "\" in " + where);
    }
  }
}

template <class T>
void read_field(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

void read_max_steps(const json& obj, std::optional<long>& out) {
  if (!obj.contains("max_steps")) return;
  long v = obj.at("max_steps").get<long>();
  if (v > 0) {
    out = v;
  } else {
    out.reset();
  }
}

void read_train_section(const json& obj, const std::string& where,
                        train::TrainConfig& cfg, bool with_mixture,
                        bool with_head_only) {
  std::set<std::string> allowed = {"learning_rate", "epochs", "batch_size",
                                   "max_steps"};
  if (with_mixture) {
    allowed.insert("alpha");
    allowed.insert("beta");
  }
  if (with_head_only) allowed.insert("head_only");
  require_keys(obj, where, allowed);
  read_field(obj, "learning_rate", cfg.learning_rate);
  read_field(obj, "epochs", cfg.epochs);
  read_field(obj, "batch_size", cfg.batch_size);
  if (with_mixture) {
    read_field(obj, "alpha", cfg.alpha);
    read_field(obj, "beta", cfg.beta);
  }
  if (with_head_only) read_field(obj, "head_only", cfg.rm_head_only);
  read_max_steps(obj, cfg.max_steps);
}

json train_section_json(const train::TrainConfig& cfg, bool with_mixture,
                        bool with_head_only) {
  json j;
  j["learning_rate"] = cfg.learning_rate;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  if (with_mixture) {
    j["alpha"] = cfg.alpha;
    j["beta"] = cfg.beta;
  }
  if (with_head_only) j["head_only"] = cfg.rm_head_only;
  j["max_steps"] = cfg.max_steps ? *cfg.max_steps : 0L;
  return j;
}

}  // namespace

RunConfig default_config() { return RunConfig{}; }

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) fail(Errc::ConfigInvalid, "config root must be a JSON object");
  require_keys(j, "config root",
               {"paths", "model", "train", "ppo", "lora", "eval", "split",
                "global_seed"});

  RunConfig cfg;
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    require_keys(p, "paths", {"corpus", "triples", "mcq", "out"});
    read_field(p, "corpus", cfg.corpus);
    read_field(p, "triples", cfg.triples);
    read_field(p, "mcq", cfg.mcq);
    read_field(p, "out", cfg.out_dir);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    require_keys(m, "model",
                 {"vocab_cap", "d_model", "n_heads", "n_layers", "d_ff", "max_seq"});
    read_field(m, "vocab_cap", cfg.vocab_cap);
    read_field(m, "d_model", cfg.model.d_model);
    read_field(m, "n_heads", cfg.model.n_heads);
    read_field(m, "n_layers", cfg.model.n_layers);
    read_field(m, "d_ff", cfg.model.d_ff);
    read_field(m, "max_seq", cfg.model.max_seq);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    require_keys(t, "train", {"pretrain", "sft", "rm"});
    if (t.contains("pretrain")) {
      read_train_section(t.at("pretrain"), "train.pretrain", cfg.pretrain, true, false);
    }
    if (t.contains("sft")) {
      read_train_section(t.at("sft"), "train.sft", cfg.sft, false, false);
    }
    if (t.contains("rm")) {
      read_train_section(t.at("rm"), "train.rm", cfg.rm, false, true);
    }
  }
  if (j.contains("ppo")) {
    const auto& p = j.at("ppo");
    require_keys(p, "ppo",
                 {"clip_epsilon", "ppo_epochs", "rollout_batch", "kl_coefficient",
                  "num_batches", "learning_rate", "max_new_tokens", "temperature"});
    read_field(p, "clip_epsilon", cfg.ppo.clip_epsilon);
    read_field(p, "ppo_epochs", cfg.ppo.ppo_epochs);
    read_field(p, "rollout_batch", cfg.ppo.rollout_batch);
    read_field(p, "kl_coefficient", cfg.ppo.kl_coefficient);
    read_field(p, "num_batches", cfg.ppo.num_batches);
    read_field(p, "learning_rate", cfg.ppo.learning_rate);
    read_field(p, "max_new_tokens", cfg.ppo.gen.max_new_tokens);
    read_field(p, "temperature", cfg.ppo.gen.temperature);
  }
  if (j.contains("lora")) {
    const auto& l = j.at("lora");
    require_keys(l, "lora", {"enabled", "rank", "scaling"});
    read_field(l, "enabled", cfg.sft_use_lora);
    read_field(l, "rank", cfg.lora_rank);
    read_field(l, "scaling", cfg.lora_scaling);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    require_keys(e, "eval",
                 {"embedder", "seed", "temperature", "top_k", "max_new_tokens",
                  "greedy"});
    read_field(e, "embedder", cfg.embedder);
    read_field(e, "seed", cfg.eval_seed);
    read_field(e, "temperature", cfg.gen.temperature);
    if (e.contains("top_k")) {
      int k = e.at("top_k").get<int>();
      if (k > 0) {
        cfg.gen.top_k = k;
      } else {
        cfg.gen.top_k.reset();
      }
    }
    read_field(e, "max_new_tokens", cfg.gen.max_new_tokens);
    read_field(e, "greedy", cfg.gen.greedy);
  }
  if (j.contains("split")) {
    const auto& s = j.at("split");
    if (!s.is_array() || s.size() != 3) {
      fail(Errc::ConfigInvalid, "split must be an array of three fractions");
    }
    for (int i = 0; i < 3; ++i) cfg.split[static_cast<size_t>(i)] = s.at(i).get<double>();
  }
  read_field(j, "global_seed", cfg.global_seed);
  return cfg;
}

json config_to_json(const RunConfig& cfg) {
  json j;
  j["paths"] = {{"corpus", cfg.corpus},
                {"triples", cfg.triples},
                {"mcq", cfg.mcq},
                {"out", cfg.out_dir}};
  j["model"] = {{"vocab_cap", cfg.vocab_cap},   {"d_model", cfg.model.d_model},
                {"n_heads", cfg.model.n_heads}, {"n_layers", cfg.model.n_layers},
                {"d_ff", cfg.model.d_ff},       {"max_seq", cfg.model.max_seq}};
  j["train"] = {{"pretrain", train_section_json(cfg.pretrain, true, false)},
                {"sft", train_section_json(cfg.sft, false, false)},
                {"rm", train_section_json(cfg.rm, false, true)}};
  j["ppo"] = {{"clip_epsilon", cfg.ppo.clip_epsilon},
              {"ppo_epochs", cfg.ppo.ppo_epochs},
              {"rollout_batch", cfg.ppo.rollout_batch},
              {"kl_coefficient", cfg.ppo.kl_coefficient},
              {"num_batches", cfg.ppo.num_batches},
              {"learning_rate", cfg.ppo.learning_rate},
              {"max_new_tokens", cfg.ppo.gen.max_new_tokens},
              {"temperature", cfg.ppo.gen.temperature}};
  j["lora"] = {{"enabled", cfg.sft_use_lora},
               {"rank", cfg.lora_rank},
               {"scaling", cfg.lora_scaling}};
  j["eval"] = {{"embedder", cfg.embedder},
               {"seed", cfg.eval_seed},
               {"temperature", cfg.gen.temperature},
               {"top_k", cfg.gen.top_k ? *cfg.gen.top_k : 0},
               {"max_new_tokens", cfg.gen.max_new_tokens},
               {"greedy", cfg.gen.greedy}};
  j["split"] = cfg.split;
  j["global_seed"] = cfg.global_seed;
  return j;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::Io, "cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(Errc::ConfigInvalid, "config parse failure in " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void validate_run_config(const RunConfig& cfg) {
  if (cfg.vocab_cap < 16) fail(Errc::ConfigInvalid, "vocab_cap must be >= 16");
  if (cfg.out_dir.empty()) fail(Errc::ConfigInvalid, "output directory must be set");
  lm::ModelConfig probe = cfg.model;
  probe.vocab_size = corpus::Vocab::kWordBase;  // smallest possible built vocab
  lm::validate_config(probe);
  train::validate_train_config(cfg.pretrain);
  train::validate_train_config(cfg.sft);
  train::validate_train_config(cfg.rm);
  train::validate_ppo_config(cfg.ppo);
  if (cfg.embedder != "static" && cfg.embedder != "hidden") {
    fail(Errc::ConfigInvalid, "embedder must be \"static\" or \"hidden\"");
  }
  double sum = cfg.split[0] + cfg.split[1] + cfg.split[2];
  if (cfg.split[0] < 0 || cfg.split[1] < 0 || cfg.split[2] < 0 ||
      std::abs(sum - 1.0) > 1e-9) {
    fail(Errc::ConfigInvalid, "split fractions must be non-negative and sum to 1");
  }
  if (cfg.lora_rank <= 0) fail(Errc::ConfigInvalid, "lora rank must be positive");
  if (cfg.gen.temperature <= 0 && !cfg.gen.greedy) {
    fail(Errc::ConfigInvalid, "sampling temperature must be positive");
  }
  if (cfg.gen.max_new_tokens <= 0) {
    fail(Errc::ConfigInvalid, "max_new_tokens must be positive");
  }
}

}  // namespace kft::cli
