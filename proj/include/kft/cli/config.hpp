#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "kft/lm/forward.hpp"
#include "kft/lm/model.hpp"
#include "kft/train/ppo.hpp"
#include "kft/train/stages.hpp"

namespace kft::cli {

// Resolved run settings. Sources, in increasing precedence: built-in
// defaults, the JSON config file, the KFT_SEED environment variable, then
// command-line flags.
struct RunConfig {
  // paths
  std::string corpus;   // patent corpus JSONL
  std::string triples;  // optional knowledge triples JSONL
  std::string mcq;      // optional multiple-choice benchmark JSONL
  std::string out_dir = "out";

  // model
  int vocab_cap = 2048;
  lm::ModelConfig model;  // vocab_size is filled in once the vocab is built

  // training stages
  train::TrainConfig pretrain;
  train::TrainConfig sft;
  train::TrainConfig rm;
  train::PpoConfig ppo;

  // adapter policy for the fine-tuning stages
  bool sft_use_lora = true;
  int lora_rank = 4;
  double lora_scaling = 0.5;

  // evaluation
  std::string embedder = "static";  // "static" or "hidden"
  uint64_t eval_seed = 1234;
  lm::GenerationConfig gen;

  std::array<double, 3> split = {0.8, 0.1, 0.1};
  uint64_t global_seed = 42;
};

RunConfig default_config();

// Strict parse: unknown keys anywhere raise ConfigInvalid.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);

RunConfig load_run_config(const std::filesystem::path& path);

// Structural validation shared by every subcommand; does not touch the
// filesystem.
void validate_run_config(const RunConfig& cfg);

}  // namespace kft::cli
