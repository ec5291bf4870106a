#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kft/corpus/dataset.hpp"
#include "kft/corpus/tokenizer.hpp"
#include "kft/lm/model.hpp"
#include "kft/train/ppo.hpp"
#include "kft/train/reward.hpp"
#include "kft/train/stages.hpp"

namespace kft::train {

enum class Stage { PT, KPT, SFT, RM, PPO };

std::string stage_tag(Stage s);
Stage stage_from_tag(const std::string& tag);

// First stage must be PT or KPT; SFT needs a pre-training stage before it,
// RM needs SFT, PPO needs RM; no duplicates.
void validate_stage_order(const std::vector<Stage>& stages);

struct PipelineInputs {
  std::vector<std::string> knowledge_corpus;  // S
  std::vector<std::string> general_corpus;    // G
  std::vector<corpus::DialoguePair> sft_pairs;
  std::vector<corpus::PreferenceTriple> preference_triples;
  std::vector<std::string> ppo_queries;
};

struct PipelineConfigs {
  lm::ModelConfig model;
  TrainConfig pretrain;
  TrainConfig sft;
  TrainConfig rm;
  PpoConfig ppo;
  uint64_t global_seed = 0;
  bool sft_use_lora = true;
  int lora_rank = 4;
  double lora_scaling = 0.5;
};

struct StageRecord {
  Stage stage;
  std::string tag;
  std::filesystem::path checkpoint;
  Curve curve;
};

struct StageArtifacts {
  std::vector<StageRecord> records;
  lm::ModelState final_model;
  std::optional<RewardModel> reward_model;
  std::filesystem::path reward_head_path;
  std::vector<PpoBatchStats> ppo_stats;
};

// Runs the stages in order with per-stage seeds derived from global_seed,
// checkpointing after each into out_dir/checkpoints and writing loss/reward
// curves into out_dir/curves.
StageArtifacts run_pipeline(const std::vector<Stage>& stages,
                            const PipelineInputs& inputs,
                            const PipelineConfigs& configs,
                            const corpus::Vocab& vocab,
                            const std::filesystem::path& out_dir);

void write_curve_csv(const Curve& curve, const std::filesystem::path& path);

}  // namespace kft::train
