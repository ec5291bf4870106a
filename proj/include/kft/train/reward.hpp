#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "kft/corpus/dataset.hpp"
#include "kft/corpus/tokenizer.hpp"
#include "kft/lm/model.hpp"
#include "kft/train/stages.hpp"

namespace kft::train {

struct RewardModel {
  lm::ModelState base;
  std::vector<double> head;  // [d_model], applied to the final-token hidden state
};

RewardModel make_reward_model(lm::ModelState base);

// Head dotted with the final-position hidden vector of [BOS] q [SEP] a [EOS].
double reward_score(const RewardModel& rm, const std::string& query,
                    const std::string& answer, const corpus::Vocab& vocab);

// Same scoring on an already-encoded sequence.
double reward_score_tokens(const RewardModel& rm, const std::vector<int>& tokens);

struct RewardTrainResult {
  RewardModel rm;
  Curve curve;
  int skipped_overlong = 0;
};

// Pairwise logistic loss -log sigmoid(score(p) - score(n)). With
// cfg.rm_head_only the base is frozen and hidden states are precomputed.
RewardTrainResult train_reward_model(lm::ModelState base,
                                     const std::vector<corpus::PreferenceTriple>& H,
                                     const corpus::Vocab& vocab, TrainConfig cfg);

double pairwise_accuracy(const RewardModel& rm,
                         const std::vector<corpus::PreferenceTriple>& H,
                         const corpus::Vocab& vocab);

void save_reward_model(const RewardModel& rm, const std::filesystem::path& base_path,
                       const std::filesystem::path& head_path);
RewardModel load_reward_model(const std::filesystem::path& base_path,
                              const std::filesystem::path& head_path);

}  // namespace kft::train
