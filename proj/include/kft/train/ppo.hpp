#pragma once

#include <functional>
#include <string>
#include <vector>

#include "kft/corpus/tokenizer.hpp"
#include "kft/lm/forward.hpp"
#include "kft/lm/model.hpp"
#include "kft/train/reward.hpp"
#include "kft/train/stages.hpp"

namespace kft::train {

struct PpoConfig {
  double clip_epsilon = 0.2;
  int ppo_epochs = 4;
  int rollout_batch = 8;
  double kl_coefficient = 0.02;
  lm::GenerationConfig gen;
  uint64_t seed = 0;
  int num_batches = 0;  // 0 means one pass over the queries
  double learning_rate = 5e-5;
};

void validate_ppo_config(const PpoConfig& cfg);

// Batch-whitened rewards: (r - mean) / (population std + 1e-8).
std::vector<double> compute_advantage(const std::vector<double>& rewards);

// Per-position clipped objective term min(r*A, clip(r, 1-eps, 1+eps)*A).
double ppo_term(double ratio, double advantage, double clip_epsilon);

struct PpoBatchStats {
  int batch = 0;
  double mean_reward = 0.0;    // shaped: rm score minus KL penalty
  double mean_rm_score = 0.0;  // unshaped reward-model score
  double kl_rollout = 0.0;     // mean per-token KL to reference at rollout
  double kl_post = 0.0;        // same, re-measured after the batch's updates
  double mean_answer_len = 0.0;
};

struct PpoResult {
  lm::ModelState model;
  std::vector<PpoBatchStats> curve;
};

using RewardFn = std::function<double(const std::string& query,
                                      const std::vector<int>& answer_tokens)>;

PpoResult run_ppo(lm::ModelState policy, const RewardFn& reward,
                  const std::vector<std::string>& queries,
                  const corpus::Vocab& vocab, PpoConfig cfg);

PpoResult run_ppo(lm::ModelState policy, const RewardModel& rm,
                  const std::vector<std::string>& queries,
                  const corpus::Vocab& vocab, PpoConfig cfg);

}  // namespace kft::train
