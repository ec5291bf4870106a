#include "kft/train/ppo.hpp"

#include <algorithm>
#include <cmath>

#include "kft/common/error.hpp"
#include "kft/common/hash.hpp"
#include "kft/common/rng.hpp"
#include "kft/train/adam.hpp"

namespace kft::train {

void validate_ppo_config(const PpoConfig& cfg) {
  if (cfg.clip_epsilon <= 0 || cfg.clip_epsilon >= 1) {
    fail(Errc::ConfigInvalid, "clip_epsilon must lie in (0, 1)");
  }
  if (cfg.kl_coefficient < 0) fail(Errc::ConfigInvalid, "kl_coefficient must be >= 0");
  if (cfg.ppo_epochs <= 0) fail(Errc::ConfigInvalid, "ppo_epochs must be positive");
  if (cfg.rollout_batch <= 0) fail(Errc::ConfigInvalid, "rollout_batch must be positive");
  if (cfg.gen.max_new_tokens <= 0) {
    fail(Errc::ConfigInvalid, "generation needs max_new_tokens > 0");
  }
  if (cfg.learning_rate <= 0) fail(Errc::ConfigInvalid, "learning_rate must be positive");
}

std::vector<double> compute_advantage(const std::vector<double>& rewards) {
  if (rewards.empty()) fail(Errc::EmptyDataset, "advantage needs at least one reward");
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(rewards.size());
  double denom = std::sqrt(var) + 1e-8;
  std::vector<double> adv(rewards.size());
  for (size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / denom;
  return adv;
}

double ppo_term(double ratio, double advantage, double clip_epsilon) {
  double clipped = std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

namespace {

struct Rollout {
  std::vector<int> tokens;   // prompt + sampled answer
  int prompt_len = 0;
  std::vector<double> old_logprobs;  // one per answer position
  double advantage = 0.0;
};

// log-prob of each sampled answer token plus mean per-token KL to ref
void rollout_stats(const lm::ModelState& policy, const lm::ModelState& ref,
                   const std::vector<int>& tokens, int prompt_len,
                   std::vector<double>* logprobs, double* mean_kl) {
  const int V = policy.config.vocab_size;
  const int T = static_cast<int>(tokens.size());
  lm::ForwardResult cur = lm::forward(policy, tokens);
  lm::ForwardResult re = lm::forward(ref, tokens);
  std::vector<double> p(static_cast<size_t>(V)), q(static_cast<size_t>(V));
  if (logprobs) logprobs->clear();
  double kl_sum = 0.0;
  int n = 0;
  for (int i = prompt_len - 1; i + 1 < T; ++i) {
    const double* crow = &cur.logits[static_cast<size_t>(i) * V];
    lm::softmax_row(crow, V, p.data());
    if (logprobs) {
      int tok = tokens[static_cast<size_t>(i) + 1];
      logprobs->push_back(std::log(p[static_cast<size_t>(tok)]));
    }
    if (mean_kl) {
      const double* rrow = &re.logits[static_cast<size_t>(i) * V];
      lm::softmax_row(rrow, V, q.data());
      double kl = 0.0;
      for (int v = 0; v < V; ++v) {
        if (p[static_cast<size_t>(v)] > 0) {
          kl += p[static_cast<size_t>(v)] *
                (std::log(p[static_cast<size_t>(v)]) - std::log(q[static_cast<size_t>(v)]));
        }
      }
      kl_sum += kl;
    }
    ++n;
  }
  if (mean_kl) *mean_kl = n > 0 ? kl_sum / n : 0.0;
}

PpoResult run_ppo_impl(lm::ModelState policy, const RewardFn& reward,
                       const std::vector<std::string>& queries,
                       const corpus::Vocab& vocab, PpoConfig cfg) {
  validate_ppo_config(cfg);
  if (queries.empty()) fail(Errc::EmptyQueries, "PPO requires at least one query");

  const lm::ModelState ref = policy;  // frozen reference
  const int max_seq = policy.config.max_seq;
  AdamOptimizer opt({cfg.learning_rate, 0.9, 0.999, 1e-8});

  int num_batches = cfg.num_batches > 0
                        ? cfg.num_batches
                        : static_cast<int>((queries.size() + cfg.rollout_batch - 1) /
                                           static_cast<size_t>(cfg.rollout_batch));

  PpoResult res;
  res.curve.reserve(static_cast<size_t>(num_batches));

  for (int batch = 0; batch < num_batches; ++batch) {
    std::vector<Rollout> rollouts;
    std::vector<double> shaped, rm_scores;
    double len_sum = 0.0, kl_roll_sum = 0.0;

    for (int j = 0; j < cfg.rollout_batch; ++j) {
      size_t qi = (static_cast<size_t>(batch) * cfg.rollout_batch + j) % queries.size();
      const std::string& q = queries[qi];
      Rollout ro;
      ro.tokens.push_back(corpus::Vocab::kBos);
      for (int id : corpus::encode(q, vocab).ids) ro.tokens.push_back(id);
      ro.tokens.push_back(corpus::Vocab::kSep);
      ro.prompt_len = static_cast<int>(ro.tokens.size());
      if (ro.prompt_len + 1 > max_seq) {
        fail(Errc::SequenceTooLong, "PPO query leaves no room for an answer");
      }
      lm::GenerationConfig gen = cfg.gen;
      gen.seed = derive_seed(
          cfg.seed, "rollout:" + std::to_string(batch) + ":" + std::to_string(j));
      ro.tokens = lm::generate(policy, ro.tokens, gen);
      if (static_cast<int>(ro.tokens.size()) == ro.prompt_len) {
        // cannot happen with max_new_tokens > 0, kept as a guard
        continue;
      }
      std::vector<int> answer(ro.tokens.begin() + ro.prompt_len, ro.tokens.end());
      double kl = 0.0;
      rollout_stats(policy, ref, ro.tokens, ro.prompt_len, &ro.old_logprobs, &kl);
      double rm_score = reward(q, answer);
      double r = rm_score - cfg.kl_coefficient * kl;
      rm_scores.push_back(rm_score);
      shaped.push_back(r);
      kl_roll_sum += kl;
      len_sum += static_cast<double>(answer.size());
      rollouts.push_back(std::move(ro));
    }
    if (rollouts.empty()) fail(Errc::EmptyQueries, "PPO batch produced no rollouts");

    std::vector<double> adv = compute_advantage(shaped);
    for (size_t i = 0; i < rollouts.size(); ++i) rollouts[i].advantage = adv[i];

    long total_positions = 0;
    for (const auto& ro : rollouts) {
      total_positions += static_cast<long>(ro.old_logprobs.size());
    }

    for (int epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
      auto& mut = policy;
      lm::ParamMap grads = lm::zero_grads(mut);
      double surrogate = 0.0;
      const int V = policy.config.vocab_size;
      std::vector<double> p(static_cast<size_t>(V));
      for (const auto& ro : rollouts) {
        lm::ForwardCache cache = lm::forward_cached(policy, ro.tokens);
        const int T = cache.T;
        std::vector<double> dlogits(static_cast<size_t>(T) * V, 0.0);
        int pos_idx = 0;
        for (int i = ro.prompt_len - 1; i + 1 < T; ++i, ++pos_idx) {
          const double* row = &cache.logits[static_cast<size_t>(i) * V];
          lm::softmax_row(row, V, p.data());
          int tok = ro.tokens[static_cast<size_t>(i) + 1];
          double cur_lp = std::log(p[static_cast<size_t>(tok)]);
          double ratio = std::exp(cur_lp - ro.old_logprobs[static_cast<size_t>(pos_idx)]);
          double a = ro.advantage;
          double clipped = std::clamp(ratio, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon);
          surrogate += std::min(ratio * a, clipped * a) / total_positions;
          // subgradient of min: the unclipped branch carries gradient when
          // it attains the min (ties included)
          if (ratio * a <= clipped * a) {
            double g = -a * ratio / total_positions;  // minimizing -surrogate
            double* drow = &dlogits[static_cast<size_t>(i) * V];
            for (int v = 0; v < V; ++v) drow[v] += g * (-p[static_cast<size_t>(v)]);
            drow[tok] += g;
          }
        }
        lm::backward(policy, cache, dlogits, nullptr, grads);
      }
      if (!std::isfinite(surrogate)) {
        fail(Errc::DivergedLoss, "PPO surrogate became non-finite in batch " +
                                     std::to_string(batch));
      }
      adam_step_model(opt, policy, grads);
    }

    double kl_post_sum = 0.0;
    for (const auto& ro : rollouts) {
      double kl = 0.0;
      rollout_stats(policy, ref, ro.tokens, ro.prompt_len, nullptr, &kl);
      kl_post_sum += kl;
    }

    PpoBatchStats stats;
    stats.batch = batch;
    const double nb = static_cast<double>(rollouts.size());
    stats.mean_reward = 0.0;
    for (double r : shaped) stats.mean_reward += r;
    stats.mean_reward /= nb;
    stats.mean_rm_score = 0.0;
    for (double r : rm_scores) stats.mean_rm_score += r;
    stats.mean_rm_score /= nb;
    stats.kl_rollout = kl_roll_sum / nb;
    stats.kl_post = kl_post_sum / nb;
    stats.mean_answer_len = len_sum / nb;
    res.curve.push_back(stats);
  }

  res.model = std::move(policy);
  return res;
}

}  // namespace

PpoResult run_ppo(lm::ModelState policy, const RewardFn& reward,
                  const std::vector<std::string>& queries,
                  const corpus::Vocab& vocab, PpoConfig cfg) {
  return run_ppo_impl(std::move(policy), reward, queries, vocab, cfg);
}

PpoResult run_ppo(lm::ModelState policy, const RewardModel& rm,
                  const std::vector<std::string>& queries,
                  const corpus::Vocab& vocab, PpoConfig cfg) {
  RewardFn fn = [&rm, &vocab](const std::string& query,
                              const std::vector<int>& answer_tokens) {
    corpus::TokenSeq seq;
    seq.ids = answer_tokens;
    std::string answer = corpus::decode(seq, vocab);
    if (answer.empty()) answer = " ";
    return reward_score(rm, query, answer, vocab);
  };
  return run_ppo_impl(std::move(policy), fn, queries, vocab, cfg);
}

}  // namespace kft::train
