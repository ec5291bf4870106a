#include "kft/train/stages.hpp"

#include <cmath>

#include "kft/common/error.hpp"
#include "kft/common/rng.hpp"
#include "kft/train/adam.hpp"

namespace kft::train {

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.learning_rate <= 0) fail(Errc::ConfigInvalid, "learning_rate must be positive");
  if (cfg.epochs <= 0) fail(Errc::ConfigInvalid, "epochs must be positive");
  if (cfg.batch_size <= 0) fail(Errc::ConfigInvalid, "batch_size must be positive");
  if (cfg.alpha < 0 || cfg.beta < 0 || cfg.alpha + cfg.beta <= 0) {
    fail(Errc::ConfigInvalid, "alpha and beta must be non-negative with alpha+beta > 0");
  }
  if (cfg.max_steps.has_value() && *cfg.max_steps <= 0) {
    fail(Errc::ConfigInvalid, "max_steps must be positive when set");
  }
}

lm::MaskedSeq encode_pretrain(const std::string& text,
                              const corpus::Vocab& vocab, int max_seq) {
  lm::MaskedSeq seq;
  seq.tokens.push_back(corpus::Vocab::kBos);
  for (int id : corpus::encode(text, vocab).ids) seq.tokens.push_back(id);
  seq.tokens.push_back(corpus::Vocab::kEos);
  if (static_cast<int>(seq.tokens.size()) > max_seq) {
    seq.tokens.resize(static_cast<size_t>(max_seq));
  }
  seq.mask.assign(seq.tokens.size(), true);
  return seq;
}

std::optional<lm::MaskedSeq> encode_pair(const corpus::DialoguePair& pair,
                                         const corpus::Vocab& vocab,
                                         int max_seq) {
  auto q = corpus::encode(pair.query, vocab).ids;
  auto a = corpus::encode(pair.answer, vocab).ids;
  lm::MaskedSeq seq;
  seq.tokens.reserve(q.size() + a.size() + 3);
  seq.tokens.push_back(corpus::Vocab::kBos);
  seq.tokens.insert(seq.tokens.end(), q.begin(), q.end());
  seq.tokens.push_back(corpus::Vocab::kSep);
  size_t sep_pos = seq.tokens.size() - 1;
  seq.tokens.insert(seq.tokens.end(), a.begin(), a.end());
  seq.tokens.push_back(corpus::Vocab::kEos);
  if (static_cast<int>(seq.tokens.size()) > max_seq) return std::nullopt;
  seq.mask.assign(seq.tokens.size(), false);
  for (size_t i = sep_pos; i < sep_pos + a.size(); ++i) seq.mask[i] = true;
  return seq;
}

PretrainResult run_pretrain(lm::ModelState model,
                            const std::vector<std::string>& S,
                            const std::vector<std::string>& G,
                            const corpus::Vocab& vocab, TrainConfig cfg) {
  validate_train_config(cfg);
  if (cfg.alpha > 0 && S.empty()) {
    fail(Errc::EmptyCorpus, "alpha > 0 requires a non-empty knowledge corpus");
  }
  if (cfg.beta > 0 && G.empty()) {
    fail(Errc::EmptyCorpus, "beta > 0 requires a non-empty general corpus");
  }

  const double p_s = cfg.alpha / (cfg.alpha + cfg.beta);
  long samples_per_epoch = 0;
  if (cfg.alpha > 0) samples_per_epoch += static_cast<long>(S.size());
  if (cfg.beta > 0) samples_per_epoch += static_cast<long>(G.size());
  long total_samples = samples_per_epoch * cfg.epochs;
  if (cfg.max_steps.has_value()) {
    total_samples = std::min(total_samples, *cfg.max_steps * cfg.batch_size);
  }

  Rng rng(cfg.seed);
  AdamOptimizer opt({cfg.learning_rate, 0.9, 0.999, 1e-8});
  PretrainResult res;
  res.model = std::move(model);

  std::vector<lm::MaskedSeq> batch;
  std::vector<double> weights;
  long drawn = 0;
  long step = 0;
  while (drawn < total_samples) {
    batch.clear();
    weights.clear();
    while (static_cast<int>(batch.size()) < cfg.batch_size && drawn < total_samples) {
      bool from_s = cfg.alpha > 0 && (cfg.beta == 0 || rng.next_double() < p_s);
      const auto& pool = from_s ? S : G;
      const std::string& text = pool[static_cast<size_t>(rng.next_below(pool.size()))];
      batch.push_back(encode_pretrain(text, vocab, res.model.config.max_seq));
      weights.push_back(from_s ? cfg.alpha : cfg.beta);
      res.source_log.push_back(from_s ? 'S' : 'G');
      ++drawn;
    }

    auto& mut = res.model;
    lm::ParamMap grads = lm::zero_grads(mut);
    double loss = 0.0;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
      lm::ForwardCache cache = lm::forward_cached(res.model, batch[i].tokens);
      std::vector<double> dlogits;
      double nll = lm::nll_from_logits(cache.logits, res.model.config.vocab_size,
                                       batch[i].tokens, batch[i].mask, &dlogits);
      loss += weights[i] * nll * inv_b;
      for (double& v : dlogits) v *= weights[i] * inv_b;
      lm::backward(res.model, cache, dlogits, nullptr, grads);
    }
    if (!std::isfinite(loss)) {
      fail(Errc::DivergedLoss, "pre-training loss became non-finite at step " +
                                   std::to_string(step + 1));
    }
    adam_step_model(opt, res.model, grads);
    ++step;
    res.curve.push_back({step, loss});
  }
  return res;
}

SftResult run_sft(lm::ModelState model,
                  const std::vector<corpus::DialoguePair>& pairs,
                  const corpus::Vocab& vocab, TrainConfig cfg) {
  validate_train_config(cfg);
  if (pairs.empty()) fail(Errc::EmptyDataset, "SFT requires at least one pair");

  SftResult res;
  res.model = std::move(model);

  std::vector<lm::MaskedSeq> encoded;
  for (const auto& p : pairs) {
    auto seq = encode_pair(p, vocab, res.model.config.max_seq);
    if (seq.has_value()) {
      encoded.push_back(std::move(*seq));
    } else {
      ++res.skipped_overlong;
    }
  }
  if (encoded.empty()) {
    fail(Errc::AllPairsTooLong, "every SFT pair exceeds max_seq after encoding");
  }

  Rng rng(cfg.seed);
  AdamOptimizer opt({cfg.learning_rate, 0.9, 0.999, 1e-8});
  long step = 0;
  std::vector<size_t> order(encoded.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    size_t i = 0;
    while (i < order.size()) {
      if (cfg.max_steps.has_value() && step >= *cfg.max_steps) return res;
      std::vector<lm::MaskedSeq> batch;
      for (int b = 0; b < cfg.batch_size && i < order.size(); ++b, ++i) {
        batch.push_back(encoded[order[i]]);
      }
      double loss = 0.0;
      lm::ParamMap grads = lm::grad(res.model, batch, &loss);
      if (!std::isfinite(loss)) {
        fail(Errc::DivergedLoss,
             "SFT loss became non-finite at step " + std::to_string(step + 1));
      }
      adam_step_model(opt, res.model, grads);
      ++step;
      res.curve.push_back({step, loss});
    }
  }
  return res;
}

}  // namespace kft::train
