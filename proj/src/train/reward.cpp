#include "kft/train/reward.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "kft/common/error.hpp"
#include "kft/common/rng.hpp"
#include "kft/lm/checkpoint.hpp"
#include "kft/lm/forward.hpp"
#include "kft/train/adam.hpp"

namespace kft::train {

using nlohmann::json;

RewardModel make_reward_model(lm::ModelState base) {
  RewardModel rm;
  rm.head.assign(static_cast<size_t>(base.config.d_model), 0.0);
  rm.base = std::move(base);
  return rm;
}

namespace {

std::vector<int> rm_sequence(const std::string& query, const std::string& answer,
                             const corpus::Vocab& vocab, int max_seq) {
  corpus::DialoguePair pair{query, answer, corpus::TaskKind::Title};
  auto seq = encode_pair(pair, vocab, max_seq);
  if (!seq.has_value()) {
    fail(Errc::SequenceTooLong, "query+answer exceeds max_seq for reward scoring");
  }
  return std::move(seq->tokens);
}

// stable -log sigmoid(m) = log(1 + exp(-m))
double logistic_loss(double margin) {
  if (margin > 0) return std::log1p(std::exp(-margin));
  return -margin + std::log1p(std::exp(margin));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> last_hidden(const lm::ModelState& model,
                                const std::vector<int>& tokens) {
  lm::ForwardResult res = lm::forward(model, tokens);
  const int d = model.config.d_model;
  std::vector<double> h(static_cast<size_t>(d));
  const double* row = &res.hidden[static_cast<size_t>(res.seq_len - 1) * d];
  for (int i = 0; i < d; ++i) h[static_cast<size_t>(i)] = row[i];
  return h;
}

}  // namespace

double reward_score_tokens(const RewardModel& rm, const std::vector<int>& tokens) {
  const int d = rm.base.config.d_model;
  lm::ForwardResult res = lm::forward(rm.base, tokens);
  const double* row = &res.hidden[static_cast<size_t>(res.seq_len - 1) * d];
  double score = 0.0;
  for (int i = 0; i < d; ++i) score += rm.head[static_cast<size_t>(i)] * row[i];
  return score;
}

double reward_score(const RewardModel& rm, const std::string& query,
                    const std::string& answer, const corpus::Vocab& vocab) {
  return reward_score_tokens(
      rm, rm_sequence(query, answer, vocab, rm.base.config.max_seq));
}

RewardTrainResult train_reward_model(lm::ModelState base,
                                     const std::vector<corpus::PreferenceTriple>& H,
                                     const corpus::Vocab& vocab, TrainConfig cfg) {
  validate_train_config(cfg);
  if (H.empty()) fail(Errc::EmptyDataset, "reward training requires preference triples");

  const int max_seq = base.config.max_seq;
  const int d = base.config.d_model;

  struct EncodedTriple {
    std::vector<int> pos, neg;
  };
  RewardTrainResult res;
  std::vector<EncodedTriple> data;
  for (const auto& t : H) {
    corpus::DialoguePair pp{t.query, t.preferred, corpus::TaskKind::Title};
    corpus::DialoguePair pn{t.query, t.non_preferred, corpus::TaskKind::Title};
    auto sp = encode_pair(pp, vocab, max_seq);
    auto sn = encode_pair(pn, vocab, max_seq);
    if (!sp.has_value() || !sn.has_value()) {
      ++res.skipped_overlong;
      continue;
    }
    data.push_back({std::move(sp->tokens), std::move(sn->tokens)});
  }
  if (data.empty()) fail(Errc::EmptyDataset, "every preference triple exceeds max_seq");

  res.rm = make_reward_model(std::move(base));
  Rng rng(cfg.seed);
  AdamOptimizer opt({cfg.learning_rate, 0.9, 0.999, 1e-8});
  long step = 0;

  std::vector<size_t> order(data.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  if (cfg.rm_head_only) {
    // frozen base: hidden vectors are constants, so train a logistic head
    std::vector<std::vector<double>> hp(data.size()), hn(data.size());
    for (size_t i = 0; i < data.size(); ++i) {
      hp[i] = last_hidden(res.rm.base, data[i].pos);
      hn[i] = last_hidden(res.rm.base, data[i].neg);
    }
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      rng.shuffle(order);
      size_t i = 0;
      while (i < order.size()) {
        if (cfg.max_steps.has_value() && step >= *cfg.max_steps) return res;
        std::vector<double> grad(static_cast<size_t>(d), 0.0);
        double loss = 0.0;
        int in_batch = 0;
        for (int b = 0; b < cfg.batch_size && i < order.size(); ++b, ++i) {
          const auto& P = hp[order[i]];
          const auto& N = hn[order[i]];
          double margin = 0.0;
          for (int k = 0; k < d; ++k) {
            margin += res.rm.head[static_cast<size_t>(k)] *
                      (P[static_cast<size_t>(k)] - N[static_cast<size_t>(k)]);
          }
          loss += logistic_loss(margin);
          double coeff = sigmoid(margin) - 1.0;
          for (int k = 0; k < d; ++k) {
            grad[static_cast<size_t>(k)] +=
                coeff * (P[static_cast<size_t>(k)] - N[static_cast<size_t>(k)]);
          }
          ++in_batch;
        }
        loss /= in_batch;
        for (double& g : grad) g /= in_batch;
        if (!std::isfinite(loss)) {
          fail(Errc::DivergedLoss, "reward loss became non-finite at step " +
                                       std::to_string(step + 1));
        }
        opt.step({{"rm_head", res.rm.head.data(), res.rm.head.size(), &grad}});
        ++step;
        res.curve.push_back({step, loss});
      }
    }
    return res;
  }

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    size_t i = 0;
    while (i < order.size()) {
      if (cfg.max_steps.has_value() && step >= *cfg.max_steps) return res;
      auto& mut = res.rm.base;
      lm::ParamMap grads = lm::zero_grads(mut);
      std::vector<double> head_grad(static_cast<size_t>(d), 0.0);
      double loss = 0.0;
      int in_batch = 0;
      size_t batch_start = i;
      for (int b = 0; b < cfg.batch_size && i < order.size(); ++b, ++i) ++in_batch;
      const double inv_b = 1.0 / in_batch;
      i = batch_start;
      for (int b = 0; b < in_batch; ++b, ++i) {
        const auto& item = data[order[i]];
        lm::ForwardCache cp = lm::forward_cached(res.rm.base, item.pos);
        lm::ForwardCache cn = lm::forward_cached(res.rm.base, item.neg);
        const int Tp = cp.T, Tn = cn.T;
        double sp = 0.0, sn = 0.0;
        for (int k = 0; k < d; ++k) {
          sp += res.rm.head[static_cast<size_t>(k)] * cp.hidden[static_cast<size_t>(Tp - 1) * d + k];
          sn += res.rm.head[static_cast<size_t>(k)] * cn.hidden[static_cast<size_t>(Tn - 1) * d + k];
        }
        double margin = sp - sn;
        loss += logistic_loss(margin) * inv_b;
        double coeff = (sigmoid(margin) - 1.0) * inv_b;
        for (int k = 0; k < d; ++k) {
          head_grad[static_cast<size_t>(k)] +=
              coeff * (cp.hidden[static_cast<size_t>(Tp - 1) * d + k] -
                       cn.hidden[static_cast<size_t>(Tn - 1) * d + k]);
        }
        std::vector<double> zero_p(static_cast<size_t>(Tp) * res.rm.base.config.vocab_size, 0.0);
        std::vector<double> zero_n(static_cast<size_t>(Tn) * res.rm.base.config.vocab_size, 0.0);
        std::vector<double> dh_p(static_cast<size_t>(Tp) * d, 0.0);
        std::vector<double> dh_n(static_cast<size_t>(Tn) * d, 0.0);
        for (int k = 0; k < d; ++k) {
          dh_p[static_cast<size_t>(Tp - 1) * d + k] = coeff * res.rm.head[static_cast<size_t>(k)];
          dh_n[static_cast<size_t>(Tn - 1) * d + k] = -coeff * res.rm.head[static_cast<size_t>(k)];
        }
        lm::backward(res.rm.base, cp, zero_p, &dh_p, grads);
        lm::backward(res.rm.base, cn, zero_n, &dh_n, grads);
      }
      if (!std::isfinite(loss)) {
        fail(Errc::DivergedLoss, "reward loss became non-finite at step " +
                                     std::to_string(step + 1));
      }
      std::vector<ParamSpan> spans;
      const bool adapter = res.rm.base.lora.has_value();
      for (auto& ref : lm::named_params(res.rm.base, true)) {
        if (adapter && !ref.is_lora) continue;
        auto it = grads.find(ref.name);
        if (it == grads.end()) continue;
        spans.push_back({ref.name, ref.data->data(), ref.data->size(), &it->second});
      }
      spans.push_back({"rm_head", res.rm.head.data(), res.rm.head.size(), &head_grad});
      opt.step(spans);
      lm::quantize_to_f32_grid(res.rm.base);
      ++step;
      res.curve.push_back({step, loss});
    }
  }
  return res;
}

double pairwise_accuracy(const RewardModel& rm,
                         const std::vector<corpus::PreferenceTriple>& H,
                         const corpus::Vocab& vocab) {
  if (H.empty()) fail(Errc::EmptyDataset, "accuracy needs at least one triple");
  int correct = 0;
  for (const auto& t : H) {
    double sp = reward_score(rm, t.query, t.preferred, vocab);
    double sn = reward_score(rm, t.query, t.non_preferred, vocab);
    if (sp > sn) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(H.size());
}

void save_reward_model(const RewardModel& rm, const std::filesystem::path& base_path,
                       const std::filesystem::path& head_path) {
  lm::save_checkpoint(rm.base, "rm", base_path);
  json j;
  j["head"] = rm.head;
  std::ofstream out(head_path);
  if (!out) fail(Errc::Io, "cannot open reward head file for writing: " + head_path.string());
  out << j.dump(2) << "\n";
}

RewardModel load_reward_model(const std::filesystem::path& base_path,
                              const std::filesystem::path& head_path) {
  lm::Checkpoint ckpt = lm::load_checkpoint(base_path);
  std::ifstream in(head_path);
  if (!in) fail(Errc::Io, "cannot open reward head file: " + head_path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("head") || !j["head"].is_array()) {
    fail(Errc::MalformedRecord, "reward head file is not valid: " + head_path.string());
  }
  RewardModel rm;
  rm.base = std::move(ckpt.model);
  rm.head = j["head"].get<std::vector<double>>();
  if (rm.head.size() != static_cast<size_t>(rm.base.config.d_model)) {
    fail(Errc::MalformedRecord, "reward head size does not match d_model");
  }
  return rm;
}

}  // namespace kft::train
