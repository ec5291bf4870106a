#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kft/corpus/dataset.hpp"
#include "kft/corpus/tokenizer.hpp"
#include "kft/lm/forward.hpp"
#include "kft/lm/model.hpp"

namespace kft::train {

struct TrainConfig {
  double learning_rate = 5e-5;
  int epochs = 3;
  int batch_size = 1;
  double alpha = 1.0;  // weight on the knowledge corpus
  double beta = 1.0;   // weight on the general corpus
  uint64_t seed = 0;
  std::optional<long> max_steps;
  bool rm_head_only = false;
};

void validate_train_config(const TrainConfig& cfg);

struct CurvePoint {
  long step = 0;
  double value = 0.0;
};
using Curve = std::vector<CurvePoint>;

// [BOS] text [EOS], truncated to max_seq; mask covers every position.
lm::MaskedSeq encode_pretrain(const std::string& text,
                              const corpus::Vocab& vocab, int max_seq);

// [BOS] query [SEP] answer [EOS]; mask covers exactly the positions that
// predict answer tokens. Empty when the sequence exceeds max_seq.
std::optional<lm::MaskedSeq> encode_pair(const corpus::DialoguePair& pair,
                                         const corpus::Vocab& vocab,
                                         int max_seq);

struct PretrainResult {
  lm::ModelState model;
  Curve curve;
  std::string source_log;  // one 'S' or 'G' per drawn sample
};

// Mixture pre-training: each sample comes from S with probability
// alpha/(alpha+beta), else from G, and its NLL is scaled by that corpus
// weight. alpha = 0 is the plain-PT baseline, alpha > 0 the KPT variant.
PretrainResult run_pretrain(lm::ModelState model,
                            const std::vector<std::string>& S,
                            const std::vector<std::string>& G,
                            const corpus::Vocab& vocab, TrainConfig cfg);

struct SftResult {
  lm::ModelState model;
  Curve curve;
  int skipped_overlong = 0;
};

SftResult run_sft(lm::ModelState model,
                  const std::vector<corpus::DialoguePair>& pairs,
                  const corpus::Vocab& vocab, TrainConfig cfg);

}  // namespace kft::train
