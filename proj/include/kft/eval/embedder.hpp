#pragma once

#include "kft/corpus/tokenizer.hpp"
#include "kft/eval/metrics.hpp"
#include "kft/lm/model.hpp"

namespace kft::eval {

// Token embedding straight from the trained embedding table; multi-piece
// tokens average their piece rows.
class StaticEmbedder : public Embedder {
 public:
  StaticEmbedder(const lm::ModelState& model, const corpus::Vocab& vocab)
      : model_(&model), vocab_(&vocab) {}
  std::vector<double> embed(const std::string& token) const override;

 private:
  const lm::ModelState* model_;
  const corpus::Vocab* vocab_;
};

// Final-position hidden state of [BOS] token, contextualizing the pieces.
class HiddenStateEmbedder : public Embedder {
 public:
  HiddenStateEmbedder(const lm::ModelState& model, const corpus::Vocab& vocab)
      : model_(&model), vocab_(&vocab) {}
  std::vector<double> embed(const std::string& token) const override;

 private:
  const lm::ModelState* model_;
  const corpus::Vocab* vocab_;
};

}  // namespace kft::eval
