#pragma once

#include <string>
#include <vector>

namespace kft::eval {

using Tokens = std::vector<std::string>;

int lcs_length(const Tokens& a, const Tokens& b);

// Recall-form ROUGE-n: clipped n-gram matches over total reference n-grams.
double rouge_n(const Tokens& candidate, const Tokens& reference, int n);

// F_LCS = (1+b^2) R P / (b^2 R + P) with R = LCS/|reference|,
// P = LCS/|candidate|; 0 when the LCS is empty.
double rouge_l(const Tokens& candidate, const Tokens& reference, double beta = 1.0);

// Uniform-weight BLEU-4 with precisions floored at 1e-9 and brevity penalty
// BP = 1 if c > r else exp(1 - r/c).
double bleu4(const Tokens& candidate, const Tokens& reference);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<double> embed(const std::string& token) const = 0;
};

// Candidate-side mean over the candidate token SET of the max cosine
// similarity against the reference token set.
double bert_score(const Tokens& candidate, const Tokens& reference,
                  const Embedder& embedder);

double cosine(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace kft::eval
