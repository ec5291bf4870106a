#include "kft/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "kft/common/error.hpp"

namespace kft::eval {

int lcs_length(const Tokens& a, const Tokens& b) {
  const size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      if (a[i - 1] == b[j - 1]) {
        cur[j] = prev[j - 1] + 1;
      } else {
        cur[j] = std::max(prev[j], cur[j - 1]);
      }
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

namespace {

std::map<std::vector<std::string>, int> ngram_counts(const Tokens& toks, int n) {
  std::map<std::vector<std::string>, int> counts;
  if (static_cast<int>(toks.size()) < n) return counts;
  for (size_t i = 0; i + n <= toks.size(); ++i) {
    std::vector<std::string> gram(toks.begin() + static_cast<long>(i),
                                  toks.begin() + static_cast<long>(i) + n);
    ++counts[gram];
  }
  return counts;
}

long clipped_matches(const Tokens& candidate, const Tokens& reference, int n) {
  auto cand = ngram_counts(candidate, n);
  auto ref = ngram_counts(reference, n);
  long matched = 0;
  for (const auto& [gram, count] : cand) {
    auto it = ref.find(gram);
    if (it != ref.end()) matched += std::min(count, it->second);
  }
  return matched;
}

}  // namespace

double rouge_n(const Tokens& candidate, const Tokens& reference, int n) {
  if (n != 1 && n != 2) fail(Errc::ConfigInvalid, "rouge_n supports n = 1 or 2");
  long ref_total = static_cast<long>(reference.size()) - n + 1;
  if (ref_total < 1) {
    fail(Errc::ReferenceTooShort,
         "reference has fewer than " + std::to_string(n) + " tokens");
  }
  return static_cast<double>(clipped_matches(candidate, reference, n)) /
         static_cast<double>(ref_total);
}

double rouge_l(const Tokens& candidate, const Tokens& reference, double beta) {
  if (candidate.empty() || reference.empty()) {
    fail(Errc::EmptyInput, "rouge_l needs non-empty candidate and reference");
  }
  int lcs = lcs_length(candidate, reference);
  if (lcs == 0) return 0.0;
  double r = static_cast<double>(lcs) / static_cast<double>(reference.size());
  double p = static_cast<double>(lcs) / static_cast<double>(candidate.size());
  double b2 = beta * beta;
  return (1.0 + b2) * r * p / (b2 * r + p);
}

double bleu4(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty()) return 0.0;
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  double log_sum = 0.0;
  for (int n = 1; n <= 4; ++n) {
    long denom = static_cast<long>(candidate.size()) - n + 1;
    double p = 0.0;
    if (denom > 0) {
      p = static_cast<double>(clipped_matches(candidate, reference, n)) /
          static_cast<double>(denom);
    }
    log_sum += 0.25 * std::log(std::max(p, 1e-9));
  }
  double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum);
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) fail(Errc::ConfigInvalid, "cosine dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double bert_score(const Tokens& candidate, const Tokens& reference,
                  const Embedder& embedder) {
  if (candidate.empty() || reference.empty()) {
    fail(Errc::EmptyInput, "bert_score needs non-empty candidate and reference");
  }
  auto dedupe = [](const Tokens& toks) {
    Tokens out;
    for (const auto& t : toks) {
      if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
    }
    return out;
  };
  Tokens cand = dedupe(candidate);
  Tokens ref = dedupe(reference);
  std::vector<std::vector<double>> ref_emb;
  ref_emb.reserve(ref.size());
  for (const auto& t : ref) ref_emb.push_back(embedder.embed(t));
  double total = 0.0;
  for (const auto& t : cand) {
    std::vector<double> e = embedder.embed(t);
    double best = -1.0;
    for (const auto& re : ref_emb) best = std::max(best, cosine(e, re));
    total += best;
  }
  return total / static_cast<double>(cand.size());
}

}  // namespace kft::eval
