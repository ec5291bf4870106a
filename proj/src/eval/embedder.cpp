#include "kft/eval/embedder.hpp"

#include "kft/lm/forward.hpp"

namespace kft::eval {

std::vector<double> StaticEmbedder::embed(const std::string& token) const {
  const int d = model_->config.d_model;
  std::vector<double> out(static_cast<size_t>(d), 0.0);
  auto ids = corpus::encode(token, *vocab_).ids;
  int used = 0;
  for (int id : ids) {
    if (id <= corpus::Vocab::kGlue) continue;
    const double* row = &model_->tok_emb[static_cast<size_t>(id) * d];
    for (int i = 0; i < d; ++i) out[static_cast<size_t>(i)] += row[i];
    ++used;
  }
  if (used > 1) {
    for (double& v : out) v /= used;
  }
  return out;
}

std::vector<double> HiddenStateEmbedder::embed(const std::string& token) const {
  const int d = model_->config.d_model;
  std::vector<int> seq;
  seq.push_back(corpus::Vocab::kBos);
  for (int id : corpus::encode(token, *vocab_).ids) seq.push_back(id);
  if (static_cast<int>(seq.size()) > model_->config.max_seq) {
    seq.resize(static_cast<size_t>(model_->config.max_seq));
  }
  lm::ForwardResult res = lm::forward(*model_, seq);
  std::vector<double> out(static_cast<size_t>(d));
  const double* row = &res.hidden[static_cast<size_t>(res.seq_len - 1) * d];
  for (int i = 0; i < d; ++i) out[static_cast<size_t>(i)] = row[i];
  return out;
}

}  // namespace kft::eval
