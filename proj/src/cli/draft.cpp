#include "kft/cli/draft.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "kft/common/error.hpp"
#include "kft/common/rng.hpp"
#include "kft/common/text.hpp"
#include "kft/corpus/dataset.hpp"

namespace kft::cli {

using nlohmann::json;

namespace {

std::string generate_answer(const lm::ModelState& model, const std::string& query,
                            const corpus::Vocab& vocab, lm::GenerationConfig gen,
                            const std::string& turn_label, uint64_t session_seed) {
  std::vector<int> prompt;
  prompt.push_back(corpus::Vocab::kBos);
  auto enc = corpus::encode(query, vocab);
  prompt.insert(prompt.end(), enc.ids.begin(), enc.ids.end());
  prompt.push_back(corpus::Vocab::kSep);

  gen.seed = derive_seed(session_seed, "draft:" + turn_label);
  if (gen.stop_tokens.empty()) gen.stop_tokens = {corpus::Vocab::kEos};
  auto out = lm::generate(model, prompt, gen);

  corpus::TokenSeq answer;
  answer.ids.assign(out.begin() + static_cast<long>(prompt.size()), out.end());
  return corpus::decode(answer, vocab);
}

}  // namespace

DraftSession draft_session(const lm::ModelState& model, const std::string& idea,
                           const corpus::Vocab& vocab,
                           const lm::GenerationConfig& gen) {
  if (trim(idea).empty()) fail(Errc::EmptyInput, "draft idea must be non-empty");

  DraftSession s;
  s.idea = idea;
  s.title = generate_answer(model, corpus::title_query(idea), vocab, gen,
                            "title", gen.seed);
  s.abstract_text = generate_answer(model, corpus::abstract_query(s.title), vocab,
                                    gen, "abstract", gen.seed);
  s.claims = generate_answer(model, corpus::claims_query(s.title, s.abstract_text),
                             vocab, gen, "claims", gen.seed);

  eval::StructuredDraft draft{s.title, s.abstract_text, s.claims};
  s.verdict = eval::reasonability_check(draft);
  return s;
}

void save_draft_json(const DraftSession& s, const std::filesystem::path& path) {
  json j;
  j["idea"] = s.idea;
  j["title"] = s.title;
  j["abstract"] = s.abstract_text;
  j["claims"] = s.claims;
  j["verdict"] = {{"win", s.verdict.win}, {"failed_checks", s.verdict.failed_checks}};
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot write " + path.string());
  // Sampled byte tokens can yield non-UTF-8 text; substitute U+FFFD so the
  // session file stays valid JSON.
  out << j.dump(2, ' ', false, json::error_handler_t::replace) << "\n";
}

void save_draft_transcript(const DraftSession& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot write " + path.string());
  out << "Query\n\n" << corpus::title_query(s.idea) << "\n\n";
  out << "Answer\n\n" << s.title << "\n\n";
  out << "Query\n\n" << corpus::abstract_query(s.title) << "\n\n";
  out << "Answer\n\n" << s.abstract_text << "\n\n";
  out << "Query\n\n" << corpus::claims_query(s.title, s.abstract_text) << "\n\n";
  out << "Answer\n\n" << s.claims << "\n\n";
  out << "Verdict: " << (s.verdict.win ? "Win" : "Loss") << "\n";
  for (const auto& rule : s.verdict.failed_checks) {
    out << "  failed: " << rule << "\n";
  }
}

}  // namespace kft::cli
