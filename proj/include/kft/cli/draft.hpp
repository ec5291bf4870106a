#pragma once

#include <filesystem>
#include <string>

#include "kft/corpus/tokenizer.hpp"
#include "kft/eval/reasonability.hpp"
#include "kft/lm/forward.hpp"
#include "kft/lm/model.hpp"

namespace kft::cli {

// One scripted drafting conversation: idea -> title -> abstract -> claims,
// each built from the previously generated fields, plus the structural
// verdict on the finished draft.
struct DraftSession {
  std::string idea;
  std::string title;
  std::string abstract_text;
  std::string claims;
  eval::ReasonabilityVerdict verdict;
};

// gen.seed is the session seed; each turn derives its own stream from it so
// a fixed (model, idea, seed) reproduces the transcript exactly.
DraftSession draft_session(const lm::ModelState& model, const std::string& idea,
                           const corpus::Vocab& vocab,
                           const lm::GenerationConfig& gen);

void save_draft_json(const DraftSession& s, const std::filesystem::path& path);
void save_draft_transcript(const DraftSession& s, const std::filesystem::path& path);

}  // namespace kft::cli
