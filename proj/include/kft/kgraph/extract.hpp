#pragma once

#include <string>
#include <vector>

#include "kft/corpus/patent.hpp"
#include "kft/kgraph/schema.hpp"

namespace kft::kgraph {

struct Pattern {
  std::string cue;  // matched between the head and tail segments
  RelationType relation = RelationType::UsedFor;
};

struct PatternSet {
  std::vector<Pattern> patterns;
};

// Cue phrases covering every relation, including the verbalizer's own
// templates so verbalize -> extract round-trips.
PatternSet default_patterns();

// Cue-phrase extraction over one sentence-split, lowercased text. Output
// order follows (sentence, cue position). Entities are article-stripped and
// typed by keyword lexicon, Generic otherwise.
std::vector<Triple> extract_triples_from_text(const std::string& text,
                                              const PatternSet& patterns,
                                              const std::string& source_doc);

std::vector<Triple> extract_triples(const corpus::PatentDoc& doc,
                                    const PatternSet& patterns);

std::string verbalize(const Triple& triple);

// One sentence per triple, in the graph's canonical order.
std::vector<std::string> build_knowledge_corpus(const KnowledgeGraph& kg);

}  // namespace kft::kgraph
