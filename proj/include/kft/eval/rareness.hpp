#pragma once

#include <string>
#include <vector>

#include "kft/kgraph/schema.hpp"

namespace kft::eval {

// Mean over the text's extracted unordered entity pairs of
// 1 - cooccurrence(pair)/max_cooccurrence; unseen pairs score 1. Texts with
// no extractable pairs score 0 and set *no_pairs.
double rareness(const std::string& text, const kgraph::KnowledgeGraph& kg,
                bool* no_pairs = nullptr);

struct RarenessEntry {
  std::string text_id;
  double score = 0.0;
  bool no_pairs = false;
};

struct RarenessReport {
  double average_rareness = 0.0;
  std::vector<RarenessEntry> entries;
};

RarenessReport rareness_report(
    const std::vector<std::pair<std::string, std::string>>& id_texts,
    const kgraph::KnowledgeGraph& kg);

}  // namespace kft::eval
