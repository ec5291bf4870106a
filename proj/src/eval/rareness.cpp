#include "kft/eval/rareness.hpp"

#include <algorithm>
#include <set>

#include "kft/common/error.hpp"
#include "kft/kgraph/extract.hpp"

namespace kft::eval {

double rareness(const std::string& text, const kgraph::KnowledgeGraph& kg,
                bool* no_pairs) {
  if (kg.empty()) fail(Errc::EmptyGraph, "rareness needs a non-empty knowledge graph");
  if (no_pairs) *no_pairs = false;
  auto triples = kgraph::extract_triples_from_text(text, kgraph::default_patterns(),
                                                   "rareness-probe");
  std::set<std::pair<std::string, std::string>> pairs;
  for (const auto& t : triples) {
    auto a = t.head.name, b = t.tail.name;
    if (b < a) std::swap(a, b);
    pairs.emplace(a, b);
  }
  if (pairs.empty()) {
    if (no_pairs) *no_pairs = true;
    return 0.0;
  }
  const double c_max = static_cast<double>(std::max(1, kg.max_cooccurrence()));
  double total = 0.0;
  for (const auto& [a, b] : pairs) {
    total += 1.0 - static_cast<double>(kg.cooccurrence(a, b)) / c_max;
  }
  return total / static_cast<double>(pairs.size());
}

RarenessReport rareness_report(
    const std::vector<std::pair<std::string, std::string>>& id_texts,
    const kgraph::KnowledgeGraph& kg) {
  RarenessReport report;
  double sum = 0.0;
  for (const auto& [id, text] : id_texts) {
    RarenessEntry e;
    e.text_id = id;
    e.score = rareness(text, kg, &e.no_pairs);
    sum += e.score;
    report.entries.push_back(std::move(e));
  }
  if (!report.entries.empty()) {
    report.average_rareness = sum / static_cast<double>(report.entries.size());
  }
  return report;
}

}  // namespace kft::eval
