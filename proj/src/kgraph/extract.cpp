#include "kft/kgraph/extract.hpp"

#include <algorithm>
#include <array>

#include "kft/common/error.hpp"
#include "kft/common/text.hpp"

namespace kft::kgraph {

PatternSet default_patterns() {
  PatternSet set;
  set.patterns = {
      {"is used for", RelationType::UsedFor},
      {"is used in conjunction with", RelationType::Conjunction},
      {"is a feature of", RelationType::FeatureOf},
      {"is a type of", RelationType::HyponymOf},
      {"is a part of", RelationType::PartOf},
      {"is comparable to", RelationType::Compare},
      {"compared to", RelationType::Compare},
      {"compared with", RelationType::Compare},
      {"together with", RelationType::Conjunction},
  };
  return set;
}

namespace {

const std::array<std::string, 3> kArticles = {"the ", "a ", "an "};

std::string clean_entity(std::string s) {
  s = trim(s);
  // strip surrounding punctuation left over from sentence splitting
  while (!s.empty() && !is_word_char(s.back())) s.pop_back();
  while (!s.empty() && !is_word_char(s.front())) s.erase(s.begin());
  s = to_lower(trim(s));
  bool stripped = true;
  while (stripped) {
    stripped = false;
    for (const auto& art : kArticles) {
      if (s.size() > art.size() && s.compare(0, art.size(), art) == 0) {
        s.erase(0, art.size());
        stripped = true;
      }
    }
  }
  return trim(s);
}

EntityType infer_type(const std::string& name) {
  static const std::vector<std::string> kTaskWords = {
      "classification", "detection",  "recognition", "segmentation",
      "prediction",     "generation", "translation", "drafting",
      "retrieval",      "task"};
  static const std::vector<std::string> kMethodWords = {
      "network", "algorithm", "method", "model",  "converter", "system",
      "engine",  "module",    "process", "circuit", "encoder",  "decoder"};
  static const std::vector<std::string> kMaterialWords = {
      "alloy", "polymer", "composite", "steel",  "compound", "resin",
      "fiber", "ceramic", "material",  "lithium", "silicon",  "electrolyte"};
  auto words = split_ws(name);
  for (const auto& w : words) {
    if (std::find(kTaskWords.begin(), kTaskWords.end(), w) != kTaskWords.end())
      return EntityType::Task;
  }
  for (const auto& w : words) {
    if (std::find(kMethodWords.begin(), kMethodWords.end(), w) != kMethodWords.end())
      return EntityType::Method;
  }
  for (const auto& w : words) {
    if (std::find(kMaterialWords.begin(), kMaterialWords.end(), w) != kMaterialWords.end())
      return EntityType::Material;
  }
  return EntityType::Generic;
}

// Finds cue with word boundaries on both sides; npos when absent.
size_t find_cue(const std::string& sentence, const std::string& cue) {
  size_t from = 0;
  while (true) {
    size_t pos = sentence.find(cue, from);
    if (pos == std::string::npos) return std::string::npos;
    bool left_ok = pos == 0 || sentence[pos - 1] == ' ';
    size_t end = pos + cue.size();
    bool right_ok = end == sentence.size() || sentence[end] == ' ';
    if (left_ok && right_ok) return pos;
    from = pos + 1;
  }
}

}  // namespace

std::vector<Triple> extract_triples_from_text(const std::string& text,
                                              const PatternSet& patterns,
                                              const std::string& source_doc) {
  if (patterns.patterns.empty()) {
    fail(Errc::ConfigInvalid, "pattern set must be non-empty");
  }
  std::vector<Triple> out;
  for (const auto& raw_sentence : split_sentences(text)) {
    std::string sentence = to_lower(normalize_ws(raw_sentence));
    // (cue position, pattern index), matched left-to-right in the sentence
    std::vector<std::pair<size_t, size_t>> hits;
    for (size_t pi = 0; pi < patterns.patterns.size(); ++pi) {
      size_t pos = find_cue(sentence, patterns.patterns[pi].cue);
      if (pos != std::string::npos) hits.emplace_back(pos, pi);
    }
    std::sort(hits.begin(), hits.end());
    for (auto [pos, pi] : hits) {
      const Pattern& pat = patterns.patterns[pi];
      std::string head = clean_entity(sentence.substr(0, pos));
      std::string tail = clean_entity(sentence.substr(pos + pat.cue.size()));
      if (head.empty() || tail.empty() || head == tail) continue;
      Triple t;
      t.head = {head, infer_type(head), ""};
      t.tail = {tail, infer_type(tail), ""};
      t.relation = pat.relation;
      t.strength = 3;
      t.source_doc = source_doc;
      out.push_back(canonicalize(std::move(t)));
    }
  }
  return out;
}

std::vector<Triple> extract_triples(const corpus::PatentDoc& doc,
                                    const PatternSet& patterns) {
  std::string text = doc.title;
  text += ". ";
  text += doc.abstract_text;
  text += " ";
  for (const auto& c : doc.claims) {
    text += c;
    text += " ";
  }
  return extract_triples_from_text(text, patterns, doc.id);
}

std::string verbalize(const Triple& triple) {
  validate_triple(triple);
  std::string head = triple.head.name;
  if (!head.empty()) head[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(head[0])));
  std::string phrase;
  switch (triple.relation) {
    case RelationType::UsedFor: phrase = "is used for"; break;
    case RelationType::FeatureOf: phrase = "is a feature of"; break;
    case RelationType::HyponymOf: phrase = "is a type of"; break;
    case RelationType::PartOf: phrase = "is a part of"; break;
    case RelationType::Compare: phrase = "is comparable to"; break;
    case RelationType::Conjunction: phrase = "is used in conjunction with"; break;
  }
  return head + " " + phrase + " " + triple.tail.name + ".";
}

std::vector<std::string> build_knowledge_corpus(const KnowledgeGraph& kg) {
  std::vector<std::string> corpus;
  corpus.reserve(kg.size());
  for (const auto& t : kg.triples()) corpus.push_back(verbalize(t));
  return corpus;
}

}  // namespace kft::kgraph
