#include "kft/kgraph/schema.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "kft/common/error.hpp"
#include "kft/common/text.hpp"

namespace kft::kgraph {

using nlohmann::json;

std::string entity_type_name(EntityType t) {
  switch (t) {
    case EntityType::Task: return "Task";
    case EntityType::Method: return "Method";
    case EntityType::Material: return "Material";
    case EntityType::Generic: return "Generic";
  }
  fail(Errc::ConfigInvalid, "unknown entity type");
}

EntityType entity_type_from_name(const std::string& name) {
  if (name == "Task") return EntityType::Task;
  if (name == "Method") return EntityType::Method;
  if (name == "Material") return EntityType::Material;
  if (name == "Generic") return EntityType::Generic;
  fail(Errc::MalformedTriple, "unknown entity type: " + name);
}

std::string relation_name(RelationType r) {
  switch (r) {
    case RelationType::UsedFor: return "Used-for";
    case RelationType::FeatureOf: return "Feature-of";
    case RelationType::HyponymOf: return "Hyponym-of";
    case RelationType::PartOf: return "Part-of";
    case RelationType::Compare: return "Compare";
    case RelationType::Conjunction: return "Conjunction";
  }
  fail(Errc::ConfigInvalid, "unknown relation");
}

RelationType relation_from_name(const std::string& name) {
  if (name == "Used-for") return RelationType::UsedFor;
  if (name == "Feature-of") return RelationType::FeatureOf;
  if (name == "Hyponym-of") return RelationType::HyponymOf;
  if (name == "Part-of") return RelationType::PartOf;
  if (name == "Compare") return RelationType::Compare;
  if (name == "Conjunction") return RelationType::Conjunction;
  fail(Errc::UnknownRelation, "unknown relation: " + name);
}

bool is_symmetric(RelationType r) {
  return r == RelationType::Compare || r == RelationType::Conjunction;
}

Triple canonicalize(Triple t) {
  if (is_symmetric(t.relation) && t.tail.name < t.head.name) {
    std::swap(t.head, t.tail);
  }
  return t;
}

void validate_triple(const Triple& t) {
  if (trim(t.head.name).empty() || trim(t.tail.name).empty()) {
    fail(Errc::MalformedTriple, "entity names must be non-empty");
  }
  if (t.head.name != to_lower(trim(t.head.name)) ||
      t.tail.name != to_lower(trim(t.tail.name))) {
    fail(Errc::MalformedTriple, "entity names must be trimmed and lowercase");
  }
  if (t.head.name == t.tail.name) {
    fail(Errc::MalformedTriple, "head and tail must differ: " + t.head.name);
  }
  if (t.strength < 1 || t.strength > 5) {
    fail(Errc::StrengthOutOfRange,
         "strength must be in 1..5, got " + std::to_string(t.strength));
  }
}

bool triple_key_less(const Triple& a, const Triple& b) {
  if (a.head.name != b.head.name) return a.head.name < b.head.name;
  if (a.relation != b.relation) return static_cast<int>(a.relation) < static_cast<int>(b.relation);
  return a.tail.name < b.tail.name;
}

bool same_key(const Triple& a, const Triple& b) {
  return a.head.name == b.head.name && a.relation == b.relation &&
         a.tail.name == b.tail.name;
}

void KnowledgeGraph::add(Triple t) {
  t = canonicalize(t);
  validate_triple(t);
  auto it = std::lower_bound(triples_.begin(), triples_.end(), t, triple_key_less);
  if (it != triples_.end() && same_key(*it, t)) {
    if (t.strength > it->strength) {
      it->strength = t.strength;
      it->source_doc = t.source_doc;
    }
  } else {
    triples_.insert(it, std::move(t));
  }
  rebuild_index();
}

void KnowledgeGraph::rebuild_index() {
  index_.clear();
  for (size_t i = 0; i < triples_.size(); ++i) {
    index_[triples_[i].head.name].push_back(i);
    index_[triples_[i].tail.name].push_back(i);
  }
}

int KnowledgeGraph::cooccurrence(const std::string& a, const std::string& b) const {
  int n = 0;
  for (const auto& t : triples_) {
    bool has_a = t.head.name == a || t.tail.name == a;
    bool has_b = t.head.name == b || t.tail.name == b;
    if (has_a && has_b) ++n;
  }
  return n;
}

int KnowledgeGraph::max_cooccurrence() const {
  int best = 0;
  for (const auto& t : triples_) {
    best = std::max(best, cooccurrence(t.head.name, t.tail.name));
  }
  return best;
}

KnowledgeGraph aggregate(const std::vector<std::vector<Triple>>& per_doc) {
  KnowledgeGraph kg;
  for (const auto& doc_triples : per_doc) {
    for (const auto& t : doc_triples) kg.add(t);
  }
  return kg;
}

std::vector<Triple> import_triples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::Io, "cannot open triples file: " + path.string());
  std::vector<Triple> out;
  std::string line;
  long line_no = 0;
  auto parse_entity = [&](const json& j) -> Entity {
    if (!j.is_object() || !j.contains("name") || !j["name"].is_string() ||
        !j.contains("type") || !j["type"].is_string()) {
      fail(Errc::MalformedTriple, "entity must have string name and type", line_no);
    }
    Entity e;
    e.name = to_lower(trim(j["name"].get<std::string>()));
    e.etype = entity_type_from_name(j["type"].get<std::string>());
    if (j.contains("desc")) {
      if (!j["desc"].is_string()) {
        fail(Errc::MalformedTriple, "entity desc must be a string", line_no);
      }
      e.description = j["desc"].get<std::string>();
    }
    return e;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      fail(Errc::MalformedTriple, "line is not a JSON object", line_no);
    }
    for (const auto& key : {"h", "r", "t", "strength", "source_doc"}) {
      if (!j.contains(key)) {
        fail(Errc::MalformedTriple, std::string("missing key: ") + key, line_no);
      }
    }
    Triple t;
    t.head = parse_entity(j["h"]);
    t.tail = parse_entity(j["t"]);
    if (!j["r"].is_string()) fail(Errc::MalformedTriple, "relation must be a string", line_no);
    try {
      t.relation = relation_from_name(j["r"].get<std::string>());
    } catch (const KftError& e) {
      fail(e.code(), e.what(), line_no);
    }
    if (!j["strength"].is_number_integer()) {
      fail(Errc::MalformedTriple, "strength must be an integer", line_no);
    }
    t.strength = j["strength"].get<int>();
    if (t.strength < 1 || t.strength > 5) {
      fail(Errc::StrengthOutOfRange,
           "strength must be in 1..5, got " + std::to_string(t.strength), line_no);
    }
    if (!j["source_doc"].is_string()) {
      fail(Errc::MalformedTriple, "source_doc must be a string", line_no);
    }
    t.source_doc = j["source_doc"].get<std::string>();
    try {
      validate_triple(t);
    } catch (const KftError& e) {
      fail(e.code(), e.what(), line_no);
    }
    out.push_back(std::move(t));
  }
  return out;
}

void export_triples(const std::vector<Triple>& triples,
                    const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::Io, "cannot open triples file for writing: " + path.string());
  for (const auto& t : triples) {
    json j;
    j["h"] = {{"name", t.head.name},
              {"type", entity_type_name(t.head.etype)},
              {"desc", t.head.description}};
    j["r"] = relation_name(t.relation);
    j["t"] = {{"name", t.tail.name},
              {"type", entity_type_name(t.tail.etype)},
              {"desc", t.tail.description}};
    j["strength"] = t.strength;
    j["source_doc"] = t.source_doc;
    out << j.dump() << "\n";
  }
}

}  // namespace kft::kgraph
