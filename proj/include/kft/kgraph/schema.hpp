#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace kft::kgraph {

enum class EntityType { Task, Method, Material, Generic };
enum class RelationType { UsedFor, FeatureOf, HyponymOf, PartOf, Compare, Conjunction };

std::string entity_type_name(EntityType t);
EntityType entity_type_from_name(const std::string& name);

std::string relation_name(RelationType r);
RelationType relation_from_name(const std::string& name);
bool is_symmetric(RelationType r);

struct Entity {
  std::string name;  // trimmed, lowercase
  EntityType etype = EntityType::Generic;
  std::string description;
};

struct Triple {
  Entity head;
  RelationType relation = RelationType::UsedFor;
  Entity tail;
  int strength = 1;
  std::string source_doc;
};

// Puts symmetric relations into head <= tail name order.
Triple canonicalize(Triple t);
void validate_triple(const Triple& t);

// Sort key ignoring strength/source: (head, relation, tail).
bool triple_key_less(const Triple& a, const Triple& b);
bool same_key(const Triple& a, const Triple& b);

class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  // Canonicalizes, then merges duplicates keeping the max strength.
  void add(Triple t);

  const std::vector<Triple>& triples() const { return triples_; }
  size_t size() const { return triples_.size(); }
  bool empty() const { return triples_.empty(); }

  // Entity name -> indices of triples touching it.
  const std::map<std::string, std::vector<size_t>>& entity_index() const {
    return index_;
  }

  // How many triples contain both names (either side, any relation).
  int cooccurrence(const std::string& a, const std::string& b) const;
  int max_cooccurrence() const;

 private:
  void rebuild_index();
  std::vector<Triple> triples_;  // kept sorted by triple_key_less
  std::map<std::string, std::vector<size_t>> index_;
};

KnowledgeGraph aggregate(const std::vector<std::vector<Triple>>& per_doc);

std::vector<Triple> import_triples(const std::filesystem::path& path);
void export_triples(const std::vector<Triple>& triples,
                    const std::filesystem::path& path);

}  // namespace kft::kgraph
