#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "kft/corpus/patent.hpp"

namespace kft::corpus {

enum class TaskKind { Title, Abstract, Claims };

std::string task_kind_name(TaskKind k);
TaskKind task_kind_from_name(const std::string& name);

struct DialoguePair {
  std::string query;
  std::string answer;
  TaskKind task_kind = TaskKind::Title;
};

// The three dialogue prompt templates. Every query in the project, whether
// for fine-tuning pairs or interactive drafting, is built through these.
std::string title_query(const std::string& idea);
std::string abstract_query(const std::string& title);
std::string claims_query(const std::string& title, const std::string& abstract_text);

struct PreferenceTriple {
  std::string query;
  std::string preferred;
  std::string non_preferred;
};

struct CorpusSplit {
  std::vector<PatentDoc> train;
  std::vector<PatentDoc> val;
  std::vector<PatentDoc> test;
};

// Shuffles and partitions docs by the given (train, val, test) fractions.
// With stratification each IPC section is split by the same fractions;
// rounding remainders always land in the training split.
CorpusSplit split_corpus(const std::vector<PatentDoc>& docs,
                         const std::array<double, 3>& ratios, uint64_t seed,
                         bool stratified = true);

// Builds up to three query/answer pairs per doc: idea->title (the abstract
// plays the idea), title->abstract, and title+abstract->claims. Pairs whose
// answer would be empty are skipped.
std::vector<DialoguePair> make_sft_pairs(const std::vector<PatentDoc>& docs);

enum class CorruptionKind { TruncateHalf, ShuffleSentences, SwapAnswer };

struct CorruptionSpec {
  std::vector<CorruptionKind> kinds;
};

// Preferred = gold answer; non-preferred = a seeded corruption of it. A pair
// is dropped if 10 corruption attempts all collide with the gold answer.
std::vector<PreferenceTriple> make_preference_triples(
    const std::vector<DialoguePair>& pairs, const CorruptionSpec& corruption,
    uint64_t seed);

void save_pairs(const std::vector<DialoguePair>& pairs,
                const std::filesystem::path& path);
std::vector<DialoguePair> load_pairs(const std::filesystem::path& path);

void save_triples(const std::vector<PreferenceTriple>& triples,
                  const std::filesystem::path& path);
std::vector<PreferenceTriple> load_preference_triples(
    const std::filesystem::path& path);

}  // namespace kft::corpus
