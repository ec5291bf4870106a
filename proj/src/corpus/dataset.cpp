#include "kft/corpus/dataset.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kft/common/error.hpp"
#include "kft/common/rng.hpp"
#include "kft/common/text.hpp"

namespace kft::corpus {

using nlohmann::json;

std::string task_kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::Title: return "title";
    case TaskKind::Abstract: return "abstract";
    case TaskKind::Claims: return "claims";
  }
  fail(Errc::ConfigInvalid, "unknown task kind");
}

TaskKind task_kind_from_name(const std::string& name) {
  if (name == "title") return TaskKind::Title;
  if (name == "abstract") return TaskKind::Abstract;
  if (name == "claims") return TaskKind::Claims;
  fail(Errc::MalformedRecord, "unknown task name: " + name);
}

CorpusSplit split_corpus(const std::vector<PatentDoc>& docs,
                         const std::array<double, 3>& ratios, uint64_t seed,
                         bool stratified) {
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0 ||
      std::abs(sum - 1.0) > 1e-9) {
    fail(Errc::ConfigInvalid, "split ratios must be non-negative and sum to 1");
  }

  std::map<char, std::vector<PatentDoc>> groups;
  if (stratified) {
    for (const auto& d : docs) groups[ipc_to_char(d.ipc)].push_back(d);
    for (const auto& [sec, g] : groups) {
      if (g.size() < 3) {
        fail(Errc::InsufficientDocs,
             std::string("section ") + sec + " has only " +
                 std::to_string(g.size()) + " docs; need at least 3 to stratify");
      }
    }
  } else {
    groups['*'] = docs;
  }

  Rng rng(seed);
  CorpusSplit split;
  for (auto& [sec, g] : groups) {
    rng.shuffle(g);
    size_t n = g.size();
    size_t n_val = static_cast<size_t>(std::floor(ratios[1] * static_cast<double>(n)));
    size_t n_test = static_cast<size_t>(std::floor(ratios[2] * static_cast<double>(n)));
    size_t n_train = n - n_val - n_test;
    for (size_t i = 0; i < n; ++i) {
      if (i < n_train) {
        split.train.push_back(std::move(g[i]));
      } else if (i < n_train + n_val) {
        split.val.push_back(std::move(g[i]));
      } else {
        split.test.push_back(std::move(g[i]));
      }
    }
  }
  return split;
}

std::string title_query(const std::string& idea) {
  return "I have the following ideas:\n" + idea +
         "\nCould you please help me come up with a suitable patent title "
         "based on my ideas for application?";
}

std::string abstract_query(const std::string& title) {
  return "Here is the title of the patent I want to apply for:\n" + title +
         "\nCould you please write a corresponding abstract based on the "
         "title?";
}

std::string claims_query(const std::string& title, const std::string& abstract_text) {
  return "Here is the title and abstract of the patent I want to apply "
         "for:\n" +
         title + "\n" + abstract_text +
         "\nCould you please write the corresponding claims?";
}

std::vector<DialoguePair> make_sft_pairs(const std::vector<PatentDoc>& docs) {
  std::vector<DialoguePair> pairs;
  for (const auto& d : docs) {
    if (!trim(d.title).empty()) {
      pairs.push_back({title_query(d.abstract_text), d.title, TaskKind::Title});
    }
    if (!trim(d.abstract_text).empty()) {
      pairs.push_back({abstract_query(d.title), d.abstract_text, TaskKind::Abstract});
    }
    std::string claims = d.numbered_claims();
    if (!claims.empty()) {
      pairs.push_back({claims_query(d.title, d.abstract_text), claims, TaskKind::Claims});
    }
  }
  return pairs;
}

namespace {

std::string truncate_half(const std::string& answer) {
  auto toks = split_ws(answer);
  size_t keep = (toks.size() + 1) / 2;
  std::string out;
  for (size_t i = 0; i < keep; ++i) {
    if (i > 0) out += ' ';
    out += toks[i];
  }
  return out;
}

std::string shuffle_sentences(const std::string& answer, Rng& rng) {
  auto sents = split_sentences(answer);
  rng.shuffle(sents);
  std::string out;
  for (size_t i = 0; i < sents.size(); ++i) {
    if (i > 0) out += ' ';
    out += sents[i];
  }
  return out;
}

}  // namespace

std::vector<PreferenceTriple> make_preference_triples(
    const std::vector<DialoguePair>& pairs, const CorruptionSpec& corruption,
    uint64_t seed) {
  if (corruption.kinds.empty()) {
    fail(Errc::ConfigInvalid, "corruption spec must name at least one kind");
  }
  Rng rng(seed);
  std::vector<PreferenceTriple> out;
  for (size_t pi = 0; pi < pairs.size(); ++pi) {
    const auto& pair = pairs[pi];
    std::string corrupted;
    bool ok = false;
    for (int attempt = 0; attempt < 10 && !ok; ++attempt) {
      CorruptionKind kind = corruption.kinds[static_cast<size_t>(
          rng.next_below(corruption.kinds.size()))];
      switch (kind) {
        case CorruptionKind::TruncateHalf:
          corrupted = truncate_half(pair.answer);
          break;
        case CorruptionKind::ShuffleSentences:
          corrupted = shuffle_sentences(pair.answer, rng);
          break;
        case CorruptionKind::SwapAnswer: {
          if (pairs.size() < 2) break;
          size_t other = static_cast<size_t>(rng.next_below(pairs.size() - 1));
          if (other >= pi) ++other;
          corrupted = pairs[other].answer;
          break;
        }
      }
      ok = !corrupted.empty() && corrupted != pair.answer;
    }
    if (ok) out.push_back({pair.query, pair.answer, corrupted});
  }
  return out;
}

void save_pairs(const std::vector<DialoguePair>& pairs,
                const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::Io, "cannot open pairs file for writing: " + path.string());
  for (const auto& p : pairs) {
    json j;
    j["query"] = p.query;
    j["answer"] = p.answer;
    j["task"] = task_kind_name(p.task_kind);
    out << j.dump() << "\n";
  }
}

std::vector<DialoguePair> load_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::Io, "cannot open pairs file: " + path.string());
  std::vector<DialoguePair> pairs;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("query") ||
        !j.contains("answer") || !j.contains("task") ||
        !j["query"].is_string() || !j["answer"].is_string() ||
        !j["task"].is_string()) {
      fail(Errc::MalformedRecord, "bad dialogue pair record", line_no);
    }
    DialoguePair p;
    p.query = j["query"].get<std::string>();
    p.answer = j["answer"].get<std::string>();
    p.task_kind = task_kind_from_name(j["task"].get<std::string>());
    if (p.query.empty() || p.answer.empty()) {
      fail(Errc::MalformedRecord, "dialogue pair fields must be non-empty", line_no);
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void save_triples(const std::vector<PreferenceTriple>& triples,
                  const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::Io, "cannot open triples file for writing: " + path.string());
  for (const auto& t : triples) {
    json j;
    j["query"] = t.query;
    j["preferred"] = t.preferred;
    j["non_preferred"] = t.non_preferred;
    out << j.dump() << "\n";
  }
}

std::vector<PreferenceTriple> load_preference_triples(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::Io, "cannot open triples file: " + path.string());
  std::vector<PreferenceTriple> triples;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("query") ||
        !j.contains("preferred") || !j.contains("non_preferred") ||
        !j["query"].is_string() || !j["preferred"].is_string() ||
        !j["non_preferred"].is_string()) {
      fail(Errc::MalformedRecord, "bad preference record", line_no);
    }
    PreferenceTriple t;
    t.query = j["query"].get<std::string>();
    t.preferred = j["preferred"].get<std::string>();
    t.non_preferred = j["non_preferred"].get<std::string>();
    if (t.query.empty() || t.preferred.empty() || t.non_preferred.empty() ||
        t.preferred == t.non_preferred) {
      fail(Errc::MalformedRecord, "preference record violates invariants", line_no);
    }
    triples.push_back(std::move(t));
  }
  return triples;
}

}  // namespace kft::corpus
