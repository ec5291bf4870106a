#include "kft/eval/mcq.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "kft/common/error.hpp"
#include "kft/common/text.hpp"
#include "kft/lm/forward.hpp"
#include "kft/train/stages.hpp"

namespace kft::eval {

using nlohmann::json;

int predict_choice(const lm::ModelState& model, const McqItem& item,
                   const corpus::Vocab& vocab) {
  if (item.choices.size() < 2) {
    fail(Errc::ConfigInvalid, "MCQ item needs at least two choices");
  }
  int best = 0;
  double best_score = 0.0;
  for (size_t c = 0; c < item.choices.size(); ++c) {
    corpus::DialoguePair pair{item.question, item.choices[c],
                              corpus::TaskKind::Title};
    auto seq = train::encode_pair(pair, vocab, model.config.max_seq);
    if (!seq.has_value()) {
      fail(Errc::ChoiceTooLong, "choice " + std::to_string(c) + " exceeds max_seq");
    }
    double score = -lm::nll_loss(model, seq->tokens, seq->mask);
    if (c == 0 || score > best_score) {
      best = static_cast<int>(c);
      best_score = score;
    }
  }
  return best;
}

BenchResult run_mcq(const lm::ModelState& model, const std::vector<McqItem>& items,
                    const corpus::Vocab& vocab) {
  if (items.empty()) fail(Errc::EmptyDataset, "MCQ benchmark needs items");
  BenchResult res;
  res.total = static_cast<int>(items.size());
  for (const auto& item : items) {
    if (item.correct_index < 0 ||
        item.correct_index >= static_cast<int>(item.choices.size())) {
      fail(Errc::MalformedRecord, "MCQ correct_index out of range");
    }
    if (predict_choice(model, item, vocab) == item.correct_index) ++res.correct;
  }
  res.accuracy = static_cast<double>(res.correct) / static_cast<double>(res.total);
  return res;
}

std::vector<McqItem> load_mcq(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::Io, "cannot open MCQ file: " + path.string());
  std::vector<McqItem> items;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("question") ||
        !j.contains("choices") || !j.contains("answer") ||
        !j["question"].is_string() || !j["choices"].is_array() ||
        !j["answer"].is_number_integer()) {
      fail(Errc::MalformedRecord, "bad MCQ record", line_no);
    }
    McqItem item;
    item.question = j["question"].get<std::string>();
    for (const auto& c : j["choices"]) {
      if (!c.is_string() || c.get<std::string>().empty()) {
        fail(Errc::MalformedRecord, "MCQ choices must be non-empty strings", line_no);
      }
      item.choices.push_back(c.get<std::string>());
    }
    item.correct_index = j["answer"].get<int>();
    if (item.choices.size() < 2 || item.correct_index < 0 ||
        item.correct_index >= static_cast<int>(item.choices.size())) {
      fail(Errc::MalformedRecord, "MCQ item violates invariants", line_no);
    }
    items.push_back(std::move(item));
  }
  return items;
}

}  // namespace kft::eval
