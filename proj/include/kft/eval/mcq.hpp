#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "kft/corpus/tokenizer.hpp"
#include "kft/lm/model.hpp"

namespace kft::eval {

struct McqItem {
  std::string question;
  std::vector<std::string> choices;
  int correct_index = 0;
};

struct BenchResult {
  double accuracy = 0.0;
  int correct = 0;
  int total = 0;
};

// Each choice is scored by length-normalized log-likelihood conditioned on
// the question; prediction is the argmax with lowest-index tie-break.
BenchResult run_mcq(const lm::ModelState& model, const std::vector<McqItem>& items,
                    const corpus::Vocab& vocab);

int predict_choice(const lm::ModelState& model, const McqItem& item,
                   const corpus::Vocab& vocab);

std::vector<McqItem> load_mcq(const std::filesystem::path& path);

}  // namespace kft::eval
