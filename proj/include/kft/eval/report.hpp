#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "kft/corpus/dataset.hpp"
#include "kft/corpus/tokenizer.hpp"
#include "kft/eval/metrics.hpp"
#include "kft/eval/rareness.hpp"
#include "kft/lm/forward.hpp"
#include "kft/lm/model.hpp"

namespace kft::eval {

struct MetricReport {
  double bert_score = 0.0;
  double bleu4 = 0.0;
  double rouge1 = 0.0;
  double rouge2 = 0.0;
  double rougeL = 0.0;
};

// Generates one answer per query (seeded per pair by query content so subsets
// reproduce the same generations), averages the five metrics over the test
// set, and reports them in percentage points. When generations is non-null it
// receives one decoded answer per test pair ("" for skipped pairs).
MetricReport evaluate_model(const lm::ModelState& model,
                            const std::vector<corpus::DialoguePair>& testset,
                            const Embedder& embedder, const corpus::Vocab& vocab,
                            const lm::GenerationConfig& gen, uint64_t eval_seed,
                            std::vector<std::string>* generations = nullptr);

extern const std::vector<std::string> kAblationRowOrder;  // six stage combos
extern const std::string kFullMethodRow;                  // "KPT+SFT+RLHF"

struct AblationRow {
  std::string name;
  MetricReport metrics;
  MetricReport deltas;  // (row - full) / full * 100 per metric
};

struct AblationTable {
  std::vector<AblationRow> rows;
};

AblationTable ablation_table(const std::map<std::string, MetricReport>& rows);

AblationTable ablation_report(const std::map<std::string, lm::ModelState>& models,
                              const std::vector<corpus::DialoguePair>& testset,
                              const Embedder& embedder, const corpus::Vocab& vocab,
                              const lm::GenerationConfig& gen, uint64_t eval_seed);

// "(-78.61 %)" style percentage formatting.
std::string format_delta(double delta_pct);

void write_metrics_csv(const std::vector<std::pair<std::string, MetricReport>>& rows,
                       const std::filesystem::path& path);
void write_metrics_markdown(const std::vector<std::pair<std::string, MetricReport>>& rows,
                            const std::filesystem::path& path);
void write_ablation_csv(const AblationTable& table, const std::filesystem::path& path);
void write_ablation_markdown(const AblationTable& table, const std::filesystem::path& path);
void write_rareness_csv(const RarenessReport& report, const std::filesystem::path& path);

}  // namespace kft::eval
