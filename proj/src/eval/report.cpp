#include "kft/eval/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "kft/common/error.hpp"
#include "kft/common/hash.hpp"
#include "kft/common/rng.hpp"
#include "kft/common/text.hpp"

namespace kft::eval {

const std::vector<std::string> kAblationRowOrder = {
    "PT", "PT+SFT", "PT+SFT+RLHF", "KPT", "KPT+SFT", "KPT+SFT+RLHF"};
const std::string kFullMethodRow = "KPT+SFT+RLHF";

MetricReport evaluate_model(const lm::ModelState& model,
                            const std::vector<corpus::DialoguePair>& testset,
                            const Embedder& embedder, const corpus::Vocab& vocab,
                            const lm::GenerationConfig& gen, uint64_t eval_seed,
                            std::vector<std::string>* generations) {
  if (testset.empty()) fail(Errc::EmptyDataset, "evaluation needs a non-empty test set");
  if (generations) generations->assign(testset.size(), "");
  MetricReport sums;
  int counted = 0;
  for (size_t pi = 0; pi < testset.size(); ++pi) {
    const auto& pair = testset[pi];
    std::vector<int> prompt;
    prompt.push_back(corpus::Vocab::kBos);
    for (int id : corpus::encode(pair.query, vocab).ids) prompt.push_back(id);
    prompt.push_back(corpus::Vocab::kSep);
    if (static_cast<int>(prompt.size()) + 1 > model.config.max_seq) continue;

    lm::GenerationConfig g = gen;
    g.seed = derive_seed(eval_seed, "eval:" + pair.query);
    if (g.stop_tokens.empty()) g.stop_tokens.push_back(corpus::Vocab::kEos);
    std::vector<int> full = lm::generate(model, prompt, g);
    corpus::TokenSeq answer_seq;
    answer_seq.ids.assign(full.begin() + static_cast<long>(prompt.size()), full.end());
    std::string answer = corpus::decode(answer_seq, vocab);
    if (generations) (*generations)[pi] = answer;

    Tokens cand = corpus::word_tokenize(answer);
    Tokens ref = corpus::word_tokenize(pair.answer);
    if (ref.empty()) continue;

    // empty or too-short sides contribute zero for the affected metric
    sums.rouge1 += rouge_n(cand, ref, 1);
    sums.rouge2 += static_cast<int>(ref.size()) >= 2 ? rouge_n(cand, ref, 2) : 0.0;
    sums.rougeL += cand.empty() ? 0.0 : rouge_l(cand, ref);
    sums.bleu4 += bleu4(cand, ref);
    sums.bert_score += cand.empty() ? 0.0 : bert_score(cand, ref, embedder);
    ++counted;
  }
  if (counted == 0) fail(Errc::EmptyDataset, "no evaluable pairs in the test set");
  const double scale = 100.0 / counted;
  MetricReport report;
  report.rouge1 = sums.rouge1 * scale;
  report.rouge2 = sums.rouge2 * scale;
  report.rougeL = sums.rougeL * scale;
  report.bleu4 = sums.bleu4 * scale;
  report.bert_score = sums.bert_score * scale;
  return report;
}

namespace {

double pct_delta(double row, double full) {
  if (full == 0.0) return 0.0;
  return (row - full) / full * 100.0;
}

}  // namespace

AblationTable ablation_table(const std::map<std::string, MetricReport>& rows) {
  for (const auto& name : kAblationRowOrder) {
    if (rows.find(name) == rows.end()) {
      fail(Errc::MissingStage, "ablation table is missing row " + name);
    }
  }
  const MetricReport& full = rows.at(kFullMethodRow);
  AblationTable table;
  for (const auto& name : kAblationRowOrder) {
    AblationRow row;
    row.name = name;
    row.metrics = rows.at(name);
    row.deltas.bert_score = pct_delta(row.metrics.bert_score, full.bert_score);
    row.deltas.bleu4 = pct_delta(row.metrics.bleu4, full.bleu4);
    row.deltas.rouge1 = pct_delta(row.metrics.rouge1, full.rouge1);
    row.deltas.rouge2 = pct_delta(row.metrics.rouge2, full.rouge2);
    row.deltas.rougeL = pct_delta(row.metrics.rougeL, full.rougeL);
    table.rows.push_back(std::move(row));
  }
  return table;
}

AblationTable ablation_report(const std::map<std::string, lm::ModelState>& models,
                              const std::vector<corpus::DialoguePair>& testset,
                              const Embedder& embedder, const corpus::Vocab& vocab,
                              const lm::GenerationConfig& gen, uint64_t eval_seed) {
  std::map<std::string, MetricReport> rows;
  for (const auto& name : kAblationRowOrder) {
    auto it = models.find(name);
    if (it == models.end()) {
      fail(Errc::MissingStage, "ablation needs a checkpoint for " + name);
    }
    rows[name] = evaluate_model(it->second, testset, embedder, vocab, gen, eval_seed);
  }
  return ablation_table(rows);
}

std::string format_delta(double delta_pct) {
  char buf[48];
  double rounded = std::round(delta_pct * 100.0) / 100.0;
  if (rounded == 0.0) {
    std::snprintf(buf, sizeof(buf), "(0.00 %%)");
  } else {
    std::snprintf(buf, sizeof(buf), "(%+.2f %%)", delta_pct);
  }
  return buf;
}

namespace {

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

void write_metrics_csv(const std::vector<std::pair<std::string, MetricReport>>& rows,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::Io, "cannot open report file for writing: " + path.string());
  out << "name,bert_score,bleu4,rouge1,rouge2,rougeL\n";
  for (const auto& [name, m] : rows) {
    out << name << ',' << fmt3(m.bert_score) << ',' << fmt3(m.bleu4) << ','
        << fmt3(m.rouge1) << ',' << fmt3(m.rouge2) << ',' << fmt3(m.rougeL) << '\n';
  }
}

void write_metrics_markdown(const std::vector<std::pair<std::string, MetricReport>>& rows,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::Io, "cannot open report file for writing: " + path.string());
  out << "| Method | Bert Score | BLEU-4 | ROUGE-1 | ROUGE-2 | ROUGE-L |\n";
  out << "|---|---|---|---|---|---|\n";
  for (const auto& [name, m] : rows) {
    out << "| " << name << " | " << fmt3(m.bert_score) << " | " << fmt3(m.bleu4)
        << " | " << fmt3(m.rouge1) << " | " << fmt3(m.rouge2) << " | "
        << fmt3(m.rougeL) << " |\n";
  }
}

void write_ablation_csv(const AblationTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::Io, "cannot open report file for writing: " + path.string());
  out << "name,bert_score,bert_delta,bleu4,bleu4_delta,rouge1,rouge1_delta,"
         "rouge2,rouge2_delta,rougeL,rougeL_delta\n";
  for (const auto& row : table.rows) {
    out << row.name << ',' << fmt3(row.metrics.bert_score) << ','
        << format_delta(row.deltas.bert_score) << ',' << fmt3(row.metrics.bleu4)
        << ',' << format_delta(row.deltas.bleu4) << ',' << fmt3(row.metrics.rouge1)
        << ',' << format_delta(row.deltas.rouge1) << ',' << fmt3(row.metrics.rouge2)
        << ',' << format_delta(row.deltas.rouge2) << ',' << fmt3(row.metrics.rougeL)
        << ',' << format_delta(row.deltas.rougeL) << '\n';
  }
}

void write_ablation_markdown(const AblationTable& table,
                             const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::Io, "cannot open report file for writing: " + path.string());
  out << "| Method | Bert Score | BLEU-4 | ROUGE-1 | ROUGE-2 | ROUGE-L |\n";
  out << "|---|---|---|---|---|---|\n";
  for (const auto& row : table.rows) {
    out << "| " << row.name << " | " << fmt3(row.metrics.bert_score) << " "
        << format_delta(row.deltas.bert_score) << " | " << fmt3(row.metrics.bleu4)
        << " " << format_delta(row.deltas.bleu4) << " | "
        << fmt3(row.metrics.rouge1) << " " << format_delta(row.deltas.rouge1)
        << " | " << fmt3(row.metrics.rouge2) << " "
        << format_delta(row.deltas.rouge2) << " | " << fmt3(row.metrics.rougeL)
        << " " << format_delta(row.deltas.rougeL) << " |\n";
  }
}

void write_rareness_csv(const RarenessReport& report,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::Io, "cannot open report file for writing: " + path.string());
  out << "text_id,score\n";
  char buf[64];
  for (const auto& e : report.entries) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f\n", e.text_id.c_str(), e.score);
    out << buf;
  }
}

}  // namespace kft::eval
