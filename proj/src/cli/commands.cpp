#include "kft/cli/commands.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kft/cli/config.hpp"
#include "kft/cli/draft.hpp"
#include "kft/common/error.hpp"
#include "kft/common/hash.hpp"
#include "kft/common/rng.hpp"
#include "kft/common/text.hpp"
#include "kft/corpus/dataset.hpp"
#include "kft/corpus/patent.hpp"
#include "kft/corpus/tokenizer.hpp"
#include "kft/eval/embedder.hpp"
#include "kft/eval/mcq.hpp"
#include "kft/eval/rareness.hpp"
#include "kft/eval/report.hpp"
#include "kft/kgraph/extract.hpp"
#include "kft/kgraph/schema.hpp"
#include "kft/lm/checkpoint.hpp"
#include "kft/train/pipeline.hpp"

namespace kft::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// shared plumbing

struct Workspace {
  std::vector<corpus::PatentDoc> docs;
  corpus::Vocab vocab;
  corpus::CorpusSplit split;
};

Workspace load_workspace(const RunConfig& cfg) {
  if (cfg.corpus.empty()) {
    fail(Errc::ConfigInvalid, "this command needs a corpus path (--corpus or paths.corpus)");
  }
  Workspace ws;
  ws.docs = corpus::load_corpus(cfg.corpus);
  ws.vocab = corpus::build_vocab(ws.docs, cfg.vocab_cap);
  ws.split = corpus::split_corpus(ws.docs, cfg.split,
                                  derive_seed(cfg.global_seed, "split"));
  return ws;
}

std::string doc_text(const corpus::PatentDoc& d) {
  std::string text = d.title;
  if (!trim(d.abstract_text).empty()) text += "\n" + d.abstract_text;
  std::string claims = d.numbered_claims();
  if (!claims.empty()) text += "\n" + claims;
  return text;
}

kgraph::KnowledgeGraph build_graph(const RunConfig& cfg,
                                   const std::vector<corpus::PatentDoc>& docs) {
  std::vector<std::vector<kgraph::Triple>> per_doc;
  if (!cfg.triples.empty()) {
    per_doc.push_back(kgraph::import_triples(cfg.triples));
  } else {
    auto patterns = kgraph::default_patterns();
    per_doc.reserve(docs.size());
    for (const auto& d : docs) per_doc.push_back(kgraph::extract_triples(d, patterns));
  }
  return kgraph::aggregate(per_doc);
}

corpus::CorruptionSpec all_corruptions() {
  return corpus::CorruptionSpec{{corpus::CorruptionKind::TruncateHalf,
                                 corpus::CorruptionKind::ShuffleSentences,
                                 corpus::CorruptionKind::SwapAnswer}};
}

train::PipelineInputs make_inputs(const RunConfig& cfg, const Workspace& ws,
                                  bool need_knowledge) {
  train::PipelineInputs in;
  in.general_corpus.reserve(ws.split.train.size());
  for (const auto& d : ws.split.train) in.general_corpus.push_back(doc_text(d));
  if (need_knowledge) {
    auto kg = build_graph(cfg, ws.split.train);
    in.knowledge_corpus = kgraph::build_knowledge_corpus(kg);
    if (in.knowledge_corpus.empty()) {
      fail(Errc::ConfigInvalid,
           "knowledge-injection pre-training needs a triples file or a corpus "
           "with extractable knowledge");
    }
  }
  in.sft_pairs = corpus::make_sft_pairs(ws.split.train);
  in.preference_triples = corpus::make_preference_triples(
      in.sft_pairs, all_corruptions(), derive_seed(cfg.global_seed, "pref"));
  in.ppo_queries.reserve(in.sft_pairs.size());
  for (const auto& p : in.sft_pairs) in.ppo_queries.push_back(p.query);
  return in;
}

train::PipelineConfigs make_pipeline_configs(const RunConfig& cfg, int vocab_size) {
  train::PipelineConfigs pc;
  pc.model = cfg.model;
  pc.model.vocab_size = vocab_size;
  pc.pretrain = cfg.pretrain;
  pc.sft = cfg.sft;
  pc.rm = cfg.rm;
  pc.ppo = cfg.ppo;
  pc.global_seed = cfg.global_seed;
  pc.sft_use_lora = cfg.sft_use_lora;
  pc.lora_rank = cfg.lora_rank;
  pc.lora_scaling = cfg.lora_scaling;
  return pc;
}

lm::ModelState load_model_for(const RunConfig&, const fs::path& ckpt_path,
                              const corpus::Vocab& vocab, std::string* tag = nullptr) {
  auto ckpt = lm::load_checkpoint(ckpt_path);
  if (ckpt.model.config.vocab_size != vocab.size()) {
    fail(Errc::ConfigInvalid,
         "checkpoint vocab size " + std::to_string(ckpt.model.config.vocab_size) +
             " does not match the corpus vocabulary (" +
             std::to_string(vocab.size()) + "); same corpus and vocab_cap required");
  }
  if (tag) *tag = ckpt.stage_tag;
  return std::move(ckpt.model);
}

json seed_block(const RunConfig& cfg) {
  json seeds;
  seeds["global"] = cfg.global_seed;
  for (const char* tag : {"init", "split", "pref", "pt", "kpt", "sft", "rm",
                          "ppo", "draft"}) {
    seeds[tag] = derive_seed(cfg.global_seed, tag);
  }
  seeds["eval"] = cfg.eval_seed;
  return seeds;
}

void write_manifest(const RunConfig& cfg, const std::string& command,
                    const json& args, const std::vector<std::string>& input_paths) {
  json inputs = json::object();
  for (const auto& p : input_paths) {
    if (!p.empty()) inputs[p] = hex64(fnv1a64_file(p));
  }
  json m;
  m["command"] = command;
  m["args"] = args;
  m["config"] = config_to_json(cfg);
  m["inputs"] = inputs;
  m["seeds"] = seed_block(cfg);

  fs::path dir = fs::path(cfg.out_dir) / "manifests";
  fs::create_directories(dir);
  fs::path path = dir / (command + ".json");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot write " + path.string());
  out << m.dump(2) << "\n";
}

void write_text_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot write " + path.string());
  out << content;
}

void write_ppo_stats_csv(const std::vector<train::PpoBatchStats>& stats,
                         const fs::path& path) {
  std::ostringstream out;
  out << "batch,mean_reward,mean_rm_score,kl_rollout,kl_post,mean_answer_len\n";
  char buf[200];
  for (const auto& s : stats) {
    std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g,%.12g,%.12g,%.12g\n", s.batch,
                  s.mean_reward, s.mean_rm_score, s.kl_rollout, s.kl_post,
                  s.mean_answer_len);
    out << buf;
  }
  write_text_file(path, out.str());
}

std::unique_ptr<eval::Embedder> make_embedder(const RunConfig& cfg,
                                              const lm::ModelState& model,
                                              const corpus::Vocab& vocab) {
  if (cfg.embedder == "hidden") {
    return std::make_unique<eval::HiddenStateEmbedder>(model, vocab);
  }
  return std::make_unique<eval::StaticEmbedder>(model, vocab);
}

// ---------------------------------------------------------------------------
// subcommand handlers; every handler validates and loads before it creates
// any output file, then writes its manifest, then runs.

int cmd_ingest(const RunConfig& cfg) {
  Workspace ws = load_workspace(cfg);
  auto train_pairs = corpus::make_sft_pairs(ws.split.train);
  auto val_pairs = corpus::make_sft_pairs(ws.split.val);
  auto test_pairs = corpus::make_sft_pairs(ws.split.test);
  auto prefs = corpus::make_preference_triples(
      train_pairs, all_corruptions(), derive_seed(cfg.global_seed, "pref"));

  write_manifest(cfg, "ingest", json::object(), {cfg.corpus});
  fs::path data = fs::path(cfg.out_dir) / "data";
  fs::create_directories(data);
  ws.vocab.save(data / "vocab.json");
  corpus::save_corpus(ws.split.train, data / "train.jsonl");
  corpus::save_corpus(ws.split.val, data / "val.jsonl");
  corpus::save_corpus(ws.split.test, data / "test.jsonl");
  corpus::save_pairs(train_pairs, data / "train_pairs.jsonl");
  corpus::save_pairs(val_pairs, data / "val_pairs.jsonl");
  corpus::save_pairs(test_pairs, data / "test_pairs.jsonl");
  corpus::save_triples(prefs, data / "preference.jsonl");

  std::cout << "ingested " << ws.docs.size() << " docs (train " << ws.split.train.size()
            << ", val " << ws.split.val.size() << ", test " << ws.split.test.size()
            << "), vocab " << ws.vocab.size() << ", sft pairs " << train_pairs.size()
            << ", preference triples " << prefs.size() << "\n";
  return 0;
}

int cmd_kg_extract(const RunConfig& cfg) {
  if (cfg.corpus.empty()) {
    fail(Errc::ConfigInvalid, "kg-extract needs a corpus path");
  }
  auto docs = corpus::load_corpus(cfg.corpus);
  auto patterns = kgraph::default_patterns();
  std::vector<std::vector<kgraph::Triple>> per_doc;
  per_doc.reserve(docs.size());
  for (const auto& d : docs) per_doc.push_back(kgraph::extract_triples(d, patterns));
  auto kg = kgraph::aggregate(per_doc);

  write_manifest(cfg, "kg-extract", json::object(), {cfg.corpus});
  fs::path out = fs::path(cfg.out_dir) / "kg" / "triples.jsonl";
  fs::create_directories(out.parent_path());
  kgraph::export_triples(kg.triples(), out);
  std::cout << "extracted " << kg.size() << " triples from " << docs.size()
            << " docs -> " << out.string() << "\n";
  return 0;
}

int cmd_kg_import(const RunConfig& cfg) {
  if (cfg.triples.empty()) {
    fail(Errc::ConfigInvalid, "kg-import needs a triples path (--triples or paths.triples)");
  }
  auto triples = kgraph::import_triples(cfg.triples);
  auto kg = kgraph::aggregate({triples});

  write_manifest(cfg, "kg-import", json::object(), {cfg.triples});
  fs::path out = fs::path(cfg.out_dir) / "kg" / "graph.jsonl";
  fs::create_directories(out.parent_path());
  kgraph::export_triples(kg.triples(), out);
  std::cout << "imported " << triples.size() << " triples, " << kg.size()
            << " after aggregation -> " << out.string() << "\n";
  return 0;
}

int cmd_verbalize(const RunConfig& cfg) {
  if (cfg.triples.empty() && cfg.corpus.empty()) {
    fail(Errc::ConfigInvalid, "verbalize needs a triples file or a corpus to extract from");
  }
  std::vector<corpus::PatentDoc> docs;
  if (cfg.triples.empty()) docs = corpus::load_corpus(cfg.corpus);
  auto kg = build_graph(cfg, docs);
  auto sentences = kgraph::build_knowledge_corpus(kg);

  std::vector<std::string> inputs;
  if (!cfg.triples.empty()) {
    inputs.push_back(cfg.triples);
  } else {
    inputs.push_back(cfg.corpus);
  }
  write_manifest(cfg, "verbalize", json::object(), inputs);
  std::string body;
  for (const auto& s : sentences) body += s + "\n";
  fs::path out = fs::path(cfg.out_dir) / "kg" / "knowledge.txt";
  write_text_file(out, body);
  std::cout << "verbalized " << sentences.size() << " knowledge sentences -> "
            << out.string() << "\n";
  return 0;
}

int cmd_pretrain(const RunConfig& cfg, const std::string& mode) {
  if (mode != "pt" && mode != "kpt") {
    fail(Errc::ConfigInvalid, "pretrain mode must be pt or kpt");
  }
  if (mode == "kpt" && cfg.pretrain.alpha <= 0) {
    fail(Errc::ConfigInvalid, "kpt needs a positive knowledge weight alpha");
  }
  Workspace ws = load_workspace(cfg);
  bool kpt = mode == "kpt";
  auto inputs = make_inputs(cfg, ws, kpt);
  auto pc = make_pipeline_configs(cfg, ws.vocab.size());
  auto stage = kpt ? train::Stage::KPT : train::Stage::PT;

  std::vector<std::string> in_paths = {cfg.corpus};
  if (kpt && !cfg.triples.empty()) in_paths.push_back(cfg.triples);
  write_manifest(cfg, "pretrain", json{{"mode", mode}}, in_paths);

  auto arts = train::run_pipeline({stage}, inputs, pc, ws.vocab, cfg.out_dir);
  const auto& rec = arts.records.back();
  std::cout << "pretrain (" << mode << ") finished after " << rec.curve.size()
            << " steps; final loss "
            << (rec.curve.empty() ? 0.0 : rec.curve.back().value) << "; checkpoint "
            << rec.checkpoint.string() << "\n";
  return 0;
}

int cmd_sft(const RunConfig& cfg, const std::string& checkpoint) {
  Workspace ws = load_workspace(cfg);
  auto model = load_model_for(cfg, checkpoint, ws.vocab);
  auto pairs = corpus::make_sft_pairs(ws.split.train);
  if (cfg.sft_use_lora && !model.lora) {
    model = lm::attach_lora(model, cfg.lora_rank, cfg.lora_scaling);
  }
  train::TrainConfig tc = cfg.sft;
  tc.seed = derive_seed(cfg.global_seed, "sft");

  write_manifest(cfg, "sft", json{{"checkpoint", checkpoint}}, {cfg.corpus, checkpoint});
  auto res = train::run_sft(std::move(model), pairs, ws.vocab, tc);
  fs::path ckpt = fs::path(cfg.out_dir) / "checkpoints" / "sft.ckpt";
  fs::create_directories(ckpt.parent_path());
  lm::save_checkpoint(res.model, "sft", ckpt);
  train::write_curve_csv(res.curve, fs::path(cfg.out_dir) / "curves" / "sft.csv");
  std::cout << "sft finished after " << res.curve.size() << " steps ("
            << res.skipped_overlong << " overlong pairs skipped); checkpoint "
            << ckpt.string() << "\n";
  return 0;
}

int cmd_train_rm(const RunConfig& cfg, const std::string& checkpoint) {
  Workspace ws = load_workspace(cfg);
  auto model = load_model_for(cfg, checkpoint, ws.vocab);
  auto train_pairs = corpus::make_sft_pairs(ws.split.train);
  auto prefs = corpus::make_preference_triples(
      train_pairs, all_corruptions(), derive_seed(cfg.global_seed, "pref"));
  train::TrainConfig tc = cfg.rm;
  tc.seed = derive_seed(cfg.global_seed, "rm");

  write_manifest(cfg, "train-rm", json{{"checkpoint", checkpoint}},
                 {cfg.corpus, checkpoint});
  auto res = train::train_reward_model(std::move(model), prefs, ws.vocab, tc);
  fs::path base = fs::path(cfg.out_dir) / "checkpoints" / "rm.ckpt";
  fs::path head = fs::path(cfg.out_dir) / "checkpoints" / "rm_head.json";
  fs::create_directories(base.parent_path());
  train::save_reward_model(res.rm, base, head);
  train::write_curve_csv(res.curve, fs::path(cfg.out_dir) / "curves" / "rm.csv");

  auto val_pairs = corpus::make_sft_pairs(ws.split.val);
  std::string acc = "n/a";
  if (!val_pairs.empty()) {
    auto held_out = corpus::make_preference_triples(
        val_pairs, all_corruptions(), derive_seed(cfg.global_seed, "pref-val"));
    if (!held_out.empty()) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.4f",
                    train::pairwise_accuracy(res.rm, held_out, ws.vocab));
      acc = buf;
    }
  }
  std::cout << "reward model trained on " << prefs.size()
            << " preference triples; held-out pairwise accuracy " << acc
            << "; saved " << base.string() << "\n";
  return 0;
}

int cmd_ppo(const RunConfig& cfg, const std::string& checkpoint,
            std::string reward_base, std::string reward_head) {
  Workspace ws = load_workspace(cfg);
  if (reward_base.empty()) {
    reward_base = (fs::path(cfg.out_dir) / "checkpoints" / "rm.ckpt").string();
  }
  if (reward_head.empty()) {
    reward_head = (fs::path(cfg.out_dir) / "checkpoints" / "rm_head.json").string();
  }
  auto policy = load_model_for(cfg, checkpoint, ws.vocab);
  auto rm = train::load_reward_model(reward_base, reward_head);
  auto pairs = corpus::make_sft_pairs(ws.split.train);
  std::vector<std::string> queries;
  queries.reserve(pairs.size());
  for (const auto& p : pairs) queries.push_back(p.query);

  train::PpoConfig pcfg = cfg.ppo;
  pcfg.seed = derive_seed(cfg.global_seed, "ppo");
  if (pcfg.gen.stop_tokens.empty()) pcfg.gen.stop_tokens = {corpus::Vocab::kEos};

  write_manifest(cfg, "ppo",
                 json{{"checkpoint", checkpoint},
                      {"reward_base", reward_base},
                      {"reward_head", reward_head}},
                 {cfg.corpus, checkpoint, reward_base, reward_head});
  auto res = train::run_ppo(std::move(policy), rm, queries, ws.vocab, pcfg);
  fs::path ckpt = fs::path(cfg.out_dir) / "checkpoints" / "ppo.ckpt";
  fs::create_directories(ckpt.parent_path());
  lm::save_checkpoint(res.model, "ppo", ckpt);
  write_ppo_stats_csv(res.curve, fs::path(cfg.out_dir) / "curves" / "ppo_stats.csv");
  train::Curve curve;
  for (const auto& s : res.curve) {
    curve.push_back({static_cast<long>(s.batch), s.mean_reward});
  }
  train::write_curve_csv(curve, fs::path(cfg.out_dir) / "curves" / "ppo.csv");
  double last = res.curve.empty() ? 0.0 : res.curve.back().mean_reward;
  std::cout << "ppo finished after " << res.curve.size()
            << " batches; final mean shaped reward " << last << "; checkpoint "
            << ckpt.string() << "\n";
  return 0;
}

int cmd_pipeline(const RunConfig& cfg, const std::string& stages_csv) {
  std::vector<train::Stage> stages;
  std::stringstream ss(stages_csv);
  std::string tag;
  while (std::getline(ss, tag, ',')) {
    if (!trim(tag).empty()) stages.push_back(train::stage_from_tag(trim(tag)));
  }
  train::validate_stage_order(stages);
  bool kpt = !stages.empty() && stages.front() == train::Stage::KPT;

  Workspace ws = load_workspace(cfg);
  auto inputs = make_inputs(cfg, ws, kpt);
  auto pc = make_pipeline_configs(cfg, ws.vocab.size());

  std::vector<std::string> in_paths = {cfg.corpus};
  if (kpt && !cfg.triples.empty()) in_paths.push_back(cfg.triples);
  write_manifest(cfg, "pipeline", json{{"stages", stages_csv}}, in_paths);

  auto arts = train::run_pipeline(stages, inputs, pc, ws.vocab, cfg.out_dir);
  if (!arts.ppo_stats.empty()) {
    write_ppo_stats_csv(arts.ppo_stats,
                        fs::path(cfg.out_dir) / "curves" / "ppo_stats.csv");
  }
  for (const auto& rec : arts.records) {
    std::cout << "stage " << rec.tag << " -> " << rec.checkpoint.string() << "\n";
  }
  return 0;
}

int cmd_draft(const RunConfig& cfg, const std::string& checkpoint,
              const std::string& idea) {
  Workspace ws = load_workspace(cfg);
  auto model = load_model_for(cfg, checkpoint, ws.vocab);
  lm::GenerationConfig gen = cfg.gen;
  gen.seed = derive_seed(cfg.global_seed, "draft");

  write_manifest(cfg, "draft", json{{"checkpoint", checkpoint}, {"idea", idea}},
                 {cfg.corpus, checkpoint});
  auto session = draft_session(model, idea, ws.vocab, gen);
  fs::path dir = fs::path(cfg.out_dir) / "draft";
  fs::create_directories(dir);
  save_draft_json(session, dir / "session.json");
  save_draft_transcript(session, dir / "transcript.txt");
  std::cout << "draft saved to " << (dir / "session.json").string() << "; verdict "
            << (session.verdict.win ? "Win" : "Loss") << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint) {
  Workspace ws = load_workspace(cfg);
  std::string tag;
  auto model = load_model_for(cfg, checkpoint, ws.vocab, &tag);
  if (tag.empty()) tag = "model";
  auto test_pairs = corpus::make_sft_pairs(ws.split.test);
  if (test_pairs.empty()) fail(Errc::EmptyDataset, "test split produced no pairs");
  auto embedder = make_embedder(cfg, model, ws.vocab);

  write_manifest(cfg, "eval", json{{"checkpoint", checkpoint}},
                 {cfg.corpus, checkpoint});
  std::vector<std::string> generations;
  auto report = eval::evaluate_model(model, test_pairs, *embedder, ws.vocab,
                                     cfg.gen, cfg.eval_seed, &generations);
  fs::path reports = fs::path(cfg.out_dir) / "reports";
  fs::create_directories(reports);
  std::vector<std::pair<std::string, eval::MetricReport>> rows = {{tag, report}};
  eval::write_metrics_csv(rows, reports / "metrics.csv");
  eval::write_metrics_markdown(rows, reports / "metrics.md");

  auto kg = build_graph(cfg, ws.split.train);
  if (!kg.empty()) {
    std::vector<std::pair<std::string, std::string>> id_texts;
    for (size_t i = 0; i < generations.size(); ++i) {
      id_texts.emplace_back("pair-" + std::to_string(i), generations[i]);
    }
    eval::write_rareness_csv(eval::rareness_report(id_texts, kg),
                             reports / "rareness.csv");
  }
  std::printf(
      "eval (%s): bert %.3f bleu4 %.3f rouge1 %.3f rouge2 %.3f rougeL %.3f\n",
      tag.c_str(), report.bert_score, report.bleu4, report.rouge1, report.rouge2,
      report.rougeL);
  return 0;
}

int cmd_bench(const RunConfig& cfg, const std::string& checkpoint) {
  if (cfg.mcq.empty()) {
    fail(Errc::ConfigInvalid, "bench needs an MCQ file (--mcq or paths.mcq)");
  }
  Workspace ws = load_workspace(cfg);
  auto model = load_model_for(cfg, checkpoint, ws.vocab);
  auto items = eval::load_mcq(cfg.mcq);

  write_manifest(cfg, "bench", json{{"checkpoint", checkpoint}},
                 {cfg.corpus, checkpoint, cfg.mcq});
  auto result = eval::run_mcq(model, items, ws.vocab);
  fs::path reports = fs::path(cfg.out_dir) / "reports";
  char buf[128];
  std::snprintf(buf, sizeof(buf), "accuracy,correct,total\n%.6f,%d,%d\n",
                result.accuracy, result.correct, result.total);
  write_text_file(reports / "bench.csv", buf);
  std::snprintf(buf, sizeof(buf),
                "| accuracy | correct | total |\n|---:|---:|---:|\n| %.6f | %d | %d |\n",
                result.accuracy, result.correct, result.total);
  write_text_file(reports / "bench.md", buf);
  std::printf("bench: %d/%d correct (accuracy %.4f)\n", result.correct, result.total,
              result.accuracy);
  return 0;
}

int cmd_ablate(const RunConfig& cfg) {
  Workspace ws = load_workspace(cfg);
  auto inputs = make_inputs(cfg, ws, true);
  auto pc = make_pipeline_configs(cfg, ws.vocab.size());
  auto test_pairs = corpus::make_sft_pairs(ws.split.test);
  if (test_pairs.empty()) fail(Errc::EmptyDataset, "test split produced no pairs");

  using train::Stage;
  const std::vector<std::pair<std::string, std::vector<Stage>>> combos = {
      {"PT", {Stage::PT}},
      {"PT+SFT", {Stage::PT, Stage::SFT}},
      {"PT+SFT+RLHF", {Stage::PT, Stage::SFT, Stage::RM, Stage::PPO}},
      {"KPT", {Stage::KPT}},
      {"KPT+SFT", {Stage::KPT, Stage::SFT}},
      {"KPT+SFT+RLHF", {Stage::KPT, Stage::SFT, Stage::RM, Stage::PPO}},
  };

  std::vector<std::string> in_paths = {cfg.corpus};
  if (!cfg.triples.empty()) in_paths.push_back(cfg.triples);
  write_manifest(cfg, "ablate", json::object(), in_paths);

  std::map<std::string, lm::ModelState> models;
  for (const auto& [name, stages] : combos) {
    std::string key = to_lower(name);
    for (auto& c : key) {
      if (c == '+') c = '_';
    }
    fs::path dir = fs::path(cfg.out_dir) / "ablation" / key;
    auto arts = train::run_pipeline(stages, inputs, pc, ws.vocab, dir);
    models.emplace(name, std::move(arts.final_model));
    std::cout << "ablation row " << name << " trained ("
              << arts.records.back().checkpoint.string() << ")\n";
  }

  auto embedder = make_embedder(cfg, models.at(eval::kFullMethodRow), ws.vocab);
  auto table = eval::ablation_report(models, test_pairs, *embedder, ws.vocab,
                                     cfg.gen, cfg.eval_seed);
  fs::path reports = fs::path(cfg.out_dir) / "reports";
  fs::create_directories(reports);
  eval::write_ablation_csv(table, reports / "ablation.csv");
  eval::write_ablation_markdown(table, reports / "ablation.md");
  for (const auto& row : table.rows) {
    std::printf("%-13s bleu4 %8.3f %s\n", row.name.c_str(), row.metrics.bleu4,
                eval::format_delta(row.deltas.bleu4).c_str());
  }
  return 0;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(f);
  return fields;
}

int cmd_report(const RunConfig& cfg) {
  fs::path reports = fs::path(cfg.out_dir) / "reports";
  fs::path metrics_csv = reports / "metrics.csv";
  fs::path ablation_csv = reports / "ablation.csv";
  bool any = false;
  std::vector<std::string> inputs;
  if (fs::exists(metrics_csv)) inputs.push_back(metrics_csv.string());
  if (fs::exists(ablation_csv)) inputs.push_back(ablation_csv.string());
  if (inputs.empty()) {
    fail(Errc::ConfigInvalid,
         "report needs reports/metrics.csv or reports/ablation.csv under the "
         "output directory; run eval or ablate first");
  }
  write_manifest(cfg, "report", json::object(), inputs);

  if (fs::exists(metrics_csv)) {
    std::ifstream in(metrics_csv);
    std::string line;
    std::getline(in, line);  // header
    std::vector<std::pair<std::string, eval::MetricReport>> rows;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      auto f = split_csv_line(line);
      if (f.size() != 6) fail(Errc::MalformedRecord, "bad metrics row: " + line);
      eval::MetricReport r;
      r.bert_score = std::stod(f[1]);
      r.bleu4 = std::stod(f[2]);
      r.rouge1 = std::stod(f[3]);
      r.rouge2 = std::stod(f[4]);
      r.rougeL = std::stod(f[5]);
      rows.emplace_back(f[0], r);
    }
    eval::write_metrics_markdown(rows, reports / "metrics.md");
    any = true;
  }
  if (fs::exists(ablation_csv)) {
    std::ifstream in(ablation_csv);
    std::string line;
    std::getline(in, line);  // header
    std::map<std::string, eval::MetricReport> rows;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      auto f = split_csv_line(line);
      if (f.size() != 11) fail(Errc::MalformedRecord, "bad ablation row: " + line);
      eval::MetricReport r;  // metric columns interleave with delta columns
      r.bert_score = std::stod(f[1]);
      r.bleu4 = std::stod(f[3]);
      r.rouge1 = std::stod(f[5]);
      r.rouge2 = std::stod(f[7]);
      r.rougeL = std::stod(f[9]);
      rows.emplace(f[0], r);
    }
    auto table = eval::ablation_table(rows);
    eval::write_ablation_markdown(table, reports / "ablation.md");
    any = true;
  }
  std::cout << "reports regenerated under " << reports.string() << "\n";
  return any ? 0 : 1;
}

int dispatch(const std::string& command, const RunConfig& cfg, const json& args);

int cmd_rerun(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) fail(Errc::Io, "cannot open manifest: " + manifest_path);
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    fail(Errc::MalformedRecord,
         "manifest parse failure in " + manifest_path + ": " + e.what());
  }
  if (!m.contains("command") || !m.contains("config") || !m.contains("args")) {
    fail(Errc::MalformedRecord, "manifest missing command/config/args");
  }
  RunConfig cfg = config_from_json(m.at("config"));
  validate_run_config(cfg);
  return dispatch(m.at("command").get<std::string>(), cfg, m.at("args"));
}

std::string arg_or(const json& args, const char* key, const std::string& fallback) {
  if (args.contains(key)) return args.at(key).get<std::string>();
  return fallback;
}

int dispatch(const std::string& command, const RunConfig& cfg, const json& args) {
  if (command == "ingest") return cmd_ingest(cfg);
  if (command == "kg-extract") return cmd_kg_extract(cfg);
  if (command == "kg-import") return cmd_kg_import(cfg);
  if (command == "verbalize") return cmd_verbalize(cfg);
  if (command == "pretrain") return cmd_pretrain(cfg, arg_or(args, "mode", "pt"));
  if (command == "sft") return cmd_sft(cfg, arg_or(args, "checkpoint", ""));
  if (command == "train-rm") return cmd_train_rm(cfg, arg_or(args, "checkpoint", ""));
  if (command == "ppo") {
    return cmd_ppo(cfg, arg_or(args, "checkpoint", ""),
                   arg_or(args, "reward_base", ""), arg_or(args, "reward_head", ""));
  }
  if (command == "pipeline") {
    return cmd_pipeline(cfg, arg_or(args, "stages", "kpt,sft,rm,ppo"));
  }
  if (command == "draft") {
    return cmd_draft(cfg, arg_or(args, "checkpoint", ""), arg_or(args, "idea", ""));
  }
  if (command == "eval") return cmd_eval(cfg, arg_or(args, "checkpoint", ""));
  if (command == "bench") return cmd_bench(cfg, arg_or(args, "checkpoint", ""));
  if (command == "ablate") return cmd_ablate(cfg);
  if (command == "report") return cmd_report(cfg);
  fail(Errc::UnknownCommand, "unknown command in manifest: " + command);
}

// ---------------------------------------------------------------------------
// flag parsing

struct CommonOpts {
  std::string config_path;
  std::string corpus;
  std::string triples;
  std::string mcq;
  std::string out_dir;
  uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* sub, CommonOpts& o) {
  sub->add_option("--config", o.config_path, "JSON config file");
  sub->add_option("--corpus", o.corpus, "patent corpus JSONL");
  sub->add_option("--triples", o.triples, "knowledge triples JSONL");
  sub->add_option("--mcq", o.mcq, "multiple-choice benchmark JSONL");
  sub->add_option("--out-dir", o.out_dir, "output directory");
  sub->add_option("--seed", o.seed, "global seed")
      ->each([&o](const std::string&) { o.seed_set = true; });
}

uint64_t parse_seed_env(const char* text) {
  errno = 0;
  char* end = nullptr;
  unsigned long long v = std::strtoull(text, &end, 10);
  if (errno != 0 || end == text || *end != '\0') {
    fail(Errc::ConfigInvalid, std::string("KFT_SEED is not an integer: ") + text);
  }
  return static_cast<uint64_t>(v);
}

RunConfig resolve_config(const CommonOpts& o) {
  RunConfig cfg =
      o.config_path.empty() ? default_config() : load_run_config(o.config_path);
  if (const char* env = std::getenv("KFT_SEED")) cfg.global_seed = parse_seed_env(env);
  if (o.seed_set) cfg.global_seed = o.seed;
  if (!o.corpus.empty()) cfg.corpus = o.corpus;
  if (!o.triples.empty()) cfg.triples = o.triples;
  if (!o.mcq.empty()) cfg.mcq = o.mcq;
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  validate_run_config(cfg);
  return cfg;
}

const std::set<std::string> kCommands = {
    "ingest", "kg-extract", "kg-import", "verbalize", "pretrain", "sft",
    "train-rm", "ppo", "pipeline", "draft", "eval", "bench", "ablate",
    "report", "rerun"};

}  // namespace

int run_command(const std::vector<std::string>& args) {
  try {
    if (!args.empty() && !args[0].empty() && args[0][0] != '-' &&
        !kCommands.count(args[0])) {
      fail(Errc::UnknownCommand, "unknown command: " + args[0]);
    }

    CLI::App app{"patent concept pipeline"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string mode = "pt";
    std::string stages = "kpt,sft,rm,ppo";
    std::string checkpoint;
    std::string reward_base;
    std::string reward_head;
    std::string idea;
    std::string manifest;

    auto* ingest = app.add_subcommand("ingest", "split corpus, build vocab and pairs");
    add_common(ingest, opts);
    auto* kg_extract = app.add_subcommand("kg-extract", "extract triples from the corpus");
    add_common(kg_extract, opts);
    auto* kg_import = app.add_subcommand("kg-import", "import and canonicalize triples");
    add_common(kg_import, opts);
    auto* verbalize = app.add_subcommand("verbalize", "emit the knowledge sentence corpus");
    add_common(verbalize, opts);
    auto* pretrain = app.add_subcommand("pretrain", "pre-train from scratch");
    add_common(pretrain, opts);
    pretrain->add_option("--mode", mode, "pt or kpt")
        ->check(CLI::IsMember({"pt", "kpt"}));
    auto* sft = app.add_subcommand("sft", "supervised fine-tuning from a checkpoint");
    add_common(sft, opts);
    sft->add_option("--checkpoint", checkpoint, "starting checkpoint")->required();
    auto* train_rm = app.add_subcommand("train-rm", "train the reward model");
    add_common(train_rm, opts);
    train_rm->add_option("--checkpoint", checkpoint, "base checkpoint")->required();
    auto* ppo = app.add_subcommand("ppo", "PPO fine-tuning against a reward model");
    add_common(ppo, opts);
    ppo->add_option("--checkpoint", checkpoint, "policy checkpoint")->required();
    ppo->add_option("--reward-base", reward_base, "reward model base checkpoint");
    ppo->add_option("--reward-head", reward_head, "reward model head JSON");
    auto* pipeline = app.add_subcommand("pipeline", "run training stages in order");
    add_common(pipeline, opts);
    pipeline->add_option("--stages", stages, "comma-separated stage tags");
    auto* draft = app.add_subcommand("draft", "scripted idea->title->abstract->claims session");
    add_common(draft, opts);
    draft->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    draft->add_option("--idea", idea, "idea text")->required();
    auto* eval_cmd = app.add_subcommand("eval", "metric report on the test split");
    add_common(eval_cmd, opts);
    eval_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    auto* bench = app.add_subcommand("bench", "multiple-choice benchmark");
    add_common(bench, opts);
    bench->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    auto* ablate = app.add_subcommand("ablate", "train and evaluate all stage combinations");
    add_common(ablate, opts);
    auto* report = app.add_subcommand("report", "re-render Markdown reports from CSVs");
    add_common(report, opts);
    auto* rerun = app.add_subcommand("rerun", "re-run a saved manifest exactly");
    rerun->add_option("manifest", manifest, "manifest JSON path")->required();

    std::vector<const char*> argv;
    argv.push_back("kft");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      return app.exit(e);
    }

    if (app.got_subcommand(rerun)) return cmd_rerun(manifest);

    RunConfig cfg = resolve_config(opts);
    if (app.got_subcommand(ingest)) return cmd_ingest(cfg);
    if (app.got_subcommand(kg_extract)) return cmd_kg_extract(cfg);
    if (app.got_subcommand(kg_import)) return cmd_kg_import(cfg);
    if (app.got_subcommand(verbalize)) return cmd_verbalize(cfg);
    if (app.got_subcommand(pretrain)) return cmd_pretrain(cfg, mode);
    if (app.got_subcommand(sft)) return cmd_sft(cfg, checkpoint);
    if (app.got_subcommand(train_rm)) return cmd_train_rm(cfg, checkpoint);
    if (app.got_subcommand(ppo)) return cmd_ppo(cfg, checkpoint, reward_base, reward_head);
    if (app.got_subcommand(pipeline)) return cmd_pipeline(cfg, stages);
    if (app.got_subcommand(draft)) return cmd_draft(cfg, checkpoint, idea);
    if (app.got_subcommand(eval_cmd)) return cmd_eval(cfg, checkpoint);
    if (app.got_subcommand(bench)) return cmd_bench(cfg, checkpoint);
    if (app.got_subcommand(ablate)) return cmd_ablate(cfg);
    if (app.got_subcommand(report)) return cmd_report(cfg);
    fail(Errc::UnknownCommand, "no command given");
  } catch (const KftError& e) {
    std::cerr << "error (" << errc_name(e.code()) << "): " << e.what() << "\n";
    return e.code() == Errc::UnknownCommand ? 2 : 1;
  }
}

}  // namespace kft::cli
