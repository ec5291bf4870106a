#include "kft/train/pipeline.hpp"

#include <fstream>

#include "kft/common/error.hpp"
#include "kft/common/rng.hpp"
#include "kft/lm/checkpoint.hpp"

namespace kft::train {

std::string stage_tag(Stage s) {
  switch (s) {
    case Stage::PT: return "pt";
    case Stage::KPT: return "kpt";
    case Stage::SFT: return "sft";
    case Stage::RM: return "rm";
    case Stage::PPO: return "ppo";
  }
  fail(Errc::ConfigInvalid, "unknown stage");
}

Stage stage_from_tag(const std::string& tag) {
  if (tag == "pt") return Stage::PT;
  if (tag == "kpt") return Stage::KPT;
  if (tag == "sft") return Stage::SFT;
  if (tag == "rm") return Stage::RM;
  if (tag == "ppo") return Stage::PPO;
  fail(Errc::ConfigInvalid, "unknown stage tag: " + tag);
}

void validate_stage_order(const std::vector<Stage>& stages) {
  if (stages.empty()) fail(Errc::StageOrderInvalid, "stage list must be non-empty");
  bool seen_pt = false, seen_sft = false, seen_rm = false;
  for (size_t i = 0; i < stages.size(); ++i) {
    Stage s = stages[i];
    for (size_t j = 0; j < i; ++j) {
      if (stages[j] == s) fail(Errc::StageOrderInvalid, "duplicate stage " + stage_tag(s));
    }
    switch (s) {
      case Stage::PT:
      case Stage::KPT:
        if (i != 0) {
          fail(Errc::StageOrderInvalid, "a pre-training stage must come first");
        }
        seen_pt = true;
        break;
      case Stage::SFT:
        if (!seen_pt) fail(Errc::StageOrderInvalid, "SFT requires a pre-training stage first");
        seen_sft = true;
        break;
      case Stage::RM:
        if (!seen_sft) fail(Errc::StageOrderInvalid, "RM requires SFT before it");
        seen_rm = true;
        break;
      case Stage::PPO:
        if (!seen_rm) fail(Errc::StageOrderInvalid, "PPO requires RM before it");
        break;
    }
  }
  if (!seen_pt) fail(Errc::StageOrderInvalid, "stage list needs PT or KPT first");
}

void write_curve_csv(const Curve& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::Io, "cannot open curve file for writing: " + path.string());
  out << "step,value\n";
  char buf[64];
  for (const auto& pt : curve) {
    std::snprintf(buf, sizeof(buf), "%ld,%.12g\n", pt.step, pt.value);
    out << buf;
  }
}

StageArtifacts run_pipeline(const std::vector<Stage>& stages,
                            const PipelineInputs& inputs,
                            const PipelineConfigs& configs,
                            const corpus::Vocab& vocab,
                            const std::filesystem::path& out_dir) {
  validate_stage_order(stages);
  std::filesystem::create_directories(out_dir / "checkpoints");
  std::filesystem::create_directories(out_dir / "curves");

  lm::ModelConfig mc = configs.model;
  mc.seed = derive_seed(configs.global_seed, "init");
  StageArtifacts arts;
  arts.final_model = lm::init_model(mc);

  for (Stage s : stages) {
    const std::string tag = stage_tag(s);
    StageRecord rec;
    rec.stage = s;
    rec.tag = tag;
    rec.checkpoint = out_dir / "checkpoints" / (tag + ".ckpt");

    switch (s) {
      case Stage::PT:
      case Stage::KPT: {
        TrainConfig cfg = configs.pretrain;
        cfg.seed = derive_seed(configs.global_seed, tag);
        if (s == Stage::PT) {
          cfg.alpha = 0.0;
          if (cfg.beta <= 0) cfg.beta = 1.0;
        } else if (cfg.alpha <= 0) {
          fail(Errc::ConfigInvalid, "KPT requires alpha > 0");
        }
        PretrainResult r = run_pretrain(std::move(arts.final_model),
                                        inputs.knowledge_corpus,
                                        inputs.general_corpus, vocab, cfg);
        arts.final_model = std::move(r.model);
        rec.curve = std::move(r.curve);
        break;
      }
      case Stage::SFT: {
        TrainConfig cfg = configs.sft;
        cfg.seed = derive_seed(configs.global_seed, tag);
        if (configs.sft_use_lora && !arts.final_model.lora.has_value()) {
          arts.final_model = lm::attach_lora(arts.final_model, configs.lora_rank,
                                             configs.lora_scaling);
        }
        SftResult r = run_sft(std::move(arts.final_model), inputs.sft_pairs, vocab, cfg);
        arts.final_model = std::move(r.model);
        rec.curve = std::move(r.curve);
        break;
      }
      case Stage::RM: {
        TrainConfig cfg = configs.rm;
        cfg.seed = derive_seed(configs.global_seed, tag);
        RewardTrainResult r = train_reward_model(arts.final_model,
                                                 inputs.preference_triples,
                                                 vocab, cfg);
        arts.reward_model = std::move(r.rm);
        rec.curve = std::move(r.curve);
        break;
      }
      case Stage::PPO: {
        PpoConfig cfg = configs.ppo;
        cfg.seed = derive_seed(configs.global_seed, tag);
        if (cfg.gen.stop_tokens.empty()) {
          cfg.gen.stop_tokens.push_back(corpus::Vocab::kEos);
        }
        PpoResult r = run_ppo(std::move(arts.final_model), *arts.reward_model,
                              inputs.ppo_queries, vocab, cfg);
        arts.final_model = std::move(r.model);
        arts.ppo_stats = r.curve;
        for (const auto& st : r.curve) {
          rec.curve.push_back({st.batch + 1, st.mean_reward});
        }
        break;
      }
    }

    if (s == Stage::RM) {
      arts.reward_head_path = out_dir / "checkpoints" / "rm_head.json";
      save_reward_model(*arts.reward_model, rec.checkpoint, arts.reward_head_path);
    } else {
      lm::save_checkpoint(arts.final_model, tag, rec.checkpoint);
    }
    write_curve_csv(rec.curve, out_dir / "curves" / (tag + ".csv"));
    arts.records.push_back(std::move(rec));
  }
  return arts;
}

}  // namespace kft::train
