#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <string>
#include <vector>

#include "doctest.h"
#include "kft/common/error.hpp"
#include "kft/common/rng.hpp"
#include "kft/corpus/dataset.hpp"
#include "kft/corpus/tokenizer.hpp"
#include "kft/lm/forward.hpp"
#include "kft/lm/model.hpp"
#include "kft/train/adam.hpp"
#include "kft/train/pipeline.hpp"
#include "kft/train/ppo.hpp"
#include "kft/train/reward.hpp"
#include "kft/train/stages.hpp"

using namespace kft;
using namespace kft::train;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("kft_train_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

lm::ModelConfig tiny_config(const corpus::Vocab& vocab, uint64_t seed = 7) {
  lm::ModelConfig cfg;
  cfg.vocab_size = vocab.size();
  cfg.d_model = 16;
  cfg.n_heads = 2;
  cfg.n_layers = 2;
  cfg.d_ff = 32;
  cfg.max_seq = 64;
  cfg.seed = seed;
  return cfg;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const KftError& e) {
    return e.code();
  }
  FAIL("expected a KftError");
  return Errc::Io;
}

bool states_identical(lm::ModelState& a, lm::ModelState& b) {
  auto ra = lm::named_params(a, true);
  auto rb = lm::named_params(b, true);
  if (ra.size() != rb.size()) return false;
  for (size_t i = 0; i < ra.size(); ++i) {
    if (ra[i].name != rb[i].name || ra[i].data->size() != rb[i].data->size()) return false;
    if (!ra[i].data->empty() &&
        std::memcmp(ra[i].data->data(), rb[i].data->data(),
                    ra[i].data->size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

double window_mean(const Curve& curve, size_t begin, size_t count) {
  double s = 0.0;
  for (size_t i = begin; i < begin + count; ++i) s += curve[i].value;
  return s / static_cast<double>(count);
}

}  // namespace

TEST_CASE("one Adam step matches the closed-form update") {
  AdamConfig cfg;  // lr 5e-5, betas (0.9, 0.999), eps 1e-8
  AdamStep s = adam_update(1.0, 0.5, 0.0, 0.0, 1, cfg);
  // m1 = 0.05, v1 = 2.5e-4; bias correction gives mhat = 0.5, vhat = 0.25;
  // param -= lr * 0.5 / (0.5 + 1e-8).
  CHECK(s.m == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(s.v == doctest::Approx(2.5e-4).epsilon(1e-15));
  CHECK(std::abs(s.param - 0.999950000001) < 1e-12);

  // Zero gradient leaves the parameter unchanged.
  AdamStep z = adam_update(2.0, 0.0, 0.0, 0.0, 1, cfg);
  CHECK(z.param == 2.0);
}

TEST_CASE("AdamOptimizer applies the per-coordinate update") {
  AdamConfig cfg;
  cfg.learning_rate = 1e-2;
  AdamOptimizer opt(cfg);
  std::vector<double> params{1.0, -2.0};
  std::vector<double> grads{0.5, -0.25};
  opt.step({{"w", params.data(), params.size(), &grads}});
  CHECK(opt.step_count() == 1);
  AdamStep s0 = adam_update(1.0, 0.5, 0.0, 0.0, 1, cfg);
  AdamStep s1 = adam_update(-2.0, -0.25, 0.0, 0.0, 1, cfg);
  CHECK(params[0] == doctest::Approx(s0.param).epsilon(1e-15));
  CHECK(params[1] == doctest::Approx(s1.param).epsilon(1e-15));

  // Second step uses the accumulated moments.
  opt.step({{"w", params.data(), params.size(), &grads}});
  AdamStep s0b = adam_update(s0.param, 0.5, s0.m, s0.v, 2, cfg);
  CHECK(params[0] == doctest::Approx(s0b.param).epsilon(1e-12));
}

TEST_CASE("adam_step_model freezes the base while an adapter is attached") {
  corpus::Vocab vocab = corpus::build_vocab_from_texts({"a b c d e f"}, 16);
  lm::ModelState base = lm::init_model(tiny_config(vocab));
  lm::ModelState adapted = lm::attach_lora(base, 4, 0.5);
  std::vector<double> down_before = adapted.lora->layers[0].q_down;
  lm::ParamMap grads = lm::zero_grads(adapted);
  for (auto& [name, v] : grads) {
    std::fill(v.begin(), v.end(), 0.5);  // pretend every param has gradient
  }
  AdamOptimizer opt({1e-2, 0.9, 0.999, 1e-8});
  adam_step_model(opt, adapted, grads);

  // Base matrices identical to the original; adapter factors moved.
  CHECK(adapted.tok_emb == base.tok_emb);
  CHECK(adapted.layers[0].attn_q == base.layers[0].attn_q);
  CHECK(adapted.lora->layers[0].q_down != down_before);

  // Parameters stay on the float32 grid after the step.
  for (double v : adapted.lora->layers[0].q_down) {
    CHECK(static_cast<double>(static_cast<float>(v)) == v);
  }
}

TEST_CASE("train config validation") {
  TrainConfig ok;
  CHECK_NOTHROW(validate_train_config(ok));
  TrainConfig bad = ok;
  bad.learning_rate = 0;
  CHECK(code_of([&] { validate_train_config(bad); }) == Errc::ConfigInvalid);
  bad = ok;
  bad.alpha = -1;
  CHECK(code_of([&] { validate_train_config(bad); }) == Errc::ConfigInvalid);
  bad = ok;
  bad.alpha = 0;
  bad.beta = 0;
  CHECK(code_of([&] { validate_train_config(bad); }) == Errc::ConfigInvalid);
  bad = ok;
  bad.max_steps = 0;
  CHECK(code_of([&] { validate_train_config(bad); }) == Errc::ConfigInvalid);
}

TEST_CASE("encode_pretrain wraps text in BOS/EOS with an all-true mask") {
  corpus::Vocab vocab = corpus::build_vocab_from_texts({"alpha beta gamma"}, 16);
  lm::MaskedSeq seq = encode_pretrain("alpha beta", vocab, 64);
  REQUIRE(seq.tokens.size() == 4);
  CHECK(seq.tokens.front() == corpus::Vocab::kBos);
  CHECK(seq.tokens.back() == corpus::Vocab::kEos);
  CHECK(seq.tokens[1] == vocab.word_id("alpha"));
  CHECK(std::all_of(seq.mask.begin(), seq.mask.end(), [](bool b) { return b; }));

  lm::MaskedSeq cut = encode_pretrain("alpha beta gamma alpha beta gamma", vocab, 4);
  CHECK(cut.tokens.size() == 4);
}

TEST_CASE("encode_pair masks exactly the answer-predicting positions") {
  corpus::Vocab vocab = corpus::build_vocab_from_texts({"q1 q2 a1 a2 a3"}, 16);
  corpus::DialoguePair pair{"q1 q2", "a1 a2 a3", corpus::TaskKind::Title};
  auto seq = encode_pair(pair, vocab, 64);
  REQUIRE(seq.has_value());
  // [BOS] q1 q2 [SEP] a1 a2 a3 [EOS]
  REQUIRE(seq->tokens.size() == 8);
  CHECK(seq->tokens[0] == corpus::Vocab::kBos);
  CHECK(seq->tokens[3] == corpus::Vocab::kSep);
  CHECK(seq->tokens[7] == corpus::Vocab::kEos);
  std::vector<bool> expected{false, false, false, true, true, true, false, false};
  CHECK(seq->mask == expected);

  // Query positions contribute nothing to the SFT loss.
  int masked = 0;
  for (size_t i = 0; i < seq->mask.size(); ++i) {
    if (seq->mask[i]) {
      ++masked;
      CHECK(i >= 3);
    }
  }
  CHECK(masked == 3);

  corpus::DialoguePair single{"q1 q2", "a1", corpus::TaskKind::Title};
  auto sseq = encode_pair(single, vocab, 64);
  REQUIRE(sseq.has_value());
  CHECK(std::count(sseq->mask.begin(), sseq->mask.end(), true) == 1);

  CHECK_FALSE(encode_pair(pair, vocab, 6).has_value());
}

TEST_CASE("pretrain mixture degenerates correctly at alpha=0 and beta=0") {
  corpus::Vocab vocab = corpus::build_vocab_from_texts(
      {"knowledge sentence one", "general sentence two"}, 16);
  lm::ModelState model = lm::init_model(tiny_config(vocab));
  std::vector<std::string> S{"knowledge sentence one"};
  std::vector<std::string> G{"general sentence two"};

  TrainConfig only_s;
  only_s.alpha = 1.0;
  only_s.beta = 0.0;
  only_s.epochs = 1;
  only_s.max_steps = 8;
  PretrainResult rs = run_pretrain(model, S, G, vocab, only_s);
  CHECK(rs.source_log.find('G') == std::string::npos);
  CHECK(!rs.source_log.empty());

  TrainConfig only_g;
  only_g.alpha = 0.0;
  only_g.beta = 1.0;
  only_g.epochs = 1;
  only_g.max_steps = 8;
  PretrainResult rg = run_pretrain(model, S, G, vocab, only_g);
  CHECK(rg.source_log.find('S') == std::string::npos);
  CHECK(!rg.source_log.empty());

  TrainConfig mixed;
  mixed.alpha = 1.0;
  mixed.beta = 1.0;
  mixed.epochs = 4;
  PretrainResult rm = run_pretrain(model, S, G, vocab, mixed);
  CHECK(rm.source_log.find('S') != std::string::npos);
  CHECK(rm.source_log.find('G') != std::string::npos);
}

TEST_CASE("pretrain requires matching corpora") {
  corpus::Vocab vocab = corpus::build_vocab_from_texts({"x y"}, 16);
  lm::ModelState model = lm::init_model(tiny_config(vocab));
  TrainConfig cfg;  // alpha=1, beta=1
  CHECK(code_of([&] { run_pretrain(model, {}, {"g"}, vocab, cfg); }) == Errc::EmptyCorpus);
  CHECK(code_of([&] { run_pretrain(model, {"s"}, {}, vocab, cfg); }) == Errc::EmptyCorpus);
}

TEST_CASE("pretrain loss trends downward over 200 steps") {
  std::vector<std::string> sentences;
  for (int i = 0; i < 20; ++i) {
    sentences.push_back("the pump moves fluid through the loop number " +
                        std::to_string(i % 4));
  }
  corpus::Vocab vocab = corpus::build_vocab_from_texts(sentences, 32);
  lm::ModelState model = lm::init_model(tiny_config(vocab, 5));
  TrainConfig cfg;
  cfg.alpha = 0.0;
  cfg.beta = 1.0;
  cfg.epochs = 10;
  cfg.max_steps = 200;
  cfg.learning_rate = 5e-4;
  cfg.seed = 3;
  PretrainResult res = run_pretrain(model, {}, sentences, vocab, cfg);
  REQUIRE(res.curve.size() == 200);
  const double head = window_mean(res.curve, 0, 20);
  const double tail = window_mean(res.curve, 180, 20);
  CHECK(tail < head);
}

TEST_CASE("SFT lowers mean answer NLL on the training pairs") {
  std::vector<corpus::DialoguePair> pairs;
  for (int i = 0; i < 50; ++i) {
    pairs.push_back({"describe device " + std::to_string(i % 5),
                     "a compact pump for fluid transfer", corpus::TaskKind::Title});
  }
  std::vector<std::string> texts;
  for (const auto& p : pairs) texts.push_back(p.query + " " + p.answer);
  corpus::Vocab vocab = corpus::build_vocab_from_texts(texts, 64);
  lm::ModelState model = lm::init_model(tiny_config(vocab, 9));

  auto answer_nll = [&](lm::ModelState& m) {
    double total = 0.0;
    int n = 0;
    for (const auto& p : pairs) {
      auto seq = encode_pair(p, vocab, m.config.max_seq);
      REQUIRE(seq.has_value());
      total += lm::nll_loss(m, seq->tokens, seq->mask);
      ++n;
    }
    return total / n;
  };

  const double before = answer_nll(model);
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.epochs = 2;
  cfg.seed = 21;
  SftResult res = run_sft(model, pairs, vocab, cfg);
  CHECK(res.skipped_overlong == 0);
  const double after = answer_nll(res.model);
  CHECK(after < before);
}

TEST_CASE("SFT counts and survives overlong pairs") {
  corpus::Vocab vocab = corpus::build_vocab_from_texts({"a b c"}, 16);
  std::string huge;
  for (int i = 0; i < 200; ++i) huge += "a b c ";
  std::vector<corpus::DialoguePair> pairs{
      {"a", "b c", corpus::TaskKind::Title},
      {huge, huge, corpus::TaskKind::Abstract},
  };
  lm::ModelState model = lm::init_model(tiny_config(vocab));
  TrainConfig cfg;
  cfg.epochs = 1;
  SftResult res = run_sft(model, pairs, vocab, cfg);
  CHECK(res.skipped_overlong == 1);

  std::vector<corpus::DialoguePair> all_long{{huge, huge, corpus::TaskKind::Title}};
  CHECK(code_of([&] { run_sft(model, all_long, vocab, cfg); }) == Errc::AllPairsTooLong);
  CHECK(code_of([&] { run_sft(model, {}, vocab, cfg); }) == Errc::EmptyDataset);
}

TEST_CASE("reward scoring is a head dot product over the final hidden state") {
  corpus::Vocab vocab = corpus::build_vocab_from_texts({"what is it a pump"}, 16);
  lm::ModelState base = lm::init_model(tiny_config(vocab, 13));
  RewardModel rm = make_reward_model(base);

  // Zero-initialized head scores 0 for any input.
  CHECK(reward_score(rm, "what is it", "a pump", vocab) == 0.0);
  CHECK(reward_score(rm, "a", "b", vocab) == 0.0);

  Rng rng(5);
  for (double& h : rm.head) h = rng.next_gaussian();
  const double s1 = reward_score(rm, "what is it", "a pump", vocab);
  const double s2 = reward_score(rm, "what is it", "a pump", vocab);
  CHECK(s1 == s2);

  // By-hand recomputation of head . hidden[last].
  std::vector<int> tokens{corpus::Vocab::kBos};
  for (int id : corpus::encode("what is it", vocab).ids) tokens.push_back(id);
  tokens.push_back(corpus::Vocab::kSep);
  for (int id : corpus::encode("a pump", vocab).ids) tokens.push_back(id);
  tokens.push_back(corpus::Vocab::kEos);
  lm::ForwardResult r = lm::forward(rm.base, tokens);
  const int d = rm.base.config.d_model;
  double byhand = 0.0;
  for (int k = 0; k < d; ++k) {
    byhand += rm.head[static_cast<size_t>(k)] *
              r.hidden[(tokens.size() - 1) * static_cast<size_t>(d) + static_cast<size_t>(k)];
  }
  CHECK(std::abs(s1 - byhand) < 1e-9);
  CHECK(reward_score_tokens(rm, tokens) == s1);
}

TEST_CASE("zero score margin costs exactly ln 2") {
  corpus::Vocab vocab = corpus::build_vocab_from_texts({"q good bad"}, 16);
  lm::ModelState base = lm::init_model(tiny_config(vocab, 15));
  std::vector<corpus::PreferenceTriple> prefs{{"q", "good", "bad"}};
  TrainConfig cfg;
  cfg.rm_head_only = true;
  cfg.epochs = 1;
  cfg.max_steps = 1;
  RewardTrainResult res = train_reward_model(base, prefs, vocab, cfg);
  REQUIRE(!res.curve.empty());
  // The head starts at zero, so the first recorded loss is -log(sigmoid(0)).
  CHECK(std::abs(res.curve[0].value - std::log(2.0)) < 1e-9);
}

TEST_CASE("reward training separates preferred from corrupted answers") {
  std::vector<corpus::PreferenceTriple> prefs;
  for (int i = 0; i < 40; ++i) {
    std::string q = "query " + std::to_string(i % 8);
    prefs.push_back({q, "the full detailed answer text " + std::to_string(i % 8),
                     "short"});
  }
  std::vector<std::string> texts;
  for (const auto& p : prefs) texts.push_back(p.query + " " + p.preferred + " " + p.non_preferred);
  corpus::Vocab vocab = corpus::build_vocab_from_texts(texts, 64);
  lm::ModelState base = lm::init_model(tiny_config(vocab, 19));
  TrainConfig cfg;
  cfg.rm_head_only = true;
  cfg.epochs = 3;
  cfg.learning_rate = 5e-2;
  cfg.seed = 4;
  RewardTrainResult res = train_reward_model(base, prefs, vocab, cfg);
  CHECK(pairwise_accuracy(res.rm, prefs, vocab) > 0.8);
  CHECK(code_of([&] { train_reward_model(base, {}, vocab, cfg); }) == Errc::EmptyDataset);
}

TEST_CASE("reward models persist through save/load") {
  fs::path dir = fresh_dir("rm_io");
  corpus::Vocab vocab = corpus::build_vocab_from_texts({"a b c"}, 16);
  lm::ModelState base = lm::init_model(tiny_config(vocab, 23));
  RewardModel rm = make_reward_model(base);
  Rng rng(2);
  for (double& h : rm.head) h = rng.next_gaussian();
  save_reward_model(rm, dir / "rm.ckpt", dir / "rm_head.json");
  RewardModel loaded = load_reward_model(dir / "rm.ckpt", dir / "rm_head.json");
  CHECK(loaded.head == rm.head);
  CHECK(reward_score(loaded, "a", "b c", vocab) == reward_score(rm, "a", "b c", vocab));
}

TEST_CASE("advantages are batch-whitened") {
  auto same = compute_advantage({3.0, 3.0, 3.0});
  for (double a : same) CHECK(a == doctest::Approx(0.0).epsilon(1e-12));

  auto two = compute_advantage({1.0, -1.0});
  REQUIRE(two.size() == 2);
  CHECK(std::abs(two[0] - 1.0) < 1e-6);
  CHECK(std::abs(two[1] + 1.0) < 1e-6);

  Rng rng(17);
  std::vector<double> rewards;
  for (int i = 0; i < 16; ++i) rewards.push_back(rng.next_gaussian() * 3.0 + 1.0);
  auto adv = compute_advantage(rewards);
  double mean = 0.0;
  for (double a : adv) mean += a;
  mean /= static_cast<double>(adv.size());
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  var /= static_cast<double>(adv.size());
  CHECK(std::abs(mean) < 1e-6);
  CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-6);

  CHECK(code_of([] { compute_advantage({}); }) == Errc::EmptyDataset);
}

TEST_CASE("PPO clipped term obeys the clip geometry") {
  // (A=1, eps=0.2, r=1.5) -> clip bites at 1.2.
  CHECK(ppo_term(1.5, 1.0, 0.2) == 1.2);
  // r = 1 is inside the clip band, term = A.
  CHECK(ppo_term(1.0, 0.7, 0.2) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(ppo_term(1.0, -0.3, 0.2) == doctest::Approx(-0.3).epsilon(1e-15));

  // A > 0: non-decreasing on (0, 1+eps], constant beyond.
  double prev = -1e9;
  for (double r = 0.05; r <= 1.2 + 1e-12; r += 0.05) {
    double v = ppo_term(r, 1.0, 0.2);
    CHECK(v >= prev - 1e-12);
    prev = v;
  }
  for (double r = 1.2; r <= 3.0; r += 0.1) {
    CHECK(ppo_term(r, 1.0, 0.2) == doctest::Approx(1.2).epsilon(1e-12));
  }
  // A < 0: constant on (0, 1-eps], non-increasing beyond.
  for (double r = 0.05; r <= 0.8 + 1e-12; r += 0.05) {
    CHECK(ppo_term(r, -1.0, 0.2) == doctest::Approx(-0.8).epsilon(1e-12));
  }
  prev = 1e9;
  for (double r = 0.8; r <= 3.0; r += 0.1) {
    double v = ppo_term(r, -1.0, 0.2);
    CHECK(v <= prev + 1e-12);
    prev = v;
  }
}

TEST_CASE("surrogate at ratio 1 averages to the mean advantage") {
  std::vector<double> advantages{0.5, -1.25, 2.0, 0.0};
  double surrogate = 0.0, mean_adv = 0.0;
  for (double a : advantages) {
    surrogate += ppo_term(1.0, a, 0.2);
    mean_adv += a;
  }
  surrogate /= static_cast<double>(advantages.size());
  mean_adv /= static_cast<double>(advantages.size());
  CHECK(std::abs(surrogate - mean_adv) < 1e-9);
}

TEST_CASE("ppo config validation") {
  PpoConfig ok;
  CHECK_NOTHROW(validate_ppo_config(ok));
  PpoConfig bad = ok;
  bad.clip_epsilon = 0.0;
  CHECK(code_of([&] { validate_ppo_config(bad); }) == Errc::ConfigInvalid);
  bad = ok;
  bad.clip_epsilon = 1.0;
  CHECK(code_of([&] { validate_ppo_config(bad); }) == Errc::ConfigInvalid);
  bad = ok;
  bad.kl_coefficient = -0.1;
  CHECK(code_of([&] { validate_ppo_config(bad); }) == Errc::ConfigInvalid);
  bad = ok;
  bad.ppo_epochs = 0;
  CHECK(code_of([&] { validate_ppo_config(bad); }) == Errc::ConfigInvalid);
}

TEST_CASE("PPO runs and logs per-batch statistics") {
  corpus::Vocab vocab = corpus::build_vocab_from_texts(
      {"write about the pump", "write about the valve"}, 32);
  lm::ModelState policy = lm::init_model(tiny_config(vocab, 27));
  RewardFn longer_is_better = [](const std::string&, const std::vector<int>& answer) {
    return static_cast<double>(answer.size());
  };
  PpoConfig cfg;
  cfg.rollout_batch = 4;
  cfg.ppo_epochs = 2;
  cfg.num_batches = 2;
  cfg.gen.max_new_tokens = 8;
  cfg.gen.temperature = 1.0;
  cfg.seed = 77;
  PpoResult res = run_ppo(policy, longer_is_better,
                          {"write about the pump", "write about the valve"}, vocab, cfg);
  REQUIRE(res.curve.size() == 2);
  for (const auto& st : res.curve) {
    CHECK(std::isfinite(st.mean_reward));
    CHECK(std::isfinite(st.mean_rm_score));
    CHECK(st.kl_post > -1e-12);
    CHECK(st.mean_answer_len > 0.0);
  }
  CHECK(res.curve[0].batch == 0);
  CHECK(res.curve[1].batch == 1);
  // Rollouts in the very first batch are sampled from the reference itself.
  CHECK(res.curve[0].kl_rollout == doctest::Approx(0.0).epsilon(1e-12));

  CHECK(code_of([&] { run_ppo(policy, longer_is_better, {}, vocab, cfg); }) ==
        Errc::EmptyQueries);
}

TEST_CASE("PPO is deterministic for a fixed seed") {
  corpus::Vocab vocab = corpus::build_vocab_from_texts({"describe the widget"}, 32);
  lm::ModelState policy = lm::init_model(tiny_config(vocab, 29));
  RewardFn fn = [](const std::string&, const std::vector<int>& a) {
    return static_cast<double>(a.size());
  };
  PpoConfig cfg;
  cfg.rollout_batch = 2;
  cfg.num_batches = 1;
  cfg.gen.max_new_tokens = 6;
  cfg.seed = 11;
  PpoResult a = run_ppo(policy, fn, {"describe the widget"}, vocab, cfg);
  PpoResult b = run_ppo(policy, fn, {"describe the widget"}, vocab, cfg);
  CHECK(states_identical(a.model, b.model));
  REQUIRE(a.curve.size() == b.curve.size());
  CHECK(a.curve[0].mean_reward == b.curve[0].mean_reward);
}

TEST_CASE("stage tags round-trip and order is validated") {
  for (Stage s : {Stage::PT, Stage::KPT, Stage::SFT, Stage::RM, Stage::PPO}) {
    CHECK(stage_from_tag(stage_tag(s)) == s);
  }
  CHECK(stage_tag(Stage::KPT) == "kpt");
  CHECK(code_of([] { stage_from_tag("warmup"); }) == Errc::ConfigInvalid);

  CHECK_NOTHROW(validate_stage_order({Stage::KPT}));
  CHECK_NOTHROW(validate_stage_order({Stage::PT}));
  CHECK_NOTHROW(validate_stage_order({Stage::PT, Stage::SFT}));
  CHECK_NOTHROW(validate_stage_order({Stage::KPT, Stage::SFT, Stage::RM, Stage::PPO}));
  CHECK(code_of([] { validate_stage_order({Stage::RM, Stage::PPO}); }) ==
        Errc::StageOrderInvalid);
  CHECK(code_of([] { validate_stage_order({Stage::SFT}); }) == Errc::StageOrderInvalid);
  CHECK(code_of([] { validate_stage_order({Stage::PT, Stage::RM}); }) ==
        Errc::StageOrderInvalid);
  CHECK_NOTHROW(validate_stage_order({Stage::PT, Stage::SFT, Stage::RM}));
  CHECK(code_of([] { validate_stage_order({Stage::PT, Stage::SFT, Stage::PPO}); }) ==
        Errc::StageOrderInvalid);
  CHECK(code_of([] { validate_stage_order({Stage::PT, Stage::PT}); }) ==
        Errc::StageOrderInvalid);
  CHECK(code_of([] { validate_stage_order({}); }) == Errc::StageOrderInvalid);
}

TEST_CASE("single-stage pipeline checkpoints and records one curve") {
  fs::path dir = fresh_dir("pipe_one");
  std::vector<std::string> S{"anode is a part of cell", "pump is used for flow"};
  std::vector<std::string> G{"the device works well", "a system for control"};
  std::vector<std::string> all = S;
  all.insert(all.end(), G.begin(), G.end());
  corpus::Vocab vocab = corpus::build_vocab_from_texts(all, 32);

  PipelineInputs inputs;
  inputs.knowledge_corpus = S;
  inputs.general_corpus = G;

  PipelineConfigs cfgs;
  cfgs.model = tiny_config(vocab, 31);
  cfgs.pretrain.epochs = 1;
  cfgs.pretrain.max_steps = 4;
  cfgs.global_seed = 12;

  StageArtifacts arts = run_pipeline({Stage::KPT}, inputs, cfgs, vocab, dir);
  REQUIRE(arts.records.size() == 1);
  CHECK(arts.records[0].tag == "kpt");
  CHECK(fs::exists(dir / "checkpoints" / "kpt.ckpt"));
  CHECK(fs::exists(dir / "curves" / "kpt.csv"));
  CHECK(!arts.records[0].curve.empty());
  CHECK_FALSE(arts.reward_model.has_value());
}

TEST_CASE("pipeline rejects invalid stage orders before running") {
  fs::path dir = fresh_dir("pipe_bad");
  corpus::Vocab vocab = corpus::build_vocab_from_texts({"a b"}, 16);
  PipelineInputs inputs;
  PipelineConfigs cfgs;
  cfgs.model = tiny_config(vocab);
  CHECK(code_of([&] {
          run_pipeline({Stage::RM, Stage::PPO}, inputs, cfgs, vocab, dir);
        }) == Errc::StageOrderInvalid);
  CHECK_FALSE(fs::exists(dir / "checkpoints" / "rm.ckpt"));
}

TEST_CASE("pipelines are bit-reproducible for fixed inputs and seeds") {
  std::vector<std::string> G{"one two three", "four five six", "seven eight nine"};
  corpus::Vocab vocab = corpus::build_vocab_from_texts(G, 32);

  PipelineInputs inputs;
  inputs.general_corpus = G;
  inputs.sft_pairs = {{"one two", "three", corpus::TaskKind::Title},
                      {"four five", "six", corpus::TaskKind::Title}};

  PipelineConfigs cfgs;
  cfgs.model = tiny_config(vocab, 37);
  cfgs.pretrain.alpha = 0.0;
  cfgs.pretrain.epochs = 1;
  cfgs.pretrain.max_steps = 4;
  cfgs.sft.epochs = 1;
  cfgs.sft.max_steps = 4;
  cfgs.sft_use_lora = false;
  cfgs.global_seed = 5;

  fs::path d1 = fresh_dir("pipe_rep1");
  fs::path d2 = fresh_dir("pipe_rep2");
  StageArtifacts a = run_pipeline({Stage::PT, Stage::SFT}, inputs, cfgs, vocab, d1);
  StageArtifacts b = run_pipeline({Stage::PT, Stage::SFT}, inputs, cfgs, vocab, d2);
  CHECK(states_identical(a.final_model, b.final_model));

  // Byte-identical checkpoint files.
  for (const char* name : {"pt.ckpt", "sft.ckpt"}) {
    std::ifstream f1(d1 / "checkpoints" / name, std::ios::binary);
    std::ifstream f2(d2 / "checkpoints" / name, std::ios::binary);
    std::string c1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string c2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(c1 == c2);
    CHECK(!c1.empty());
  }
}

TEST_CASE("curve CSV uses the step,value layout") {
  fs::path dir = fresh_dir("curve_csv");
  Curve curve{{1, 0.5}, {2, 0.25}};
  fs::path p = dir / "c.csv";
  write_curve_csv(curve, p);
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  CHECK(line == "step,value");
  std::getline(in, line);
  CHECK(line == "1,0.5");
  std::getline(in, line);
  CHECK(line == "2,0.25");
}
