#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "kft/common/error.hpp"
#include "kft/common/rng.hpp"
#include "kft/common/text.hpp"
#include "kft/corpus/dataset.hpp"
#include "kft/corpus/tokenizer.hpp"
#include "kft/eval/embedder.hpp"
#include "kft/eval/mcq.hpp"
#include "kft/eval/metrics.hpp"
#include "kft/eval/rareness.hpp"
#include "kft/eval/reasonability.hpp"
#include "kft/eval/report.hpp"
#include "kft/kgraph/extract.hpp"
#include "kft/kgraph/schema.hpp"
#include "kft/lm/forward.hpp"
#include "kft/lm/model.hpp"

using namespace kft;
using namespace kft::eval;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("kft_eval_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
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

Tokens toks(std::initializer_list<const char*> words) {
  Tokens out;
  for (const char* w : words) out.emplace_back(w);
  return out;
}

// Reference LCS: enumerate subsequences of the shorter side and test each
// against the other side. Exponential, usable only for short inputs.
int lcs_brute_force(const Tokens& a, const Tokens& b) {
  const Tokens& s = a.size() <= b.size() ? a : b;
  const Tokens& t = a.size() <= b.size() ? b : a;
  const size_t n = s.size();
  int best = 0;
  for (uint64_t mask = 0; mask < (1ull << n); ++mask) {
    size_t ti = 0;
    int len = 0;
    bool ok = true;
    for (size_t i = 0; i < n && ok; ++i) {
      if (!(mask >> i & 1)) continue;
      while (ti < t.size() && t[ti] != s[i]) ++ti;
      if (ti == t.size()) {
        ok = false;
      } else {
        ++ti;
        ++len;
      }
    }
    if (ok) best = std::max(best, len);
  }
  return best;
}

class MapEmbedder : public Embedder {
 public:
  explicit MapEmbedder(std::map<std::string, std::vector<double>> m)
      : map_(std::move(m)) {}
  std::vector<double> embed(const std::string& token) const override {
    auto it = map_.find(token);
    if (it != map_.end()) return it->second;
    return std::vector<double>(map_.begin()->second.size(), 0.0);
  }

 private:
  std::map<std::string, std::vector<double>> map_;
};

lm::ModelConfig eval_model_config(const corpus::Vocab& vocab, uint64_t seed) {
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

kgraph::Triple mk_triple(const std::string& h, kgraph::RelationType r,
                         const std::string& t) {
  kgraph::Triple tr;
  tr.head.name = h;
  tr.tail.name = t;
  tr.relation = r;
  tr.strength = 3;
  tr.source_doc = "fixture";
  return tr;
}

}  // namespace

TEST_CASE("ROUGE and BLEU on a near-paraphrase pair") {
  Tokens cand = toks({"the", "cat", "sat", "on", "the", "mat"});
  Tokens ref = toks({"the", "cat", "is", "on", "the", "mat"});
  CHECK(rouge_n(cand, ref, 1) == doctest::Approx(0.8333333333333334).epsilon(1e-12));
  CHECK(rouge_n(cand, ref, 2) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(lcs_length(cand, ref) == 5);
  CHECK(rouge_l(cand, ref) == doctest::Approx(0.8333333333333334).epsilon(1e-12));
  CHECK(bleu4(cand, ref) == doctest::Approx(0.003343701524882112).epsilon(1e-12));
}

TEST_CASE("ROUGE and BLEU on a longer near-paraphrase pair") {
  Tokens cand = toks({"a", "fast", "blue", "pump", "drives", "cooling", "fluid",
                      "through", "the", "loop"});
  Tokens ref = toks({"a", "fast", "blue", "pump", "moves", "cooling", "fluid",
                     "around", "the", "loop", "quickly"});
  CHECK(rouge_n(cand, ref, 1) == doctest::Approx(0.7272727272727273).epsilon(1e-12));
  CHECK(rouge_n(cand, ref, 2) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(lcs_length(cand, ref) == 8);
  CHECK(rouge_l(cand, ref) == doctest::Approx(0.761904761904762).epsilon(1e-12));
  CHECK(bleu4(cand, ref) == doctest::Approx(0.3211703274087688).epsilon(1e-12));
}

TEST_CASE("short candidates hit the BLEU precision floor") {
  Tokens cand = toks({"gas", "separation"});
  Tokens ref = toks({"membrane", "module", "for", "gas", "separation"});
  CHECK(bleu4(cand, ref) == doctest::Approx(7.055995207471726e-06).epsilon(1e-12));
  CHECK(rouge_l(cand, ref) == doctest::Approx(0.5714285714285715).epsilon(1e-12));

  // Any 3-token candidate has no 4-grams, so the floored p4 caps the score.
  Tokens three = toks({"a", "b", "c"});
  Tokens ref3 = toks({"a", "b", "c", "d"});
  CHECK(bleu4(three, ref3) < 1e-2);
  CHECK(bleu4(three, ref3) > 0.0);
}

TEST_CASE("textbook ROUGE values for a prefix candidate") {
  Tokens cand = toks({"the", "cat", "sat"});
  Tokens ref = toks({"the", "cat", "sat", "on", "the", "mat"});
  CHECK(rouge_n(cand, ref, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rouge_n(cand, ref, 2) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(rouge_l(cand, ref) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("exact BLEU brevity penalty for a truncated candidate") {
  Tokens cand = toks({"a", "b", "c", "d"});
  Tokens ref = toks({"a", "b", "c", "d", "e"});
  CHECK(bleu4(cand, ref) == doctest::Approx(std::exp(-0.25)).epsilon(1e-12));
  // Candidate longer than the reference: no penalty, perfect overlap.
  CHECK(bleu4(ref, ref) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("identity fixpoints") {
  Tokens t = toks({"rotor", "drives", "the", "shaft", "assembly"});
  CHECK(rouge_n(t, t, 1) == 1.0);
  CHECK(rouge_n(t, t, 2) == 1.0);
  CHECK(rouge_l(t, t) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(bleu4(t, t) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(lcs_length(t, t) == static_cast<int>(t.size()));
}

TEST_CASE("ROUGE-1 ignores order, ROUGE-L does not") {
  Tokens ref = toks({"a", "b", "c"});
  Tokens forward = toks({"a", "b", "c"});
  Tokens reversed = toks({"c", "b", "a"});
  CHECK(rouge_n(forward, ref, 1) == rouge_n(reversed, ref, 1));
  CHECK(rouge_l(forward, ref) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rouge_l(reversed, ref) < rouge_l(forward, ref));
}

TEST_CASE("metric guards") {
  Tokens t = toks({"a", "b"});
  CHECK(code_of([&] { rouge_n(t, {}, 1); }) == Errc::ReferenceTooShort);
  CHECK(code_of([&] { rouge_n(t, toks({"a"}), 2); }) == Errc::ReferenceTooShort);
  CHECK(code_of([&] { rouge_n(t, t, 3); }) == Errc::ConfigInvalid);
  CHECK(code_of([&] { rouge_l({}, t); }) == Errc::EmptyInput);
  CHECK(code_of([&] { rouge_l(t, {}); }) == Errc::EmptyInput);
  CHECK(bleu4({}, t) == 0.0);
  // An empty candidate still scores under ROUGE-n (zero matches).
  CHECK(rouge_n({}, t, 1) == 0.0);
  // Zero LCS short-circuits to zero rather than dividing by zero.
  CHECK(rouge_l(toks({"x"}), toks({"y"})) == 0.0);
}

TEST_CASE("LCS matches a brute-force oracle on short strings") {
  const std::vector<std::string> alphabet{"x", "y", "z"};
  std::vector<Tokens> all;
  all.push_back({});
  // Every string over a 3-symbol alphabet with length <= 4.
  size_t begin = 0;
  for (int len = 1; len <= 4; ++len) {
    size_t end = all.size();
    for (size_t i = begin; i < end; ++i) {
      for (const auto& s : alphabet) {
        Tokens t = all[i];
        t.push_back(s);
        all.push_back(t);
      }
    }
    begin = end;
  }
  for (const auto& a : all) {
    for (const auto& b : all) {
      CHECK(lcs_length(a, b) == lcs_brute_force(a, b));
    }
  }

  // Random spot checks at the longer lengths the DP must also handle.
  Rng rng(404);
  for (int trial = 0; trial < 300; ++trial) {
    Tokens a, b;
    const auto la = 1 + rng.next_below(8), lb = 1 + rng.next_below(8);
    for (size_t i = 0; i < la; ++i) a.push_back(alphabet[rng.next_below(3)]);
    for (size_t i = 0; i < lb; ++i) b.push_back(alphabet[rng.next_below(3)]);
    CHECK(lcs_length(a, b) == lcs_brute_force(a, b));
  }
}

TEST_CASE("metrics stay in [0,1] on random inputs") {
  const std::vector<std::string> alphabet{"a", "b", "c"};
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    Tokens cand, ref;
    const auto lc = rng.next_below(10), lr = 2 + rng.next_below(9);
    for (size_t i = 0; i < lc; ++i) cand.push_back(alphabet[rng.next_below(3)]);
    for (size_t i = 0; i < lr; ++i) ref.push_back(alphabet[rng.next_below(3)]);
    double r1 = rouge_n(cand, ref, 1);
    double r2 = rouge_n(cand, ref, 2);
    double bl = bleu4(cand, ref);
    CHECK(r1 >= 0.0);
    CHECK(r1 <= 1.0);
    CHECK(r2 >= 0.0);
    CHECK(r2 <= 1.0);
    CHECK(bl >= 0.0);
    CHECK(bl <= 1.0);
    if (!cand.empty()) {
      double rl = rouge_l(cand, ref);
      CHECK(rl >= 0.0);
      CHECK(rl <= 1.0);
    }
  }
}

TEST_CASE("embedding similarity scoring") {
  MapEmbedder emb({{"a", {1.0, 0.0}}, {"b", {0.0, 1.0}}, {"c", {1.0, 1.0}}});

  // Candidate repeats collapse: mean over {a, b} of max cosine against {b, c}.
  double score = bert_score(toks({"a", "b", "a"}), toks({"b", "c"}), emb);
  CHECK(score == doctest::Approx(0.8535533905932737).epsilon(1e-12));

  // Orthogonal sides score zero; identical sides score one.
  CHECK(bert_score(toks({"a"}), toks({"b"}), emb) == 0.0);
  CHECK(bert_score(toks({"a", "b"}), toks({"a", "b"}), emb) ==
        doctest::Approx(1.0).epsilon(1e-12));

  CHECK(code_of([&] { bert_score({}, toks({"a"}), emb); }) == Errc::EmptyInput);
  CHECK(code_of([&] { bert_score(toks({"a"}), {}, emb); }) == Errc::EmptyInput);

  CHECK(cosine({0.0, 0.0}, {1.0, 0.0}) == 0.0);
  CHECK(cosine({2.0, 0.0}, {1.0, 0.0}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(code_of([] { cosine({1.0}, {1.0, 2.0}); }) == Errc::ConfigInvalid);
}

TEST_CASE("rareness scores entity pairs against graph co-occurrence") {
  kgraph::KnowledgeGraph kg;
  // pump/valve co-occur in three triples, motor/rotor in two, anode/cathode in one.
  kg.add(mk_triple("pump", kgraph::RelationType::UsedFor, "valve"));
  kg.add(mk_triple("pump", kgraph::RelationType::PartOf, "valve"));
  kg.add(mk_triple("pump", kgraph::RelationType::FeatureOf, "valve"));
  kg.add(mk_triple("motor", kgraph::RelationType::UsedFor, "rotor"));
  kg.add(mk_triple("motor", kgraph::RelationType::PartOf, "rotor"));
  kg.add(mk_triple("anode", kgraph::RelationType::UsedFor, "cathode"));
  REQUIRE(kg.size() == 6);
  REQUIRE(kg.max_cooccurrence() == 3);
  REQUIRE(kg.cooccurrence("pump", "valve") == 3);
  REQUIRE(kg.cooccurrence("valve", "pump") == 3);

  bool no_pairs = true;
  // The most frequent pair is maximally unsurprising.
  CHECK(rareness("The pump is used for the valve.", kg, &no_pairs) == 0.0);
  CHECK_FALSE(no_pairs);
  // A pair absent from the graph is maximally rare.
  CHECK(rareness("The widget is used for the gadget.", kg) ==
        doctest::Approx(1.0).epsilon(1e-12));
  // Intermediate counts interpolate, monotonically in the co-occurrence.
  double r_motor = rareness("The motor is used for the rotor.", kg);
  double r_anode = rareness("The anode is used for the cathode.", kg);
  CHECK(r_motor == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(r_anode == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(0.0 < r_motor);
  CHECK(r_motor < r_anode);
  CHECK(r_anode < 1.0);

  // Mean over the distinct pairs of a multi-sentence text.
  double mixed = rareness(
      "The pump is used for the valve. The anode is used for the cathode.", kg);
  CHECK(mixed == doctest::Approx((0.0 + 2.0 / 3.0) / 2.0).epsilon(1e-12));
  // Restating the same relation adds no new pair.
  double repeated = rareness(
      "The pump is used for the valve. The pump is used for the valve.", kg);
  CHECK(repeated == 0.0);

  // No extractable pairs: flagged and scored zero.
  no_pairs = false;
  CHECK(rareness("nothing relational here", kg, &no_pairs) == 0.0);
  CHECK(no_pairs);

  kgraph::KnowledgeGraph empty_kg;
  CHECK(code_of([&] { rareness("The pump is used for the valve.", empty_kg); }) ==
        Errc::EmptyGraph);
}

TEST_CASE("rareness report averages entry scores") {
  kgraph::KnowledgeGraph kg;
  kg.add(mk_triple("pump", kgraph::RelationType::UsedFor, "valve"));
  RarenessReport rep = rareness_report(
      {{"hit", "The pump is used for the valve."}, {"none", "plain text"}}, kg);
  REQUIRE(rep.entries.size() == 2);
  CHECK(rep.entries[0].text_id == "hit");
  CHECK(rep.entries[0].score == 0.0);  // the only pair is also the most frequent
  CHECK_FALSE(rep.entries[0].no_pairs);
  CHECK(rep.entries[1].no_pairs);
  CHECK(rep.average_rareness == doctest::Approx(0.0).epsilon(1e-12));

  RarenessReport empty = rareness_report({}, kg);
  CHECK(empty.entries.empty());
  CHECK(empty.average_rareness == 0.0);
}

TEST_CASE("MCQ scoring picks the likeliest choice") {
  corpus::Vocab vocab = corpus::build_vocab_from_texts(
      {"which part moves pump valve rotor stator housing gasket seal shaft"}, 32);
  lm::ModelState model = lm::init_model(eval_model_config(vocab, 41));

  const std::vector<std::string> pool{"pump",  "valve",  "rotor", "stator",
                                      "housing", "gasket", "seal",  "shaft"};

  // Items whose key is whatever the model already prefers must all be counted
  // as correct.
  std::vector<McqItem> rigged;
  Rng rig_rng(8);
  for (int i = 0; i < 10; ++i) {
    McqItem item;
    item.question = "which part moves " + std::to_string(i);
    std::vector<std::string> choices = pool;
    rig_rng.shuffle(choices);
    choices.resize(4);
    item.choices = choices;
    item.correct_index = predict_choice(model, item, vocab);
    rigged.push_back(std::move(item));
  }
  BenchResult res = run_mcq(model, rigged, vocab);
  CHECK(res.accuracy == 1.0);
  CHECK(res.correct == 10);
  CHECK(res.total == 10);

  // Identical choices tie; the lowest index wins deterministically.
  McqItem tie;
  tie.question = "which part moves";
  tie.choices = {"pump", "pump", "pump"};
  CHECK(predict_choice(model, tie, vocab) == 0);
}

TEST_CASE("an untrained model scores near chance on a 4-way benchmark") {
  corpus::Vocab vocab = corpus::build_vocab_from_texts(
      {"which component is described pump valve rotor stator housing gasket "
       "seal shaft filter nozzle"},
      32);
  lm::ModelState model = lm::init_model(eval_model_config(vocab, 43));
  const std::vector<std::string> pool{"pump",  "valve",  "rotor",  "stator",
                                      "housing", "gasket", "seal",   "shaft",
                                      "filter",  "nozzle"};
  Rng rng(2024);
  std::vector<McqItem> items;
  for (int i = 0; i < 200; ++i) {
    McqItem item;
    item.question = "which component is described " + std::to_string(i);
    std::vector<std::string> choices = pool;
    rng.shuffle(choices);
    choices.resize(4);
    item.choices = choices;
    item.correct_index = static_cast<int>(rng.next_below(4));
    items.push_back(std::move(item));
  }
  BenchResult res = run_mcq(model, items, vocab);
  CHECK(res.total == 200);
  CHECK(res.accuracy >= 0.15);
  CHECK(res.accuracy <= 0.35);
}

TEST_CASE("MCQ guards and file loading") {
  corpus::Vocab vocab = corpus::build_vocab_from_texts({"a b c"}, 16);
  lm::ModelState model = lm::init_model(eval_model_config(vocab, 47));
  CHECK(code_of([&] { run_mcq(model, {}, vocab); }) == Errc::EmptyDataset);

  McqItem one_choice;
  one_choice.question = "q";
  one_choice.choices = {"a"};
  CHECK(code_of([&] { predict_choice(model, one_choice, vocab); }) ==
        Errc::ConfigInvalid);

  McqItem bad_index;
  bad_index.question = "q";
  bad_index.choices = {"a", "b"};
  bad_index.correct_index = 5;
  CHECK(code_of([&] { run_mcq(model, {bad_index}, vocab); }) == Errc::MalformedRecord);

  McqItem too_long;
  too_long.question = "q";
  std::string huge;
  for (int i = 0; i < 200; ++i) huge += "a b c ";
  too_long.choices = {"a", huge};
  CHECK(code_of([&] { predict_choice(model, too_long, vocab); }) == Errc::ChoiceTooLong);

  fs::path dir = fresh_dir("mcq_io");
  {
    std::ofstream out(dir / "bench.jsonl");
    out << R"({"question":"pick one","choices":["a","b","c"],"answer":2})" << "\n";
    out << "\n";
    out << R"({"question":"pick again","choices":["b","c"],"answer":0})" << "\n";
  }
  auto items = load_mcq(dir / "bench.jsonl");
  REQUIRE(items.size() == 2);
  CHECK(items[0].question == "pick one");
  CHECK(items[0].choices.size() == 3);
  CHECK(items[0].correct_index == 2);
  CHECK(items[1].correct_index == 0);

  {
    std::ofstream out(dir / "bad1.jsonl");
    out << R"({"question":"no answer","choices":["a","b"]})" << "\n";
  }
  CHECK(code_of([&] { load_mcq(dir / "bad1.jsonl"); }) == Errc::MalformedRecord);
  {
    std::ofstream out(dir / "bad2.jsonl");
    out << R"({"question":"oob","choices":["a","b"],"answer":7})" << "\n";
  }
  CHECK(code_of([&] { load_mcq(dir / "bad2.jsonl"); }) == Errc::MalformedRecord);
  CHECK(code_of([&] { load_mcq(dir / "missing.jsonl"); }) == Errc::Io);
}

namespace {

std::string words(int n, const std::string& stem) {
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (!out.empty()) out += ' ';
    out += stem + std::to_string(i);
  }
  return out;
}

StructuredDraft valid_draft() {
  StructuredDraft d;
  d.title = "Self sealing pump housing with integrated thermal bypass";
  d.abstract_text = words(60, "w");
  d.claims_text =
      "1. A pump system comprising a housing and a rotor.\n"
      "2. The pump system of claim 1, wherein the housing is steel.\n"
      "3. The pump system of claim 2, further comprising a seal.";
  return d;
}

}  // namespace

TEST_CASE("structural draft checks") {
  ReasonabilityVerdict win = reasonability_check(valid_draft());
  CHECK(win.win);
  CHECK(win.failed_checks.empty());

  StructuredDraft gap = valid_draft();
  gap.claims_text = "1. A pump system comprising a housing.\n3. The pump of claim 1.";
  ReasonabilityVerdict v = reasonability_check(gap);
  CHECK_FALSE(v.win);
  REQUIRE(v.failed_checks.size() == 1);
  CHECK(v.failed_checks[0] == "consecutive-numbering");

  StructuredDraft dangling = valid_draft();
  dangling.claims_text =
      "1. A pump system comprising a housing.\n"
      "2. The pump system of claim 99, wherein the housing is steel.";
  v = reasonability_check(dangling);
  REQUIRE(v.failed_checks.size() == 1);
  CHECK(v.failed_checks[0] == "dangling-reference");

  // Forward references count as dangling even when the number exists.
  StructuredDraft forward = valid_draft();
  forward.claims_text =
      "1. The pump system of claim 2.\n"
      "2. A pump system comprising a housing.";
  v = reasonability_check(forward);
  CHECK(std::find(v.failed_checks.begin(), v.failed_checks.end(),
                  "dangling-reference") != v.failed_checks.end());

  StructuredDraft short_abstract = valid_draft();
  short_abstract.abstract_text = words(10, "w");
  v = reasonability_check(short_abstract);
  REQUIRE(v.failed_checks.size() == 1);
  CHECK(v.failed_checks[0] == "abstract-length");

  StructuredDraft long_abstract = valid_draft();
  long_abstract.abstract_text = words(300, "w");
  v = reasonability_check(long_abstract);
  REQUIRE(v.failed_checks.size() == 1);
  CHECK(v.failed_checks[0] == "abstract-length");

  StructuredDraft no_title = valid_draft();
  no_title.title = "   ";
  v = reasonability_check(no_title);
  CHECK(v.failed_checks == std::vector<std::string>{"title-nonempty"});

  StructuredDraft long_title = valid_draft();
  long_title.title = words(31, "t");
  v = reasonability_check(long_title);
  CHECK(v.failed_checks == std::vector<std::string>{"title-length"});

  StructuredDraft no_claims = valid_draft();
  no_claims.claims_text = "no numbered items in sight";
  v = reasonability_check(no_claims);
  CHECK(v.failed_checks == std::vector<std::string>{"has-claims"});

  // Every claim referencing another leaves no independent claim; claim 1's
  // reference also dangles by construction.
  StructuredDraft all_dependent = valid_draft();
  all_dependent.claims_text = "1. The device of claim 1, wherein it repeats.";
  v = reasonability_check(all_dependent);
  std::set<std::string> failed(v.failed_checks.begin(), v.failed_checks.end());
  CHECK(failed.count("independent-claim") == 1);
  CHECK(failed.count("dangling-reference") == 1);
}

TEST_CASE("claim parsing accepts dot and parenthesis numbering") {
  auto claims = parse_claims(
      "1. A compressor.\n"
      "2) The compressor of claim 1,\n"
      "   wherein the casing is aluminum.\n"
      "\n"
      "3. A method of operating the compressor.");
  REQUIRE(claims.size() == 3);
  CHECK(claims[0].first == 1);
  CHECK(claims[0].second == "A compressor.");
  CHECK(claims[1].first == 2);
  CHECK(claims[1].second ==
        "The compressor of claim 1, wherein the casing is aluminum.");
  CHECK(claims[2].first == 3);
  CHECK(parse_claims("").empty());
  CHECK(parse_claims("unnumbered prose").empty());
}

TEST_CASE("evaluating a model against its own outputs yields perfect scores") {
  corpus::Vocab vocab = corpus::build_vocab_from_texts(
      {"describe the pump", "describe the valve", "explain the rotor"}, 32);
  lm::ModelState model = lm::init_model(eval_model_config(vocab, 53));
  StaticEmbedder embedder(model, vocab);

  const uint64_t eval_seed = 11;
  lm::GenerationConfig gen;
  gen.temperature = 0.8;
  gen.max_new_tokens = 8;

  auto self_answer = [&](const std::string& query) {
    std::vector<int> prompt{corpus::Vocab::kBos};
    for (int id : corpus::encode(query, vocab).ids) prompt.push_back(id);
    prompt.push_back(corpus::Vocab::kSep);
    lm::GenerationConfig g = gen;
    g.seed = derive_seed(eval_seed, "eval:" + query);
    g.stop_tokens.push_back(corpus::Vocab::kEos);
    std::vector<int> full = lm::generate(model, prompt, g);
    corpus::TokenSeq seq;
    seq.ids.assign(full.begin() + static_cast<long>(prompt.size()), full.end());
    return corpus::decode(seq, vocab);
  };

  std::vector<corpus::DialoguePair> testset;
  for (const std::string& q :
       {std::string("describe the pump"), std::string("describe the valve")}) {
    corpus::DialoguePair p;
    p.query = q;
    p.answer = self_answer(q);
    REQUIRE(corpus::word_tokenize(p.answer).size() >= 2);
    testset.push_back(std::move(p));
  }

  std::vector<std::string> generations;
  MetricReport rep =
      evaluate_model(model, testset, embedder, vocab, gen, eval_seed, &generations);
  CHECK(rep.rouge1 == doctest::Approx(100.0).epsilon(1e-9));
  CHECK(rep.rouge2 == doctest::Approx(100.0).epsilon(1e-9));
  CHECK(rep.rougeL == doctest::Approx(100.0).epsilon(1e-9));
  CHECK(rep.bleu4 == doctest::Approx(100.0).epsilon(1e-9));
  CHECK(rep.bert_score == doctest::Approx(100.0).epsilon(1e-6));
  REQUIRE(generations.size() == 2);
  CHECK(generations[0] == testset[0].answer);
  CHECK(generations[1] == testset[1].answer);

  // Averaging over the set equals the mean of single-pair evaluations because
  // each pair's generation is seeded by its own query.
  MetricReport r1 = evaluate_model(model, {testset[0]}, embedder, vocab, gen, eval_seed);
  MetricReport r2 = evaluate_model(model, {testset[1]}, embedder, vocab, gen, eval_seed);
  CHECK(rep.rouge1 == doctest::Approx((r1.rouge1 + r2.rouge1) / 2).epsilon(1e-9));
  CHECK(rep.bleu4 == doctest::Approx((r1.bleu4 + r2.bleu4) / 2).epsilon(1e-9));

  // Overlong queries are skipped but still occupy a generations slot.
  corpus::DialoguePair overlong;
  overlong.query = words(100, "q");
  overlong.answer = "ignored";
  auto with_skip = testset;
  with_skip.push_back(overlong);
  MetricReport rep2 =
      evaluate_model(model, with_skip, embedder, vocab, gen, eval_seed, &generations);
  REQUIRE(generations.size() == 3);
  CHECK(generations[2].empty());
  CHECK(rep2.rouge1 == doctest::Approx(rep.rouge1).epsilon(1e-9));

  CHECK(code_of([&] { evaluate_model(model, {}, embedder, vocab, gen, eval_seed); }) ==
        Errc::EmptyDataset);
  CHECK(code_of([&] {
          evaluate_model(model, {overlong}, embedder, vocab, gen, eval_seed);
        }) == Errc::EmptyDataset);
}

namespace {

MetricReport mr(double bert, double bleu, double r1, double r2, double rl) {
  MetricReport m;
  m.bert_score = bert;
  m.bleu4 = bleu;
  m.rouge1 = r1;
  m.rouge2 = r2;
  m.rougeL = rl;
  return m;
}

}  // namespace

TEST_CASE("ablation table computes percentage deltas against the full method") {
  std::map<std::string, MetricReport> rows;
  rows["PT"] = mr(60.0, 10.0, 30.0, 10.0, 25.0);
  rows["PT+SFT"] = mr(70.0, 20.0, 35.0, 15.0, 30.0);
  rows["PT+SFT+RLHF"] = mr(72.0, 22.0, 36.0, 16.0, 31.0);
  rows["KPT"] = mr(65.0, 15.0, 32.0, 12.0, 27.0);
  rows["KPT+SFT"] = mr(78.0, 28.0, 39.0, 19.0, 34.0);
  rows["KPT+SFT+RLHF"] = mr(80.0, 30.0, 40.0, 20.0, 35.0);

  AblationTable table = ablation_table(rows);
  REQUIRE(table.rows.size() == kAblationRowOrder.size());
  for (size_t i = 0; i < table.rows.size(); ++i) {
    CHECK(table.rows[i].name == kAblationRowOrder[i]);
  }

  // The full method's own deltas are exactly zero.
  const AblationRow* full = nullptr;
  for (const auto& row : table.rows) {
    if (row.name == kFullMethodRow) full = &row;
  }
  REQUIRE(full != nullptr);
  CHECK(full->deltas.bert_score == 0.0);
  CHECK(full->deltas.bleu4 == 0.0);
  CHECK(full->deltas.rouge1 == 0.0);
  CHECK(full->deltas.rouge2 == 0.0);
  CHECK(full->deltas.rougeL == 0.0);

  // Every other delta recomputes from its row and the full row.
  for (const auto& row : table.rows) {
    CHECK(std::abs(row.deltas.bert_score -
                   (row.metrics.bert_score - 80.0) / 80.0 * 100.0) < 0.01);
    CHECK(std::abs(row.deltas.bleu4 - (row.metrics.bleu4 - 30.0) / 30.0 * 100.0) <
          0.01);
    CHECK(std::abs(row.deltas.rougeL - (row.metrics.rougeL - 35.0) / 35.0 * 100.0) <
          0.01);
  }
  CHECK(table.rows[0].deltas.bert_score == doctest::Approx(-25.0).epsilon(1e-12));
  CHECK(table.rows[0].deltas.bleu4 ==
        doctest::Approx(-66.66666666666667).epsilon(1e-9));

  rows.erase("KPT");
  CHECK(code_of([&] { ablation_table(rows); }) == Errc::MissingStage);

  // A zero-valued full metric cannot be a delta denominator.
  std::map<std::string, MetricReport> zeros;
  for (const auto& name : kAblationRowOrder) zeros[name] = mr(0.0, 0.0, 0.0, 0.0, 0.0);
  zeros["PT"] = mr(1.0, 1.0, 1.0, 1.0, 1.0);
  AblationTable ztable = ablation_table(zeros);
  CHECK(ztable.rows[0].deltas.bleu4 == 0.0);
}

TEST_CASE("percentage deltas format with sign and two decimals") {
  CHECK(format_delta(-78.61) == "(-78.61 %)");
  CHECK(format_delta(12.5) == "(+12.50 %)");
  CHECK(format_delta(0.0) == "(0.00 %)");
  CHECK(format_delta(0.001) == "(0.00 %)");
  CHECK(format_delta(-0.004) == "(0.00 %)");
  CHECK(format_delta(-0.006) == "(-0.01 %)");
}

TEST_CASE("report writers emit the documented layouts") {
  fs::path dir = fresh_dir("report_io");

  std::vector<std::pair<std::string, MetricReport>> rows{
      {"sft", mr(72.125, 22.5, 36.0, 16.0, 31.0)}};
  write_metrics_csv(rows, dir / "metrics.csv");
  {
    std::ifstream in(dir / "metrics.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "name,bert_score,bleu4,rouge1,rouge2,rougeL");
    std::getline(in, line);
    CHECK(line == "sft,72.125,22.500,36.000,16.000,31.000");
  }
  write_metrics_markdown(rows, dir / "metrics.md");
  {
    std::ifstream in(dir / "metrics.md");
    std::string line;
    std::getline(in, line);
    CHECK(line == "| Method | Bert Score | BLEU-4 | ROUGE-1 | ROUGE-2 | ROUGE-L |");
    std::getline(in, line);
    CHECK(line == "|---|---|---|---|---|---|");
    std::getline(in, line);
    CHECK(line.find("| sft | 72.125 |") == 0);
  }

  std::map<std::string, MetricReport> amap;
  for (const auto& name : kAblationRowOrder) amap[name] = mr(80, 30, 40, 20, 35);
  amap["PT"] = mr(60, 10, 30, 10, 25);
  AblationTable table = ablation_table(amap);
  write_ablation_csv(table, dir / "ablation.csv");
  {
    std::ifstream in(dir / "ablation.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line ==
          "name,bert_score,bert_delta,bleu4,bleu4_delta,rouge1,rouge1_delta,"
          "rouge2,rouge2_delta,rougeL,rougeL_delta");
    std::getline(in, line);
    CHECK(line.substr(0, 3) == "PT,");
    CHECK(line.find("(-25.00 %)") != std::string::npos);
    CHECK(line.find("(-66.67 %)") != std::string::npos);
  }
  write_ablation_markdown(table, dir / "ablation.md");
  {
    std::ifstream in(dir / "ablation.md");
    std::string line;
    std::getline(in, line);
    CHECK(line == "| Method | Bert Score | BLEU-4 | ROUGE-1 | ROUGE-2 | ROUGE-L |");
  }

  RarenessReport rare;
  rare.entries.push_back({"doc-1", 0.5, false});
  rare.average_rareness = 0.5;
  write_rareness_csv(rare, dir / "rare.csv");
  {
    std::ifstream in(dir / "rare.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "text_id,score");
    std::getline(in, line);
    CHECK(line == "doc-1,0.500000");
  }
}
